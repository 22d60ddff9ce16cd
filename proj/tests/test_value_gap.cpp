#include "brpo/random.hpp"
#include "brpo/value_gap.hpp"

#include <doctest.h>

#include <cmath>

using namespace brpo;

namespace {

ConfidenceTable zero_lam(const TabularPolicy& beta) {
  return ConfidenceTable::constant(beta.n_states(), beta.n_actions(), 0.0);
}

}  // namespace

TEST_CASE("residual rewards vanish at the anchors") {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const RandomInstance inst = random_instance(rng);
    const AdvantageTable adv = q_and_advantage(inst.mdp, inst.beta).adv;
    const ResidualReward same = residual_rewards(inst.mdp, inst.beta, inst.beta, inst.lam, adv, AdvantageMode::behavior);
    CHECK(same.delta_a.isZero(0.0));
    CHECK(same.delta_t.isZero(0.0));
    const ResidualReward none =
        residual_rewards(inst.mdp, inst.beta, inst.rho, zero_lam(inst.beta), adv, AdvantageMode::behavior);
    CHECK(none.delta_a.isZero(0.0));
  }
}

TEST_CASE("residual reward series reproduces the exact gap") {
  Rng rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const RandomInstance inst = random_instance(rng);
    const ResidualPolicy rp = mix(inst.beta, inst.rho, inst.lam);
    const AdvantageTable adv_pi = q_and_advantage(inst.mdp, rp.mixed).adv;
    const ResidualReward hat = residual_rewards(inst.mdp, inst.beta, inst.rho, inst.lam, adv_pi, AdvantageMode::target);
    const double series = occupancy(inst.mdp, inst.beta).state.dot(hat.delta_a) / (1.0 - inst.mdp.gamma());
    CHECK(std::abs(series - exact_gap(inst.mdp, inst.beta, rp.mixed)) < 1e-9);
  }
}

TEST_CASE("difference-value identity") {
  Rng rng(7);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const RandomInstance inst = random_instance(rng);
    const DiffValueReport rep = diff_value_identity(inst.mdp, inst.beta, inst.rho, inst.lam);
    CHECK(rep.pass);
    worst = std::max(worst, rep.max_deviation);

    const DiffValueReport same = diff_value_identity(inst.mdp, inst.beta, inst.beta, inst.lam);
    CHECK(same.direct.isZero(0.0));
    CHECK(same.beta_resolvent.isZero(0.0));
    CHECK(same.pi_resolvent.isZero(0.0));
    const DiffValueReport none = diff_value_identity(inst.mdp, inst.beta, inst.rho, zero_lam(inst.beta));
    CHECK(none.direct.isZero(0.0));
    CHECK(none.beta_resolvent.isZero(0.0));
    CHECK(none.pi_resolvent.isZero(0.0));
  }
  CHECK(worst <= 1e-8);
}

TEST_CASE("vanilla bound") {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const RandomInstance inst = random_instance(rng);
    const FiniteMdp& m = inst.mdp;
    const ResidualPolicy rp = mix(inst.beta, inst.rho, inst.lam);
    const double gap = exact_gap(m, inst.beta, rp.mixed);

    const VanillaTerms tight = vanilla_cpi_bound(m, inst.beta, inst.rho, inst.lam, evaluate_policy(m, rp.mixed));
    CHECK(tight.eps <= 1e-9);
    CHECK(std::abs(tight.rhs - gap) <= 1e-8);

    const ValueTable u = random_values(rng, m.n_states(), 1.0 / (1.0 - m.gamma()));
    CHECK(gap >= vanilla_cpi_bound(m, inst.beta, inst.rho, inst.lam, u).rhs - 1e-9);

    const VanillaTerms same = vanilla_cpi_bound(m, inst.beta, inst.beta, inst.lam, u);
    CHECK(same.l_tilde == 0.0);
    CHECK(same.kl_term == 0.0);
    CHECK(same.rhs == 0.0);
  }
}

TEST_CASE("residual bound and its Lagrangian relaxation") {
  Rng rng(10);
  for (int trial = 0; trial < 200; ++trial) {
    const RandomInstance inst = random_instance(rng);
    const FiniteMdp& m = inst.mdp;
    const double gap = exact_gap(m, inst.beta, mix(inst.beta, inst.rho, inst.lam).mixed);
    const ResidualTerms t = residual_cpi_bound(m, inst.beta, inst.rho, inst.lam);
    CHECK(gap >= t.rhs - 1e-9);
    CHECK(lagrangian_objective(m, t).objective >= t.rhs - 1e-15);

    const ResidualTerms z = residual_cpi_bound(m, inst.beta, inst.rho, zero_lam(inst.beta));
    CHECK(z.lp == 0.0);
    CHECK(z.lpp == 0.0);
    CHECK(z.lppp.isZero(0.0));
    CHECK(z.rhs == 0.0);
    CHECK(lagrangian_objective(m, inst.beta, inst.rho, zero_lam(inst.beta)).objective == 0.0);
    CHECK(lagrangian_objective(m, inst.beta, inst.beta, inst.lam).objective == 0.0);
  }
}

TEST_CASE("single-start Lagrangian equals the residual bound") {
  Rng rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    const RandomInstance inst = random_instance(rng);
    const auto S = static_cast<Eigen::Index>(inst.mdp.n_states());
    Eigen::Index top = 0;
    residual_cpi_bound(inst.mdp, inst.beta, inst.rho, inst.lam).lppp.maxCoeff(&top);
    for (Eigen::Index s0 = 0; s0 < S; ++s0) {
      const FiniteMdp m = inst.mdp.with_start(Vector::Unit(S, s0));
      const ResidualTerms t = residual_cpi_bound(m, inst.beta, inst.rho, inst.lam);
      const LagrangianTerms l = lagrangian_objective(m, t);
      CHECK(l.expected_lppp == t.lppp(s0));
      if (s0 == top) CHECK(l.objective == t.rhs);
      else CHECK(l.objective >= t.rhs);
    }
  }
}

TEST_CASE("kappa") {
  Eigen::RowVectorXd beta(2);
  beta << 0.5, 0.5;
  CHECK(kappa(beta, Eigen::RowVectorXd::Zero(2)) == 1.0);
  CHECK(kappa(beta, Eigen::RowVectorXd::Ones(2)) == doctest::Approx(2.0).epsilon(1e-15));
  Eigen::RowVectorXd big(2);
  big << 30.0, 0.0;
  CHECK(std::isfinite(kappa(beta, big)));
  CHECK(kappa(beta, big) == doctest::Approx(1.0 + 900.0 + std::log(0.5)).epsilon(1e-12));
}

TEST_CASE("pinsker terms") {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const RandomInstance inst = random_instance(rng);
    const PinskerTerms same = pinsker_terms(inst.mdp, inst.beta, inst.beta, inst.lam);
    CHECK(same.lpp_tilde == 0.0);
    CHECK(same.lppp_tilde == 0.0);
    const PinskerTerms p = pinsker_terms(inst.mdp, inst.beta, inst.rho, inst.lam);
    CHECK(p.kappa_lam.minCoeff() >= 1.0);
    CHECK(p.kappa_abs_adv_lam.minCoeff() >= 1.0);
  }
}

TEST_CASE("weighted bound endpoints and certification") {
  Rng rng(14);
  for (int trial = 0; trial < 100; ++trial) {
    const RandomInstance inst = random_instance(rng);
    const FiniteMdp& m = inst.mdp;
    const double gap = exact_gap(m, inst.beta, mix(inst.beta, inst.rho, inst.lam).mixed);
    const ResidualTerms base = residual_cpi_bound(m, inst.beta, inst.rho, inst.lam);
    CHECK(weighted_bound(m, inst.beta, inst.rho, inst.lam, 0.0).rhs == doctest::Approx(base.rhs).epsilon(1e-13));
    CHECK(std::abs(weighted_bound(m, inst.beta, inst.rho, inst.lam, 1.0).rhs - gap) <= 1e-8);
    CHECK(gap >= weighted_bound(m, inst.beta, inst.rho, inst.lam, 0.5).rhs - 1e-9);
  }
}

TEST_CASE("proof identities") {
  Rng rng(15);
  for (int trial = 0; trial < 100; ++trial) {
    const RandomInstance inst = random_instance(rng);
    const ProofReport rep = verify_proof_identities(inst.mdp, inst.beta, inst.rho, inst.lam);
    CHECK(rep.pass);
    CHECK(rep.identity_residual <= 1e-8);
    CHECK(rep.sign == 1);
    CHECK(rep.stochastic_row_dev <= 1e-10);
    CHECK(rep.zero_rowsum_dev <= 1e-10);

    const ProofReport same = verify_proof_identities(inst.mdp, inst.beta, inst.beta, inst.lam);
    CHECK(same.identity_residual == doctest::Approx(0.0));
    CHECK(same.zero_rowsum_dev == 0.0);
  }
}

TEST_CASE("bound report certifications") {
  Rng rng(16);
  const RandomInstance inst = random_instance(rng);
  const std::vector<ValueTable> us{evaluate_policy(inst.mdp, inst.beta)};
  const BoundReport rep = bound_report(inst.mdp, inst.beta, inst.rho, inst.lam, us, {0.0, 0.5, 1.0});
  REQUIRE(rep.certifications.size() == 5);
  CHECK(rep.certifications[0].bound == "vanilla_u0");
  CHECK(rep.certifications[1].bound == "residual");
  CHECK(rep.certifications[3].bound == "weighted_mu0.5");
  for (const Certification& c : rep.certifications) CHECK(c.pass);
}
