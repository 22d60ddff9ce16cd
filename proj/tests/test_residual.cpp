#include "brpo/batch.hpp"
#include "brpo/error.hpp"
#include "brpo/qp.hpp"
#include "brpo/random.hpp"
#include "brpo/residual.hpp"

#include <doctest.h>

using namespace brpo;

namespace {

TabularPolicy row_policy(std::initializer_list<double> p) {
  Table t(1, static_cast<Eigen::Index>(p.size()));
  Eigen::Index i = 0;
  for (double x : p) t(0, i++) = x;
  return TabularPolicy(t);
}

}  // namespace

TEST_CASE("mix endpoints are exact") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const RandomInstance inst = random_instance(rng);
    const std::size_t S = inst.beta.n_states(), A = inst.beta.n_actions();
    CHECK(mix(inst.beta, inst.rho, ConfidenceTable::constant(S, A, 0.0)).mixed.probs() == inst.beta.probs());
    CHECK(mix(inst.beta, inst.rho, ConfidenceTable::constant(S, A, 1.0)).mixed.probs() == inst.rho.probs());
  }
}

TEST_CASE("mix one-state example") {
  const TabularPolicy beta = row_policy({0.5, 0.5});
  const TabularPolicy rho = row_policy({0.9, 0.1});
  const ResidualPolicy rp = mix(beta, rho, ConfidenceTable::constant(1, 2, 0.5));
  CHECK(rp.mixed(0, 0) == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(rp.mixed(0, 1) == doctest::Approx(0.3).epsilon(1e-15));

  ConfidenceTable bad{Table(1, 2)};
  bad.lam << 1.0, 0.0;
  CHECK_THROWS_AS(mix(beta, rho, bad), ConstraintViolation);
}

TEST_CASE("validate_confidence") {
  Rng rng(8);
  const RandomInstance inst = random_instance(rng);
  const std::size_t S = inst.beta.n_states(), A = inst.beta.n_actions();
  for (double c : {0.0, 0.3, 1.0}) {
    CHECK(validate_confidence(ConfidenceTable::constant(S, A, c), inst.beta, inst.rho).pass);
  }
  // One state with equality residual exactly 0.1: beta (0.5, 0.5), rho (0.7, 0.3), lambda (0.5, 0).
  const TabularPolicy beta = row_policy({0.5, 0.5});
  const TabularPolicy rho = row_policy({0.7, 0.3});
  ConfidenceTable lam{Table(1, 2)};
  lam.lam << 0.5, 0.0;
  const ConfidenceReport rep = validate_confidence(lam, beta, rho);
  CHECK(!rep.pass);
  CHECK(rep.max_equality_residual == doctest::Approx(0.1));
  CHECK(rep.worst_state == 0);
  CHECK(rep.describe().find("0.1") != std::string::npos);

  lam.lam << 1.2, 1.2;
  CHECK(validate_confidence(lam, beta, rho).max_box_violation == doctest::Approx(0.2));
}

TEST_CASE("QP solutions are feasible confidences") {
  Rng rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const ConfidenceQp qp = random_qp(rng);
    const QpSolution sol = solve_confidence(qp, {});
    CHECK(qp.feasible(sol.lambda, 1e-9));
  }
}

TEST_CASE("extend_tabular") {
  Batch empty;
  const ConfidenceTable z = extend_tabular(std::span<const double>{}, empty, 3, 2);
  CHECK(z.lam.isZero(0.0));

  Batch full;
  Table src(2, 2);
  src << 0.1, 0.2, 0.3, 0.4;
  std::vector<double> values;
  for (std::size_t s = 0; s < 2; ++s) {
    for (std::size_t a = 0; a < 2; ++a) {
      full.transitions.push_back({s, a, 0.0, 0});
      values.push_back(src(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)));
    }
  }
  CHECK(extend_tabular(values, full, 2, 2).lam == src);

  Batch half;
  half.transitions = {{0, 0, 0.0, 1}, {1, 1, 0.0, 0}, {0, 0, 0.0, 1}};
  const ConfidenceTable h = extend_tabular(std::vector<double>{0.25, 0.75, 0.25}, half, 2, 2);
  CHECK(h.lam(0, 0) == 0.25);
  CHECK(h.lam(1, 1) == 0.75);
  CHECK(h.lam(0, 1) == 0.0);
  CHECK(h.lam(1, 0) == 0.0);

  CHECK_THROWS_AS(extend_tabular(std::vector<double>{0.25, 0.75, 0.5}, half, 2, 2), InvalidArgument);

  Vector block(4);
  block << 0.1, 0.2, 0.3, 0.4;
  CHECK(extend_tabular(block, half, 2, 2).lam == src);
}
