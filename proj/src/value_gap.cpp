#include "brpo/value_gap.hpp"

#include "brpo/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace brpo {

namespace {

// lambda (rho - beta), rejecting pairs where the importance ratio against beta is undefined.
Table residual_weights(const TabularPolicy& beta, const TabularPolicy& rho, const ConfidenceTable& lam) {
  if (beta.n_states() != rho.n_states() || beta.n_actions() != rho.n_actions() ||
      lam.n_states() != beta.n_states() || lam.n_actions() != beta.n_actions()) {
    throw InvalidArgument("confidence, behavior and candidate tables differ in shape");
  }
  Table w = lam.lam.array() * (rho.probs() - beta.probs()).array();
  for (Eigen::Index s = 0; s < w.rows(); ++s) {
    for (Eigen::Index a = 0; a < w.cols(); ++a) {
      if (beta.probs()(s, a) == 0.0 && w(s, a) != 0.0) {
        std::ostringstream os;
        os << "importance ratio undefined at (s=" << s << ", a=" << a << "): beta is 0 but lambda(rho-beta) = "
           << w(s, a);
        throw InvalidArgument(os.str());
      }
    }
  }
  return w;
}

Table abs_weights(const TabularPolicy& beta, const TabularPolicy& rho, const ConfidenceTable& lam) {
  return residual_weights(beta, rho, lam).cwiseAbs();
}

Matrix resolvent(const FiniteMdp& mdp, const TabularPolicy& pi) {
  const auto S = static_cast<Eigen::Index>(mdp.n_states());
  return (Matrix::Identity(S, S) - mdp.gamma() * policy_transition(mdp, pi)).partialPivLu().inverse();
}

// KL(p || q) for one state; q must cover p's support.
double kl_row(const Eigen::Ref<const Eigen::RowVectorXd>& p, const Eigen::Ref<const Eigen::RowVectorXd>& q,
              std::size_t s, const char* what) {
  double kl = 0.0;
  for (Eigen::Index a = 0; a < p.size(); ++a) {
    if (p(a) == 0.0) continue;
    if (q(a) == 0.0) {
      std::ostringstream os;
      os << what << " undefined at (s=" << s << ", a=" << a << ")";
      throw InvalidArgument(os.str());
    }
    kl += p(a) * std::log(p(a) / q(a));
  }
  return std::max(kl, 0.0);
}

}  // namespace

ResidualReward residual_rewards(const FiniteMdp& mdp, const TabularPolicy& beta, const TabularPolicy& rho,
                                const ConfidenceTable& lam, const AdvantageTable& adv, AdvantageMode mode) {
  check_dimensions(mdp, beta);
  if (adv.rows() != beta.probs().rows() || adv.cols() != beta.probs().cols()) {
    throw InvalidArgument("advantage table has wrong shape");
  }
  const Table w = residual_weights(beta, rho, lam);
  const std::size_t S = mdp.n_states();
  const std::size_t A = mdp.n_actions();
  ResidualReward out;
  out.mode = mode;
  out.delta_a = w.cwiseProduct(adv).rowwise().sum();
  out.delta_r = w.cwiseProduct(mdp.reward()).rowwise().sum();
  out.delta_t = Matrix::Zero(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(S));
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) {
      const double c = w(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a));
      if (c != 0.0) out.delta_t.row(static_cast<Eigen::Index>(s)) += c * mdp.next_state_dist(s, a);
    }
  }
  return out;
}

DiffValueReport diff_value_identity(const FiniteMdp& mdp, const TabularPolicy& beta,
                                    const TabularPolicy& rho, const ConfidenceTable& lam, double tol) {
  const ResidualPolicy rp = mix(beta, rho, lam);
  const QAndAdvantage qb = q_and_advantage(mdp, beta);
  const QAndAdvantage qp = q_and_advantage(mdp, rp.mixed);
  const auto S = static_cast<Eigen::Index>(mdp.n_states());
  const Matrix eye = Matrix::Identity(S, S);

  DiffValueReport rep;
  rep.direct = qp.v - qb.v;
  const ResidualReward hat = residual_rewards(mdp, beta, rho, lam, qp.adv, AdvantageMode::target);
  rep.beta_resolvent = (eye - mdp.gamma() * policy_transition(mdp, beta)).partialPivLu().solve(hat.delta_a);
  const ResidualReward plain = residual_rewards(mdp, beta, rho, lam, qb.adv, AdvantageMode::behavior);
  rep.pi_resolvent = (eye - mdp.gamma() * policy_transition(mdp, rp.mixed)).partialPivLu().solve(plain.delta_a);
  rep.max_deviation = std::max({(rep.direct - rep.beta_resolvent).lpNorm<Eigen::Infinity>(),
                                (rep.direct - rep.pi_resolvent).lpNorm<Eigen::Infinity>(),
                                (rep.beta_resolvent - rep.pi_resolvent).lpNorm<Eigen::Infinity>()});
  rep.pass = rep.max_deviation <= tol;
  return rep;
}

VanillaTerms vanilla_cpi_bound(const FiniteMdp& mdp, const TabularPolicy& beta, const TabularPolicy& rho,
                               const ConfidenceTable& lam, const ValueTable& u) {
  check_dimensions(mdp, beta);
  if (static_cast<std::size_t>(u.size()) != mdp.n_states()) throw InvalidArgument("U has wrong size");
  const Table w = residual_weights(beta, rho, lam);
  const ResidualPolicy rp = mix(beta, rho, lam);
  // E_{s'}[R + gamma U(s') - U(s)] per (s, a).
  const Table delta_u = bellman_q(mdp, u).colwise() - u;
  const Vector d = occupancy(mdp, beta).state;
  const double g = mdp.gamma();

  VanillaTerms out;
  out.l_tilde = d.dot(w.cwiseProduct(delta_u).rowwise().sum());
  out.eps = rp.mixed.probs().cwiseProduct(delta_u).rowwise().sum().cwiseAbs().maxCoeff();
  for (Eigen::Index s = 0; s < d.size(); ++s) {
    const double kl = kl_row(beta.probs().row(s), rho.probs().row(s), static_cast<std::size_t>(s), "KL(beta||rho)");
    out.kl_term += d(s) * std::sqrt(kl / 2.0);
  }
  out.rhs = out.l_tilde / (1.0 - g) - 2.0 * g / ((1.0 - g) * (1.0 - g)) * out.eps * out.kl_term;
  return out;
}

ResidualTerms residual_cpi_bound(const FiniteMdp& mdp, const TabularPolicy& beta, const TabularPolicy& rho,
                                 const ConfidenceTable& lam) {
  check_dimensions(mdp, beta);
  const Table w = residual_weights(beta, rho, lam);
  const AdvantageTable adv = q_and_advantage(mdp, beta).adv;
  const Vector d = occupancy(mdp, beta).state;
  const double g = mdp.gamma();

  ResidualTerms out;
  out.lp = d.dot(w.cwiseProduct(adv).rowwise().sum());
  out.lpp = d.dot(w.cwiseAbs().rowwise().sum());
  out.lppp = occupancy_matrix(mdp, beta) * Vector(w.cwiseAbs().cwiseProduct(adv.cwiseAbs()).rowwise().sum());
  out.lppp_max = out.lppp.maxCoeff();
  out.rhs = (out.lp - g / (1.0 - g) * out.lpp * out.lppp_max) / (1.0 - g);
  return out;
}

LagrangianTerms lagrangian_objective(const FiniteMdp& mdp, const ResidualTerms& terms) {
  const double g = mdp.gamma();
  LagrangianTerms out;
  out.expected_lppp = mdp.start().dot(terms.lppp);
  out.objective = (terms.lp - g / (1.0 - g) * terms.lpp * out.expected_lppp) / (1.0 - g);
  return out;
}

LagrangianTerms lagrangian_objective(const FiniteMdp& mdp, const TabularPolicy& beta, const TabularPolicy& rho,
                                     const ConfidenceTable& lam) {
  return lagrangian_objective(mdp, residual_cpi_bound(mdp, beta, rho, lam));
}

double kappa(const Eigen::Ref<const Eigen::RowVectorXd>& beta_row, const Eigen::Ref<const Eigen::RowVectorXd>& g) {
  if (beta_row.size() != g.size()) throw InvalidArgument("kappa: row sizes differ");
  double top = -std::numeric_limits<double>::infinity();
  for (Eigen::Index a = 0; a < g.size(); ++a) {
    if (beta_row(a) > 0.0) top = std::max(top, g(a) * g(a));
  }
  if (!std::isfinite(top)) throw InvalidArgument("kappa: behavior row has no support");
  double acc = 0.0;
  for (Eigen::Index a = 0; a < g.size(); ++a) {
    if (beta_row(a) > 0.0) acc += beta_row(a) * std::exp(g(a) * g(a) - top);
  }
  return 1.0 + top + std::log(acc);
}

PinskerTerms pinsker_terms(const FiniteMdp& mdp, const TabularPolicy& beta, const TabularPolicy& rho,
                           const ConfidenceTable& lam) {
  check_dimensions(mdp, beta);
  const Table aw = abs_weights(beta, rho, lam);
  const AdvantageTable adv = q_and_advantage(mdp, beta).adv;
  const Vector d = occupancy(mdp, beta).state;
  const auto S = static_cast<Eigen::Index>(mdp.n_states());

  PinskerTerms out;
  out.kappa_lam.resize(S);
  out.kappa_abs_adv_lam.resize(S);
  for (Eigen::Index s = 0; s < S; ++s) {
    const Eigen::RowVectorXd l = lam.lam.row(s);
    const Eigen::RowVectorXd la = l.cwiseProduct(adv.row(s).cwiseAbs());
    out.kappa_lam(s) = kappa(beta.probs().row(s), l);
    out.kappa_abs_adv_lam(s) = kappa(beta.probs().row(s), la);
    const double kl = kl_row(rho.probs().row(s), beta.probs().row(s), static_cast<std::size_t>(s), "KL(rho||beta)");
    out.lpp_tilde += d(s) * std::sqrt(out.kappa_lam(s) * kl / 2.0);
    out.lppp_tilde += d(s) * std::sqrt(out.kappa_abs_adv_lam(s) * kl / 2.0);
  }
  out.lpp = d.dot(aw.rowwise().sum());
  out.lppp_expected = d.dot(aw.cwiseProduct(adv.cwiseAbs()).rowwise().sum());
  out.lpp_below_tilde = out.lpp <= out.lpp_tilde;
  out.lppp_below_tilde = out.lppp_expected <= out.lppp_tilde;
  return out;
}

WeightedTerms weighted_bound(const FiniteMdp& mdp, const TabularPolicy& beta, const TabularPolicy& rho,
                             const ConfidenceTable& lam, double mu, const std::optional<AdvantageTable>& w) {
  if (!(mu >= 0.0 && mu <= 1.0)) throw InvalidArgument("mu must lie in [0, 1]");
  AdvantageTable weighted;
  if (w) {
    weighted = *w;
  } else {
    const ResidualPolicy rp = mix(beta, rho, lam);
    weighted = (1.0 - mu) * q_and_advantage(mdp, beta).adv + mu * q_and_advantage(mdp, rp.mixed).adv;
  }
  if (weighted.rows() != beta.probs().rows() || weighted.cols() != beta.probs().cols()) {
    throw InvalidArgument("weighted advantage has wrong shape");
  }
  const ResidualTerms base = residual_cpi_bound(mdp, beta, rho, lam);
  const Table rw = residual_weights(beta, rho, lam);
  const Vector d = occupancy(mdp, beta).state;
  const double g = mdp.gamma();
  WeightedTerms out;
  out.mu = mu;
  out.lp_mu = d.dot(rw.cwiseProduct(weighted).rowwise().sum());
  out.rhs = (out.lp_mu - g * (1.0 - mu) / (1.0 - g) * base.lpp * base.lppp_max) / (1.0 - g);
  return out;
}

ProofReport verify_proof_identities(const FiniteMdp& mdp, const TabularPolicy& beta, const TabularPolicy& rho,
                                    const ConfidenceTable& lam, double identity_tol, double rowsum_tol) {
  const ResidualPolicy rp = mix(beta, rho, lam);
  const ResidualReward rr =
      residual_rewards(mdp, beta, rho, lam, Table::Zero(beta.probs().rows(), beta.probs().cols()),
                       AdvantageMode::behavior);
  const double g = mdp.gamma();
  const Matrix m_beta = resolvent(mdp, beta);
  const Matrix m_pi = resolvent(mdp, rp.mixed);
  const Matrix lhs = m_pi - m_beta;
  const Matrix cross = g * m_beta * rr.delta_t * m_pi;

  ProofReport rep;
  rep.residual_minus = (lhs + cross).norm();
  rep.residual_plus = (lhs - cross).norm();
  rep.identity_residual = rep.residual_plus;
  if (rep.residual_plus <= identity_tol) rep.sign = 1;
  else if (rep.residual_minus <= identity_tol) rep.sign = -1;

  const Matrix stoch = policy_transition(mdp, beta) + rr.delta_t;
  rep.stochastic_row_dev = (stoch.rowwise().sum().array() - 1.0).abs().maxCoeff();
  rep.stochastic_min_entry = stoch.minCoeff();
  const Matrix d_beta = (1.0 - g) * m_beta;
  const Matrix dt = d_beta * rr.delta_t;
  rep.zero_rowsum_dev = dt.rowwise().sum().cwiseAbs().maxCoeff();
  const auto S = static_cast<Eigen::Index>(mdp.n_states());
  rep.mixed_rowsum_dev = ((Matrix::Identity(S, S) + dt).rowwise().sum().array() - 1.0).abs().maxCoeff();
  rep.pass = rep.identity_residual <= identity_tol && rep.stochastic_row_dev <= rowsum_tol && rep.stochastic_min_entry >= -rowsum_tol &&
             rep.zero_rowsum_dev <= rowsum_tol && rep.mixed_rowsum_dev <= rowsum_tol;
  return rep;
}

double exact_gap(const FiniteMdp& mdp, const TabularPolicy& beta, const TabularPolicy& pi) {
  return expected_return(mdp, pi) - expected_return(mdp, beta);
}

BoundReport bound_report(const FiniteMdp& mdp, const TabularPolicy& beta, const TabularPolicy& rho,
                         const ConfidenceTable& lam, const std::vector<ValueTable>& us,
                         const std::vector<double>& mus, double tol) {
  const ResidualPolicy rp = mix(beta, rho, lam);
  BoundReport rep;
  rep.exact_gap = exact_gap(mdp, beta, rp.mixed);
  auto certify = [&](std::string name, double rhs) {
    const double slack = rep.exact_gap - rhs;
    rep.certifications.push_back({std::move(name), rhs, rep.exact_gap, slack, slack >= -tol});
  };
  for (std::size_t i = 0; i < us.size(); ++i) {
    rep.vanilla = vanilla_cpi_bound(mdp, beta, rho, lam, us[i]);
    certify("vanilla_u" + std::to_string(i), rep.vanilla.rhs);
  }
  rep.residual = residual_cpi_bound(mdp, beta, rho, lam);
  certify("residual", rep.residual.rhs);
  rep.lagrangian = lagrangian_objective(mdp, rep.residual);
  rep.pinsker = pinsker_terms(mdp, beta, rho, lam);
  for (double mu : mus) {
    rep.weighted.push_back(weighted_bound(mdp, beta, rho, lam, mu));
    std::ostringstream name;
    name << "weighted_mu" << mu;
    certify(name.str(), rep.weighted.back().rhs);
  }
  return rep;
}

}  // namespace brpo
