#include "brpo/critic.hpp"

#include "brpo/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace brpo {

namespace {

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

ValueTable mixed_backup(const QTable& q, const TabularPolicy& beta, double mu) {
  const Vector on_policy = q.cwiseProduct(beta.probs()).rowwise().sum();
  const Vector best = q.rowwise().maxCoeff();
  return (1.0 - mu) * on_policy + mu * best;
}

}  // namespace

std::string to_string(CriticSource s) { return s == CriticSource::exact_model ? "exact_model" : "empirical_model"; }

CriticSource critic_source_from_string(const std::string& s) {
  if (s == "exact_model" || s == "exact") return CriticSource::exact_model;
  if (s == "empirical_model" || s == "empirical") return CriticSource::empirical_model;
  throw InvalidArgument("unknown critic source '" + s + "'");
}

void CriticConfig::validate() const {
  if (!(mu >= 0.0 && mu <= 1.0)) throw InvalidArgument("critic.mu must lie in [0, 1]");
  if (!(tol > 0.0)) throw InvalidArgument("critic.tol must be > 0");
  if (sweeps < 1) throw InvalidArgument("critic.sweeps must be >= 1");
}

AdvantageTable advantage_behavior(const FiniteMdp& model, const TabularPolicy& beta) {
  return q_and_advantage(model, beta).adv;
}

std::vector<std::size_t> greedy_actions(const QTable& q) {
  std::vector<std::size_t> out(static_cast<std::size_t>(q.rows()), 0);
  for (Eigen::Index s = 0; s < q.rows(); ++s) {
    const double top = q.row(s).maxCoeff();
    const double tie = 1e-12 * std::max(1.0, std::abs(top));
    for (Eigen::Index a = 0; a < q.cols(); ++a) {
      if (q(s, a) >= top - tie) {
        out[static_cast<std::size_t>(s)] = static_cast<std::size_t>(a);
        break;
      }
    }
  }
  return out;
}

MixedFixedPoint mixed_fixed_point(const FiniteMdp& model, const TabularPolicy& beta, double mu, std::size_t sweeps,
                                  double tol) {
  check_dimensions(model, beta);
  CriticConfig{mu, sweeps, tol, CriticSource::exact_model}.validate();
  const double g = model.gamma();
  MixedFixedPoint out;
  out.v = ValueTable::Zero(idx(model.n_states()));
  out.q = bellman_q(model, out.v);
  bool converged = false;
  for (std::size_t k = 0; k < sweeps; ++k) {
    const ValueTable next = mixed_backup(out.q, beta, mu);
    const double change = (next - out.v).lpNorm<Eigen::Infinity>();
    out.v = next;
    out.q = bellman_q(model, out.v);
    out.residuals.push_back(change);
    out.sweeps = k + 1;
    // Contraction bound on the distance to the fixed point.
    if (change * g <= tol * (1.0 - g)) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    std::ostringstream os;
    os << "mixed fixed point did not converge in " << sweeps << " sweeps (last change "
       << (out.residuals.empty() ? 0.0 : out.residuals.back()) << ")";
    throw NumericalError(os.str());
  }
  // Exact polish: the fixed point is the value of (1 - mu) beta + mu greedy.
  if (mu > 0.0) {
    const std::vector<std::size_t> greedy = greedy_actions(out.q);
    Table mixed = (1.0 - mu) * beta.probs();
    for (std::size_t s = 0; s < greedy.size(); ++s) mixed(idx(s), idx(greedy[s])) += mu;
    for (Eigen::Index s = 0; s < mixed.rows(); ++s) mixed.row(s) /= mixed.row(s).sum();
    const ValueTable v = evaluate_policy(model, TabularPolicy(std::move(mixed)));
    const QTable q = bellman_q(model, v);
    const double residual = (mixed_backup(q, beta, mu) - v).lpNorm<Eigen::Infinity>();
    if (residual <= tol) {
      out.v = v;
      out.q = q;
      out.polished = true;
    }
  } else {
    const QAndAdvantage exact = q_and_advantage(model, beta);
    out.v = exact.v;
    out.q = exact.q;
    out.polished = true;
  }
  return out;
}

AdvantageTable weighted_advantage(const FiniteMdp& model, const TabularPolicy& beta, double mu, std::size_t sweeps,
                                  double tol) {
  const MixedFixedPoint fp = mixed_fixed_point(model, beta, mu, sweeps, tol);
  return fp.q.colwise() - fp.v;
}

}  // namespace brpo
