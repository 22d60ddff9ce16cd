#include "brpo/baselines.hpp"

#include "brpo/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace brpo {

namespace {

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

void require_nonempty(const Batch& batch) {
  if (batch.empty()) throw InvalidArgument("baseline needs a nonempty batch");
}

}  // namespace

std::string to_string(Algo a) {
  switch (a) {
    case Algo::brpo: return "brpo";
    case Algo::brpo_c: return "brpo_c";
    case Algo::bc: return "bc";
    case Algo::batch_q: return "batch_q";
    case Algo::kl_q: return "kl_q";
    case Algo::spibb: return "spibb";
  }
  return "unknown";
}

Algo algo_from_string(const std::string& raw) {
  std::string s = raw;
  std::replace(s.begin(), s.end(), '-', '_');
  if (s == "brpo") return Algo::brpo;
  if (s == "brpo_c") return Algo::brpo_c;
  if (s == "bc") return Algo::bc;
  if (s == "batch_q") return Algo::batch_q;
  if (s == "kl_q") return Algo::kl_q;
  if (s == "spibb") return Algo::spibb;
  throw InvalidArgument("unknown algorithm '" + raw + "'");
}

void BaselineConfig::validate() const {
  critic.validate();
  if (algo == Algo::kl_q && !(kl_weight > 0.0)) throw InvalidArgument("kl_weight must be > 0");
  if (algo == Algo::spibb && !(spibb_threshold >= 0.0)) throw InvalidArgument("spibb_threshold must be >= 0");
  if (algo == Algo::brpo_c && !(const_lambda >= 0.0 && const_lambda <= 1.0)) {
    throw InvalidArgument("const_lambda must lie in [0, 1]");
  }
}

ClonedPolicy behavior_cloning(const Batch& batch, std::size_t n_states, std::size_t n_actions,
                              const std::optional<TabularPolicy>& known_beta) {
  if (known_beta) {
    if (known_beta->n_states() != n_states || known_beta->n_actions() != n_actions) {
      throw InvalidArgument("known behavior policy has wrong shape");
    }
    return {*known_beta, std::vector<bool>(n_states, false)};
  }
  require_nonempty(batch);
  Table counts = Table::Zero(idx(n_states), idx(n_actions));
  for (const Transition& t : batch.transitions) {
    if (t.s >= n_states || t.a >= n_actions) throw InvalidArgument("batch transition out of range");
    counts(idx(t.s), idx(t.a)) += 1.0;
  }
  std::vector<bool> unvisited(n_states, false);
  for (std::size_t s = 0; s < n_states; ++s) {
    const double total = counts.row(idx(s)).sum();
    if (total == 0.0) {
      unvisited[s] = true;
      counts.row(idx(s)).setConstant(1.0 / static_cast<double>(n_actions));
    } else {
      counts.row(idx(s)) /= total;
    }
  }
  return {TabularPolicy(std::move(counts)), std::move(unvisited)};
}

TabularPolicy batch_q_policy(const Batch& batch, std::size_t n_states, std::size_t n_actions, double gamma,
                             const BaselineConfig& config) {
  require_nonempty(batch);
  const EmpiricalModel em = empirical_mdp(batch, n_states, n_actions, gamma);
  const MixedFixedPoint fp = mixed_fixed_point(em.model, TabularPolicy::uniform(n_states, n_actions), 1.0,
                                               config.critic.sweeps, config.critic.tol);
  const std::vector<std::size_t> greedy = greedy_actions(fp.q);
  return TabularPolicy::deterministic(greedy, n_actions);
}

SoftQ kl_regularized_q(const FiniteMdp& model, const TabularPolicy& beta, double alpha, double tol,
                       std::size_t sweeps) {
  check_dimensions(model, beta);
  if (!(alpha > 0.0)) throw InvalidArgument("KL weight must be > 0");
  const double g = model.gamma();
  const Eigen::Index S = idx(model.n_states());
  const Eigen::Index A = idx(model.n_actions());
  auto soft_value = [&](const QTable& q) {
    ValueTable v(S);
    for (Eigen::Index s = 0; s < S; ++s) {
      double top = -std::numeric_limits<double>::infinity();
      for (Eigen::Index a = 0; a < A; ++a) {
        if (beta.probs()(s, a) > 0.0) top = std::max(top, q(s, a));
      }
      double acc = 0.0;
      for (Eigen::Index a = 0; a < A; ++a) {
        if (beta.probs()(s, a) > 0.0) acc += beta.probs()(s, a) * std::exp((q(s, a) - top) / alpha);
      }
      v(s) = top + alpha * std::log(acc);
    }
    return v;
  };
  SoftQ out{beta, bellman_q(model, ValueTable::Zero(S)), ValueTable::Zero(S)};
  bool converged = false;
  for (std::size_t k = 0; k < sweeps; ++k) {
    const ValueTable next = soft_value(out.q);
    const double change = (next - out.v).lpNorm<Eigen::Infinity>();
    out.v = next;
    out.q = bellman_q(model, out.v);
    if (change * g <= tol * (1.0 - g)) {
      converged = true;
      break;
    }
  }
  if (!converged) throw NumericalError("soft Q iteration did not converge");
  Table pi = Table::Zero(S, A);
  for (Eigen::Index s = 0; s < S; ++s) {
    const double top = out.q.row(s).maxCoeff();
    for (Eigen::Index a = 0; a < A; ++a) pi(s, a) = beta.probs()(s, a) * std::exp((out.q(s, a) - top) / alpha);
    pi.row(s) /= pi.row(s).sum();
  }
  out.policy = TabularPolicy(std::move(pi));
  return out;
}

TabularPolicy kl_q_policy(const Batch& batch, const TabularPolicy& beta, double gamma, const BaselineConfig& config) {
  require_nonempty(batch);
  const EmpiricalModel em = empirical_mdp(batch, beta.n_states(), beta.n_actions(), gamma);
  return kl_regularized_q(em.model, beta, config.kl_weight, config.critic.tol).policy;
}

Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> spibb_certain(const Eigen::MatrixXi& counts, double threshold,
                                                                  SpibbMode mode) {
  const double max_count = counts.size() ? static_cast<double>(counts.maxCoeff()) : 0.0;
  const double cut = mode == SpibbMode::fraction ? threshold * max_count : threshold;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> certain(counts.rows(), counts.cols());
  for (Eigen::Index s = 0; s < counts.rows(); ++s) {
    for (Eigen::Index a = 0; a < counts.cols(); ++a) {
      certain(s, a) = static_cast<double>(counts(s, a)) >= cut;
    }
  }
  return certain;
}

TabularPolicy spibb_from_q(const TabularPolicy& beta, const QTable& q,
                           const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>& certain) {
  Table pi = beta.probs();
  for (Eigen::Index s = 0; s < pi.rows(); ++s) {
    double free_mass = 0.0;
    double top = -std::numeric_limits<double>::infinity();
    for (Eigen::Index a = 0; a < pi.cols(); ++a) {
      if (!certain(s, a)) continue;
      free_mass += pi(s, a);
      top = std::max(top, q(s, a));
    }
    Eigen::Index best = -1;
    const double tie = 1e-12 * std::max(1.0, std::abs(top));
    for (Eigen::Index a = 0; a < pi.cols() && best < 0; ++a) {
      if (certain(s, a) && q(s, a) >= top - tie) best = a;
    }
    if (best < 0) continue;
    for (Eigen::Index a = 0; a < pi.cols(); ++a) {
      if (certain(s, a)) pi(s, a) = 0.0;
    }
    pi(s, best) = free_mass;
  }
  return TabularPolicy(std::move(pi));
}

TabularPolicy spibb_policy(const Batch& batch, const TabularPolicy& beta, double gamma, const BaselineConfig& config) {
  require_nonempty(batch);
  const EmpiricalModel em = empirical_mdp(batch, beta.n_states(), beta.n_actions(), gamma);
  const MixedFixedPoint fp = mixed_fixed_point(em.model, beta, 1.0, config.critic.sweeps, config.critic.tol);
  return spibb_from_q(beta, fp.q, spibb_certain(em.counts, config.spibb_threshold, config.spibb_mode));
}

ResidualPolicy brpo_constant(const TabularPolicy& beta, const AdvantageTable& adv, double gamma, double c,
                             const SolverConfig& solver) {
  const ConfidenceTable lam = ConfidenceTable::constant(beta.n_states(), beta.n_actions(), c);
  if (c == 0.0) return mix(beta, beta, lam);
  const Vector tau = temperatures(beta, lam, adv, gamma, solver.kappa_max, solver.decay_eps, 0);
  return mix(beta, candidate_policy(beta, adv, lam, tau), lam);
}

}  // namespace brpo
