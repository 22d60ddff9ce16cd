#include "brpo/mdp.hpp"

#include "brpo/batch.hpp"
#include "brpo/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace brpo {

namespace {

constexpr double kSimplexTol = 1e-12;

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

void check_distribution(const auto& row, const std::string& what) {
  if ((row.array() < 0.0).any() || !row.allFinite()) {
    throw InvalidArgument(what + " has a negative or non-finite entry");
  }
  const double sum = row.sum();
  if (std::abs(sum - 1.0) > kSimplexTol) {
    std::ostringstream os;
    os << what << " sums to " << sum << " (off by " << sum - 1.0 << ")";
    throw InvalidArgument(os.str());
  }
}

}  // namespace

FiniteMdp::FiniteMdp(Table reward, Table transition, Vector start, double gamma, double r_max)
    : reward_(std::move(reward)),
      transition_(std::move(transition)),
      start_(std::move(start)),
      gamma_(gamma),
      r_max_(r_max) {
  const auto S = reward_.rows();
  const auto A = reward_.cols();
  if (S == 0 || A == 0) throw InvalidArgument("MDP needs at least one state and one action");
  if (transition_.rows() != S * A || transition_.cols() != S) {
    throw InvalidArgument("transition must be (S*A) x S");
  }
  if (start_.size() != S) throw InvalidArgument("start distribution must have S entries");
  if (!(gamma_ >= 0.0 && gamma_ < 1.0)) throw InvalidArgument("gamma must lie in [0, 1)");
  if (!(r_max_ >= 0.0) || !std::isfinite(r_max_)) throw InvalidArgument("r_max must be finite and >= 0");
  if (!reward_.allFinite() || reward_.minCoeff() < 0.0 || reward_.maxCoeff() > r_max_) {
    throw InvalidArgument("rewards must lie in [0, r_max]");
  }
  for (Eigen::Index row = 0; row < transition_.rows(); ++row) {
    check_distribution(transition_.row(row),
                       "T(.|s=" + std::to_string(row / A) + ",a=" + std::to_string(row % A) + ")");
  }
  check_distribution(start_.transpose(), "start distribution");
}

FiniteMdp FiniteMdp::with_start(Vector start) const {
  return FiniteMdp(reward_, transition_, std::move(start), gamma_, r_max_);
}

FiniteMdp FiniteMdp::with_reward(Table reward, double r_max) const {
  return FiniteMdp(std::move(reward), transition_, start_, gamma_, r_max);
}

TabularPolicy::TabularPolicy(Table probs) : probs_(std::move(probs)) {
  if (probs_.rows() == 0 || probs_.cols() == 0) throw InvalidArgument("empty policy table");
  for (Eigen::Index s = 0; s < probs_.rows(); ++s) {
    check_distribution(probs_.row(s), "pi(.|s=" + std::to_string(s) + ")");
  }
}

TabularPolicy TabularPolicy::uniform(std::size_t n_states, std::size_t n_actions) {
  return TabularPolicy(Table::Constant(idx(n_states), idx(n_actions), 1.0 / static_cast<double>(n_actions)));
}

TabularPolicy TabularPolicy::deterministic(std::span<const std::size_t> actions, std::size_t n_actions) {
  Table probs = Table::Zero(idx(actions.size()), idx(n_actions));
  for (std::size_t s = 0; s < actions.size(); ++s) {
    if (actions[s] >= n_actions) throw InvalidArgument("action index out of range");
    probs(idx(s), idx(actions[s])) = 1.0;
  }
  return TabularPolicy(std::move(probs));
}

bool TabularPolicy::full_support() const { return (probs_.array() > 0.0).all(); }

void check_dimensions(const FiniteMdp& mdp, const TabularPolicy& pi) {
  if (pi.n_states() != mdp.n_states() || pi.n_actions() != mdp.n_actions()) {
    std::ostringstream os;
    os << "policy is " << pi.n_states() << "x" << pi.n_actions() << " but MDP is " << mdp.n_states()
       << "x" << mdp.n_actions();
    throw InvalidArgument(os.str());
  }
}

Matrix policy_transition(const FiniteMdp& mdp, const TabularPolicy& pi) {
  check_dimensions(mdp, pi);
  const std::size_t S = mdp.n_states();
  const std::size_t A = mdp.n_actions();
  Matrix tp = Matrix::Zero(idx(S), idx(S));
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) {
      const double p = pi(s, a);
      if (p != 0.0) tp.row(idx(s)) += p * mdp.next_state_dist(s, a);
    }
  }
  return tp;
}

Vector policy_reward(const FiniteMdp& mdp, const TabularPolicy& pi) {
  check_dimensions(mdp, pi);
  return mdp.reward().cwiseProduct(pi.probs()).rowwise().sum();
}

ValueTable evaluate_policy(const FiniteMdp& mdp, const TabularPolicy& pi) {
  const Matrix tp = policy_transition(mdp, pi);
  const Vector rp = policy_reward(mdp, pi);
  const auto S = idx(mdp.n_states());
  const Matrix system = Matrix::Identity(S, S) - mdp.gamma() * tp;
  Vector v = system.partialPivLu().solve(rp);
  const double residual = (system * v - rp).lpNorm<Eigen::Infinity>();
  const double scale = std::max(1.0, rp.lpNorm<Eigen::Infinity>() / (1.0 - mdp.gamma()));
  if (!v.allFinite() || residual > 1e-10 * scale) {
    throw NumericalError("policy evaluation residual " + std::to_string(residual));
  }
  return v;
}

QTable bellman_q(const FiniteMdp& mdp, const ValueTable& v) {
  const std::size_t S = mdp.n_states();
  const std::size_t A = mdp.n_actions();
  if (static_cast<std::size_t>(v.size()) != S) throw InvalidArgument("value table has wrong size");
  const Vector next = mdp.transition() * v;  // (S*A) expected next values
  QTable q(idx(S), idx(A));
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) {
      q(idx(s), idx(a)) = mdp.reward()(idx(s), idx(a)) + mdp.gamma() * next(idx(s * A + a));
    }
  }
  return q;
}

QAndAdvantage q_and_advantage(const FiniteMdp& mdp, const TabularPolicy& pi) {
  QAndAdvantage out;
  out.v = evaluate_policy(mdp, pi);
  out.q = bellman_q(mdp, out.v);
  out.adv = out.q.colwise() - out.v;
  // Pin on-policy deterministic actions to exactly zero advantage.
  for (Eigen::Index s = 0; s < out.adv.rows(); ++s) {
    for (Eigen::Index a = 0; a < out.adv.cols(); ++a) {
      if (pi.probs()(s, a) == 1.0) out.adv(s, a) = 0.0;
    }
  }
  return out;
}

double expected_return(const FiniteMdp& mdp, const TabularPolicy& pi) {
  return mdp.start().dot(evaluate_policy(mdp, pi));
}

OccupancyMeasure occupancy(const FiniteMdp& mdp, const TabularPolicy& pi, const Vector& start) {
  const auto S = idx(mdp.n_states());
  if (start.size() != S) throw InvalidArgument("start distribution has wrong size");
  const Matrix tp = policy_transition(mdp, pi);
  const Matrix system = Matrix::Identity(S, S) - mdp.gamma() * tp.transpose();
  OccupancyMeasure occ;
  occ.state = (1.0 - mdp.gamma()) * system.partialPivLu().solve(start);
  occ.state_action = pi.probs().array().colwise() * occ.state.array();
  occ.start = start;
  occ.normalized = true;
  return occ;
}

OccupancyMeasure occupancy(const FiniteMdp& mdp, const TabularPolicy& pi, std::size_t start_state) {
  if (start_state >= mdp.n_states()) throw InvalidArgument("start state out of range");
  Vector start = Vector::Zero(idx(mdp.n_states()));
  start(idx(start_state)) = 1.0;
  return occupancy(mdp, pi, start);
}

OccupancyMeasure occupancy(const FiniteMdp& mdp, const TabularPolicy& pi) {
  return occupancy(mdp, pi, mdp.start());
}

Matrix occupancy_matrix(const FiniteMdp& mdp, const TabularPolicy& pi) {
  const auto S = idx(mdp.n_states());
  const Matrix system = Matrix::Identity(S, S) - mdp.gamma() * policy_transition(mdp, pi);
  return (1.0 - mdp.gamma()) * system.partialPivLu().inverse();
}

std::vector<bool> absorbing_states(const FiniteMdp& mdp) {
  std::vector<bool> out(mdp.n_states(), true);
  for (std::size_t s = 0; s < mdp.n_states(); ++s) {
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      if (mdp.next_state_dist(s, a)(idx(s)) != 1.0) {
        out[s] = false;
        break;
      }
    }
  }
  return out;
}

EmpiricalModel empirical_mdp(const Batch& batch, std::size_t n_states, std::size_t n_actions,
                             double gamma, std::optional<Vector> start, double r_max) {
  if (batch.empty()) throw InvalidArgument("empirical_mdp needs a nonempty batch");
  if (n_states == 0 || n_actions == 0) throw InvalidArgument("empty state or action space");
  const auto S = idx(n_states);
  const auto A = idx(n_actions);
  Eigen::MatrixXi counts = Eigen::MatrixXi::Zero(S, A);
  Table reward_sum = Table::Zero(S, A);
  Table next_counts = Table::Zero(S * A, S);
  for (const Transition& t : batch.transitions) {
    if (t.s >= n_states || t.sp >= n_states || t.a >= n_actions) {
      throw InvalidArgument("batch transition index out of range");
    }
    counts(idx(t.s), idx(t.a)) += 1;
    reward_sum(idx(t.s), idx(t.a)) += t.r;
    next_counts(idx(t.s) * A + idx(t.a), idx(t.sp)) += 1.0;
  }
  Table reward = Table::Zero(S, A);
  Table transition(S * A, S);
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> unsupported(S, A);
  for (Eigen::Index s = 0; s < S; ++s) {
    for (Eigen::Index a = 0; a < A; ++a) {
      const int n = counts(s, a);
      unsupported(s, a) = (n == 0);
      if (n == 0) {
        transition.row(s * A + a).setConstant(1.0 / static_cast<double>(S));
      } else {
        transition.row(s * A + a) = next_counts.row(s * A + a) / static_cast<double>(n);
        reward(s, a) = reward_sum(s, a) / static_cast<double>(n);
      }
    }
  }
  Vector p0 = start ? *start : Vector::Constant(S, 1.0 / static_cast<double>(n_states));
  const double declared = std::max(r_max, reward.size() ? reward.maxCoeff() : 0.0);
  return EmpiricalModel{FiniteMdp(std::move(reward), std::move(transition), std::move(p0), gamma, declared),
                        std::move(counts), std::move(unsupported)};
}

std::vector<std::size_t> batch_states(const Batch& batch) {
  std::set<std::size_t> seen;
  for (const Transition& t : batch.transitions) seen.insert(t.s);
  return {seen.begin(), seen.end()};
}

bool BatchMeta::operator==(const BatchMeta& o) const {
  const bool same_behavior =
      behavior.has_value() == o.behavior.has_value() &&
      (!behavior || (behavior->rows() == o.behavior->rows() && behavior->cols() == o.behavior->cols() &&
                     *behavior == *o.behavior));
  return env == o.env && env_hash == o.env_hash && gamma == o.gamma && same_behavior &&
         epsilon == o.epsilon && quality == o.quality && seed == o.seed && n == o.n &&
         episode_cap == o.episode_cap && n_states == o.n_states && n_actions == o.n_actions;
}

}  // namespace brpo
