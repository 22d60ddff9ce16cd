#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace brpo {

/// Row-major dense table; one row per state so each row is a contiguous span.
using Table = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

using ValueTable = Vector;       // V(s)
using QTable = Table;            // Q(s, a)
using AdvantageTable = Table;    // A(s, a)

/// Finite discounted MDP (S, A, R, T, P0, gamma).
///
/// The transition kernel is stored as an (S*A) x S row-major matrix whose row
/// `s * n_actions + a` is T(. | s, a). Construction validates every invariant;
/// instances are immutable afterwards.
class FiniteMdp {
 public:
  FiniteMdp(Table reward, Table transition, Vector start, double gamma, double r_max = 1.0);

  std::size_t n_states() const { return static_cast<std::size_t>(reward_.rows()); }
  std::size_t n_actions() const { return static_cast<std::size_t>(reward_.cols()); }
  double gamma() const { return gamma_; }
  double r_max() const { return r_max_; }

  const Table& reward() const { return reward_; }
  const Table& transition() const { return transition_; }
  const Vector& start() const { return start_; }

  /// T(. | s, a) as a row view.
  auto next_state_dist(std::size_t s, std::size_t a) const {
    return transition_.row(static_cast<Eigen::Index>(s * n_actions() + a));
  }

  /// Same dynamics with a different initial distribution.
  FiniteMdp with_start(Vector start) const;
  FiniteMdp with_reward(Table reward, double r_max) const;

 private:
  Table reward_;
  Table transition_;
  Vector start_;
  double gamma_;
  double r_max_;
};

/// Stochastic policy table pi(a|s); every row lies on the simplex.
class TabularPolicy {
 public:
  explicit TabularPolicy(Table probs);

  static TabularPolicy uniform(std::size_t n_states, std::size_t n_actions);
  static TabularPolicy deterministic(std::span<const std::size_t> actions, std::size_t n_actions);

  std::size_t n_states() const { return static_cast<std::size_t>(probs_.rows()); }
  std::size_t n_actions() const { return static_cast<std::size_t>(probs_.cols()); }
  const Table& probs() const { return probs_; }
  double operator()(std::size_t s, std::size_t a) const {
    return probs_(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a));
  }
  std::span<const double> row(std::size_t s) const {
    return {probs_.data() + s * n_actions(), n_actions()};
  }
  /// True when every entry is strictly positive.
  bool full_support() const;

 private:
  Table probs_;
};

struct OccupancyMeasure {
  Vector state;         // d(s)
  Table state_action;   // d(s, a) = d(s) pi(a|s)
  Vector start;         // conditioning distribution
  bool normalized = true;
};

void check_dimensions(const FiniteMdp& mdp, const TabularPolicy& pi);

/// T_pi(s'|s) = sum_a pi(a|s) T(s'|s,a).
Matrix policy_transition(const FiniteMdp& mdp, const TabularPolicy& pi);
/// R_pi(s) = sum_a pi(a|s) R(s,a).
Vector policy_reward(const FiniteMdp& mdp, const TabularPolicy& pi);

/// Exact V_pi from (I - gamma T_pi) V = R_pi by LU.
ValueTable evaluate_policy(const FiniteMdp& mdp, const TabularPolicy& pi);

/// One Bellman backup: Q(s,a) = R(s,a) + gamma sum_s' T(s'|s,a) V(s').
QTable bellman_q(const FiniteMdp& mdp, const ValueTable& v);

struct QAndAdvantage {
  ValueTable v;
  QTable q;
  AdvantageTable adv;
};
QAndAdvantage q_and_advantage(const FiniteMdp& mdp, const TabularPolicy& pi);

/// J_pi = sum_s P0(s) V_pi(s).
double expected_return(const FiniteMdp& mdp, const TabularPolicy& pi);

/// Normalized discounted occupancy d = (1-gamma) start^T (I - gamma T_pi)^{-1}.
OccupancyMeasure occupancy(const FiniteMdp& mdp, const TabularPolicy& pi, const Vector& start);
OccupancyMeasure occupancy(const FiniteMdp& mdp, const TabularPolicy& pi, std::size_t start_state);
OccupancyMeasure occupancy(const FiniteMdp& mdp, const TabularPolicy& pi);

/// D(s0, s) = (1-gamma) (I - gamma T_pi)^{-1}: row s0 is d_pi(. | s0).
Matrix occupancy_matrix(const FiniteMdp& mdp, const TabularPolicy& pi);

/// States whose every action self-loops with probability one.
std::vector<bool> absorbing_states(const FiniteMdp& mdp);

struct Batch;

/// Maximum-likelihood tabular model estimated from batch counts.
struct EmpiricalModel {
  FiniteMdp model;
  Eigen::MatrixXi counts;                   // n(s, a)
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> unsupported;  // n(s, a) == 0
};

/// Unvisited (s, a) get uniform transitions and zero reward and are flagged.
/// `start` defaults to uniform over states since batches do not mark episode starts.
EmpiricalModel empirical_mdp(const Batch& batch, std::size_t n_states, std::size_t n_actions,
                             double gamma, std::optional<Vector> start = std::nullopt,
                             double r_max = 1.0);

}  // namespace brpo
