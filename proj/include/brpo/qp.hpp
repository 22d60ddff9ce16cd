#pragma once

#include "brpo/batch.hpp"
#include "brpo/mdp.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace brpo {

/// Batch confidence QP over one |A|-block per distinct batch state:
///   maximize  linear' x - 1/2 x' Theta x   s.t.  M x = 0,  0 <= x <= 1,
/// with Theta = coef (u v' + v u'), u = |adv| .* v, v = omega |rho - beta|.
/// omega_s = |B_s| n_s / |B| reweights each distinct state by its batch frequency,
/// so the objective equals |B_s| (1 - gamma) times the SAA objective.
struct ConfidenceQp {
  std::vector<std::size_t> states;
  std::vector<double> state_weight;  // n_s / |B|
  std::size_t n_actions = 0;
  double gamma = 0.0;
  Vector diff;     // (rho - beta) per pair
  Vector adv;      // A per pair
  Vector abs_adv;  // |A| per pair
  Vector linear;   // omega (rho - beta) A
  Vector v;        // omega |rho - beta|
  Vector u;        // |A| .* v
  double coef = 0.0;

  std::size_t dim() const { return static_cast<std::size_t>(linear.size()); }
  std::size_t n_blocks() const { return states.size(); }

  Matrix theta() const;
  /// One row per distinct state holding (rho - beta) on its block.
  Matrix equality() const;
  double min_theta_eigenvalue() const;

  double objective(const Vector& x) const;
  Vector gradient(const Vector& x) const;
  double max_equality_residual(const Vector& x) const;
  double max_box_violation(const Vector& x) const;
  bool feasible(const Vector& x, double tol = 1e-9) const;
};

/// Frequency-weighted sample averages at a batch-level confidence vector.
struct SaaTerms {
  double lp = 0.0;     // 1/(1-g) sum_s w_s x_s'((rho-beta) A)_s
  double lpp = 0.0;    // 1/(1-g) sum_s w_s x_s'|rho-beta|_s
  double lppp = 0.0;   // g/(1-g) sum_s w_s x_s'(|rho-beta||A|)_s
  double l_bar = 0.0;  // lp - lpp * lppp
};
SaaTerms saa_terms(const ConfidenceQp& qp, const Vector& x);

/// Assembles the QP from explicit per-state rows; `counts` are visit counts per state.
ConfidenceQp make_confidence_qp(const std::vector<std::size_t>& states, const std::vector<double>& counts,
                                const Table& beta_rows, const Table& rho_rows, const Table& adv_rows,
                                double gamma);

/// Distinct batch states, each weighted by its number of logged transitions.
ConfidenceQp build_confidence_qp(const Batch& batch, const TabularPolicy& beta, const TabularPolicy& rho,
                                 const AdvantageTable& adv, double gamma);

enum class QpMethod { closed_form_clip, projected_gradient, active_set, brute_force };
std::string to_string(QpMethod m);
QpMethod qp_method_from_string(const std::string& s);

struct QpOptions {
  QpMethod method = QpMethod::active_set;
  double tol = 1e-9;
  double ridge = 1e-6;
  std::uint64_t seed = 0;
  std::size_t random_starts = 3;
  std::size_t max_iterations = 5000;
  std::size_t enumeration_limit = 8;  // exhaustive face enumeration up to this dimension
  double grid_step = 1e-3;
  double refine_to = 1e-9;
  std::size_t grid_budget = 2000000;
  std::optional<Vector> warm_start;
};

struct QpSolution {
  Vector lambda;
  double objective = 0.0;
  std::size_t iterations = 0;
  bool exhaustive = false;
  bool warm_start_kept = false;
  QpMethod method = QpMethod::active_set;
};

QpSolution solve_confidence(const ConfidenceQp& qp, const QpOptions& options);

struct Projection {
  Vector exact;
  Vector heuristic;        // clip(y + d mu), mu = -d'y / |d|^2
  bool heuristic_differs = false;
  double heuristic_residual = 0.0;
};

/// Euclidean projection of `label` onto {x in [0,1]^A : sum_a x_a (rho - beta)_a = 0}.
Projection project_confidence(const Vector& label, const Eigen::Ref<const Eigen::RowVectorXd>& beta_row,
                              const Eigen::Ref<const Eigen::RowVectorXd>& rho_row);

/// Exact projection onto {x in [0,1]^n : d'x = 0}; plain box clip when d = 0.
Vector project_hyperplane_box(const Vector& y, const Vector& d);

/// Blockwise exact projection of a batch-level vector onto the QP feasible set.
Vector project_feasible(const ConfidenceQp& qp, const Vector& x);

}  // namespace brpo
