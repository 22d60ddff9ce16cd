#pragma once

#include "brpo/batch.hpp"
#include "brpo/mdp.hpp"

#include <span>
#include <string>
#include <vector>

namespace brpo {

inline constexpr double kConstraintTol = 1e-9;

/// lambda(s, a) in [0, 1].
struct ConfidenceTable {
  Table lam;

  static ConfidenceTable constant(std::size_t n_states, std::size_t n_actions, double c);
  std::size_t n_states() const { return static_cast<std::size_t>(lam.rows()); }
  std::size_t n_actions() const { return static_cast<std::size_t>(lam.cols()); }
};

/// pi = (1 - lambda) beta + lambda rho, kept together with its parts.
struct ResidualPolicy {
  TabularPolicy behavior;
  TabularPolicy candidate;
  ConfidenceTable confidence;
  TabularPolicy mixed;
};

struct ConfidenceReport {
  double max_equality_residual = 0.0;
  std::size_t worst_state = 0;
  double max_box_violation = 0.0;
  std::vector<double> state_residual;  // |sum_a lambda (beta - rho)| per state
  bool pass = true;
  std::string describe() const;
};

ConfidenceReport validate_confidence(const ConfidenceTable& lam, const TabularPolicy& beta,
                                     const TabularPolicy& rho, double tol = kConstraintTol);

/// Throws ConstraintViolation listing the offending states when lambda is infeasible.
ResidualPolicy mix(const TabularPolicy& beta, const TabularPolicy& rho, const ConfidenceTable& lam,
                   double tol = kConstraintTol);

struct PairConfidence {
  std::size_t s = 0;
  std::size_t a = 0;
  double value = 0.0;
};

/// Table with the given (s, a) entries and zeros elsewhere. Repeated pairs must agree exactly.
ConfidenceTable extend_tabular(std::span<const PairConfidence> entries, std::size_t n_states,
                               std::size_t n_actions);

/// `block` holds |A| values per distinct batch state, ordered as batch_states(batch).
ConfidenceTable extend_tabular(const Vector& block, const Batch& batch, std::size_t n_states,
                               std::size_t n_actions);

/// One value per transition, placed at its logged (s, a).
ConfidenceTable extend_tabular(std::span<const double> per_transition, const Batch& batch,
                               std::size_t n_states, std::size_t n_actions);

}  // namespace brpo
