#include "brpo/residual.hpp"

#include "brpo/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace brpo {

namespace {

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

void check_shapes(const ConfidenceTable& lam, const TabularPolicy& beta, const TabularPolicy& rho) {
  if (beta.n_states() != rho.n_states() || beta.n_actions() != rho.n_actions() ||
      lam.n_states() != beta.n_states() || lam.n_actions() != beta.n_actions()) {
    throw InvalidArgument("confidence, behavior and candidate tables differ in shape");
  }
}

}  // namespace

ConfidenceTable ConfidenceTable::constant(std::size_t n_states, std::size_t n_actions, double c) {
  if (!(c >= 0.0 && c <= 1.0)) throw InvalidArgument("constant confidence must lie in [0, 1]");
  return {Table::Constant(idx(n_states), idx(n_actions), c)};
}

std::string ConfidenceReport::describe() const {
  std::ostringstream os;
  os << (pass ? "feasible" : "infeasible") << ": max equality residual " << max_equality_residual
     << " at state " << worst_state << ", max box violation " << max_box_violation;
  return os.str();
}

ConfidenceReport validate_confidence(const ConfidenceTable& lam, const TabularPolicy& beta,
                                     const TabularPolicy& rho, double tol) {
  check_shapes(lam, beta, rho);
  ConfidenceReport rep;
  rep.state_residual.resize(beta.n_states());
  const Table diff = beta.probs() - rho.probs();
  for (Eigen::Index s = 0; s < diff.rows(); ++s) {
    const double r = std::abs(lam.lam.row(s).dot(diff.row(s)));
    rep.state_residual[static_cast<std::size_t>(s)] = r;
    if (r > rep.max_equality_residual || std::isnan(r)) {
      rep.max_equality_residual = r;
      rep.worst_state = static_cast<std::size_t>(s);
    }
  }
  if (lam.lam.size() > 0) {
    rep.max_box_violation = std::max({0.0, -lam.lam.minCoeff(), lam.lam.maxCoeff() - 1.0});
  }
  rep.pass = lam.lam.allFinite() && rep.max_equality_residual <= tol && rep.max_box_violation <= tol;
  return rep;
}

ResidualPolicy mix(const TabularPolicy& beta, const TabularPolicy& rho, const ConfidenceTable& lam,
                   double tol) {
  const ConfidenceReport rep = validate_confidence(lam, beta, rho, tol);
  if (!rep.pass) {
    std::ostringstream os;
    os << rep.describe() << "; offending states:";
    for (std::size_t s = 0; s < rep.state_residual.size(); ++s) {
      if (rep.state_residual[s] > tol) os << ' ' << s << " (" << rep.state_residual[s] << ')';
    }
    throw ConstraintViolation(os.str());
  }
  const Table clipped = lam.lam.cwiseMax(0.0).cwiseMin(1.0);
  // beta + lambda (rho - beta) is exact when lambda = 0 or rho = beta; lambda = 1 takes rho as is.
  Table pi = (clipped.array() == 1.0)
                 .select(rho.probs(), beta.probs().array() + clipped.array() * (rho.probs() - beta.probs()).array());
  for (Eigen::Index s = 0; s < pi.rows(); ++s) {
    auto row = pi.row(s);
    if (row.minCoeff() >= 0.0 && std::abs(row.sum() - 1.0) <= 1e-15) continue;
    row = row.cwiseMax(0.0);
    row /= row.sum();
  }
  return {beta, rho, {clipped}, TabularPolicy(std::move(pi))};
}

ConfidenceTable extend_tabular(std::span<const PairConfidence> entries, std::size_t n_states,
                               std::size_t n_actions) {
  Table lam = Table::Zero(idx(n_states), idx(n_actions));
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> seen =
      Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(idx(n_states), idx(n_actions), false);
  for (const PairConfidence& e : entries) {
    if (e.s >= n_states || e.a >= n_actions) throw InvalidArgument("confidence entry out of range");
    if (!(e.value >= 0.0 && e.value <= 1.0)) throw InvalidArgument("confidence entry outside [0, 1]");
    const auto s = idx(e.s);
    const auto a = idx(e.a);
    if (seen(s, a) && lam(s, a) != e.value) {
      std::ostringstream os;
      os << "conflicting confidence for (s=" << e.s << ", a=" << e.a << "): " << lam(s, a) << " vs "
         << e.value;
      throw InvalidArgument(os.str());
    }
    seen(s, a) = true;
    lam(s, a) = e.value;
  }
  return {std::move(lam)};
}

ConfidenceTable extend_tabular(const Vector& block, const Batch& batch, std::size_t n_states,
                               std::size_t n_actions) {
  const std::vector<std::size_t> states = batch_states(batch);
  if (static_cast<std::size_t>(block.size()) != states.size() * n_actions) {
    throw InvalidArgument("confidence block length must be |B_s| * |A|");
  }
  std::vector<PairConfidence> entries;
  entries.reserve(static_cast<std::size_t>(block.size()));
  for (std::size_t i = 0; i < states.size(); ++i) {
    for (std::size_t a = 0; a < n_actions; ++a) {
      entries.push_back({states[i], a, block(idx(i * n_actions + a))});
    }
  }
  return extend_tabular(entries, n_states, n_actions);
}

ConfidenceTable extend_tabular(std::span<const double> per_transition, const Batch& batch,
                               std::size_t n_states, std::size_t n_actions) {
  if (per_transition.size() != batch.size()) {
    throw InvalidArgument("need one confidence value per transition");
  }
  std::vector<PairConfidence> entries;
  entries.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    entries.push_back({batch.transitions[i].s, batch.transitions[i].a, per_transition[i]});
  }
  return extend_tabular(entries, n_states, n_actions);
}

}  // namespace brpo
