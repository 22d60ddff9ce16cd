#pragma once

#include "brpo/mdp.hpp"
#include "brpo/rng.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

// Independent reference computations used to cross-check the library.
namespace oracle {

using brpo::FiniteMdp;
using brpo::Table;
using brpo::TabularPolicy;
using brpo::Vector;

/// 2 states, 2 actions: 0 stays, 1 swaps; reward 1 in state 1; gamma 0.5; start at 0.
inline FiniteMdp chain2() {
  Table r(2, 2);
  r << 0, 0, 1, 1;
  Table t = Table::Zero(4, 2);
  t(0, 0) = 1;  // (0, stay)
  t(1, 1) = 1;  // (0, swap)
  t(2, 1) = 1;  // (1, stay)
  t(3, 0) = 1;  // (1, swap)
  Vector p0(2);
  p0 << 1, 0;
  return FiniteMdp(r, t, p0, 0.5);
}

inline TabularPolicy always(std::size_t a, std::size_t n_states, std::size_t n_actions) {
  std::vector<std::size_t> acts(n_states, a);
  return TabularPolicy::deterministic(acts, n_actions);
}

/// Policy evaluation by plain fixed-point iteration.
inline Vector iterate_values(const FiniteMdp& mdp, const TabularPolicy& pi, double tol = 1e-14) {
  const auto S = static_cast<Eigen::Index>(mdp.n_states());
  const auto A = static_cast<Eigen::Index>(mdp.n_actions());
  Vector v = Vector::Zero(S);
  for (int it = 0; it < 200000; ++it) {
    Vector nv = Vector::Zero(S);
    for (Eigen::Index s = 0; s < S; ++s) {
      for (Eigen::Index a = 0; a < A; ++a) {
        const double q = mdp.reward()(s, a) + mdp.gamma() * mdp.transition().row(s * A + a).dot(v);
        nv(s) += pi.probs()(s, a) * q;
      }
    }
    const double diff = (nv - v).cwiseAbs().maxCoeff();
    v = nv;
    if (diff < tol) break;
  }
  return v;
}

/// Optimal values by value iteration.
inline Vector optimal_values(const FiniteMdp& mdp, double tol = 1e-13) {
  const auto S = static_cast<Eigen::Index>(mdp.n_states());
  const auto A = static_cast<Eigen::Index>(mdp.n_actions());
  Vector v = Vector::Zero(S);
  for (int it = 0; it < 1000000; ++it) {
    Vector nv(S);
    for (Eigen::Index s = 0; s < S; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (Eigen::Index a = 0; a < A; ++a) {
        best = std::max(best, mdp.reward()(s, a) + mdp.gamma() * mdp.transition().row(s * A + a).dot(v));
      }
      nv(s) = best;
    }
    const double diff = (nv - v).cwiseAbs().maxCoeff();
    v = nv;
    if (diff < tol) break;
  }
  return v;
}

/// Discounted Monte-Carlo return from the start distribution.
inline double monte_carlo_return(const FiniteMdp& mdp, const TabularPolicy& pi, std::size_t episodes,
                                 std::size_t horizon, std::uint64_t seed) {
  brpo::Rng rng(seed);
  const std::size_t S = mdp.n_states(), A = mdp.n_actions();
  double total = 0.0;
  for (std::size_t e = 0; e < episodes; ++e) {
    std::size_t s = rng.categorical({mdp.start().data(), S});
    double disc = 1.0;
    for (std::size_t t = 0; t < horizon; ++t) {
      const std::size_t a = rng.categorical(pi.row(s));
      total += disc * mdp.reward()(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a));
      disc *= mdp.gamma();
      s = rng.categorical({mdp.transition().data() + (s * A + a) * S, S});
    }
  }
  return total / static_cast<double>(episodes);
}

/// Nearest point of {x in [0,1]^n : d'x = 0} by grid search over n-1 coordinates, the pivot
/// coordinate solved from the equality. Each level re-grids a window around the previous best.
inline Vector grid_projection(const Vector& y, const Vector& d, double fine_step = 1e-4) {
  const auto n = static_cast<int>(y.size());
  Vector best = Vector::Zero(n);
  double best_dist = std::numeric_limits<double>::infinity();
  // Every coordinate takes a turn as the one solved from d'x = 0, so faces with a clipped pivot are still reached.
  for (int pivot = 0; pivot < n; ++pivot) {
    if (std::abs(d(pivot)) < 1e-12 && pivot > 0) continue;
    Vector center = Vector::Constant(n, 0.5);
    Vector local = center;
    double local_dist = std::numeric_limits<double>::infinity();
    double radius = 0.5, step = 0.05;
    while (true) {
      Vector x(n);
      const Vector c = center;
      std::function<void(int)> rec = [&](int k) {
        if (k == n) {
          double rest = 0.0;
          for (int i = 0; i < n; ++i) {
            if (i != pivot) rest += d(i) * x(i);
          }
          if (std::abs(d(pivot)) < 1e-12) {
            if (std::abs(rest) > 1e-12) return;
            x(pivot) = std::clamp(y(pivot), 0.0, 1.0);
          } else {
            x(pivot) = -rest / d(pivot);
            if (x(pivot) < -1e-12 || x(pivot) > 1.0 + 1e-12) return;
          }
          const double dist = (x - y).norm();
          if (dist < local_dist) {
            local_dist = dist;
            local = x;
          }
          return;
        }
        if (k == pivot) return rec(k + 1);
        const double lo = std::max(0.0, c(k) - radius), hi = std::min(1.0, c(k) + radius);
        const int ticks = static_cast<int>(std::floor((hi - lo) / step + 1e-9));
        for (int i = 0; i <= ticks; ++i) {
          x(k) = lo + i * step;
          rec(k + 1);
        }
        if (hi - (lo + ticks * step) > 1e-12) {
          x(k) = hi;
          rec(k + 1);
        }
      };
      rec(0);
      if (step <= fine_step || !std::isfinite(local_dist)) break;
      center = local;
      radius = 2.0 * step;
      step = std::max(fine_step, step / 5.0);
    }
    if (local_dist < best_dist) {
      best_dist = local_dist;
      best = local;
    }
  }
  return best;
}

}  // namespace oracle
