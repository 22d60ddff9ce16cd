#pragma once

#include "brpo/batch.hpp"
#include "brpo/mdp.hpp"

#include <string>
#include <vector>

namespace brpo {

enum class CriticSource { exact_model, empirical_model };
std::string to_string(CriticSource s);
CriticSource critic_source_from_string(const std::string& s);

struct CriticConfig {
  double mu = 0.9;
  std::size_t sweeps = 100000;
  double tol = 1e-10;
  CriticSource source = CriticSource::empirical_model;

  void validate() const;
};

/// A_beta = Q_beta - V_beta by a direct linear solve on `model`.
AdvantageTable advantage_behavior(const FiniteMdp& model, const TabularPolicy& beta);

struct MixedFixedPoint {
  QTable q;
  ValueTable v;
  std::vector<double> residuals;  // sup-norm change per sweep
  std::size_t sweeps = 0;
  bool polished = false;          // final values from an exact solve of the greedy mixture
};

/// Fixed point of V(s) = (1 - mu) E_beta Q(s, .) + mu max_a Q(s, a), Q = R + gamma T V.
MixedFixedPoint mixed_fixed_point(const FiniteMdp& model, const TabularPolicy& beta, double mu,
                                  std::size_t sweeps = 100000, double tol = 1e-10);

/// W = Q_mu - V_mu; equals A_beta at mu = 0 and the optimal advantage at mu = 1.
AdvantageTable weighted_advantage(const FiniteMdp& model, const TabularPolicy& beta, double mu,
                                  std::size_t sweeps = 100000, double tol = 1e-10);

/// Greedy action per state, ties to the lowest index within a relative 1e-12.
std::vector<std::size_t> greedy_actions(const QTable& q);

}  // namespace brpo
