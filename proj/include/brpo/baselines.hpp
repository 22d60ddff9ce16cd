#pragma once

#include "brpo/batch.hpp"
#include "brpo/critic.hpp"
#include "brpo/mdp.hpp"
#include "brpo/residual.hpp"
#include "brpo/solver.hpp"

#include <optional>
#include <string>
#include <vector>

namespace brpo {

enum class Algo { brpo, brpo_c, bc, batch_q, kl_q, spibb };
std::string to_string(Algo a);
/// Accepts both CLI spellings (batch-q) and config spellings (batch_q).
Algo algo_from_string(const std::string& s);

enum class SpibbMode { fraction, count };

struct BaselineConfig {
  Algo algo = Algo::bc;
  double kl_weight = 0.1;
  double spibb_threshold = 0.2;
  SpibbMode spibb_mode = SpibbMode::fraction;
  double const_lambda = 0.5;
  CriticConfig critic;

  void validate() const;
};

struct ClonedPolicy {
  TabularPolicy policy;
  std::vector<bool> unvisited;
};

ClonedPolicy behavior_cloning(const Batch& batch, std::size_t n_states, std::size_t n_actions,
                              const std::optional<TabularPolicy>& known_beta = std::nullopt);

/// Greedy on the optimal Q of the empirical model.
TabularPolicy batch_q_policy(const Batch& batch, std::size_t n_states, std::size_t n_actions, double gamma,
                             const BaselineConfig& config);

struct SoftQ {
  TabularPolicy policy;
  QTable q;
  ValueTable v;
};
/// Soft backup V = alpha log sum_a beta exp(Q / alpha) on `model`; pi proportional to beta exp(Q / alpha).
SoftQ kl_regularized_q(const FiniteMdp& model, const TabularPolicy& beta, double alpha, double tol = 1e-10,
                       std::size_t sweeps = 1000000);
TabularPolicy kl_q_policy(const Batch& batch, const TabularPolicy& beta, double gamma, const BaselineConfig& config);

/// Certain pairs: n(s,a) >= threshold * max n (fraction) or >= threshold (count).
Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> spibb_certain(const Eigen::MatrixXi& counts, double threshold,
                                                                  SpibbMode mode);
/// Keeps beta's mass on uncertain pairs and moves the rest to the best certain action of `q`.
TabularPolicy spibb_from_q(const TabularPolicy& beta, const QTable& q,
                           const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>& certain);
TabularPolicy spibb_policy(const Batch& batch, const TabularPolicy& beta, double gamma, const BaselineConfig& config);

/// Relative-softmax candidate at constant confidence c, mixed with beta at the same c.
ResidualPolicy brpo_constant(const TabularPolicy& beta, const AdvantageTable& adv, double gamma, double c,
                             const SolverConfig& solver = {});

}  // namespace brpo
