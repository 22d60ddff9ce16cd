#pragma once

#include "brpo/baselines.hpp"
#include "brpo/critic.hpp"
#include "brpo/env.hpp"
#include "brpo/serialize.hpp"
#include "brpo/solver.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace brpo {

struct EvalSettings {
  std::string mode = "exact";  // exact | rollout
  std::size_t episodes = 40;
  std::size_t seeds = 5;
  std::size_t interval = 1000;
  std::size_t window = 10;
};

struct ExperimentConfig {
  std::string env = "chain:8";
  double gamma = 0.99;
  std::vector<double> epsilons{0.05, 0.15, 0.25, 0.5, 1.0};
  double quality = 0.75;
  std::size_t batch_size_transitions = 100000;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::size_t episode_cap = 200;
  Algo algo = Algo::brpo;
  SolverConfig brpo;
  BaselineConfig baseline;
  EvalSettings eval;

  void validate() const;
};

ExperimentConfig experiment_config_from_json(const Json& j);
Json experiment_config_to_json(const ExperimentConfig& c);

struct RolloutEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t episodes = 0;
  std::size_t horizon = 0;
};
/// Discounted returns of full episodes truncated where gamma^H r_max / (1 - gamma) < 1e-10.
RolloutEstimate rollout_return(const FiniteMdp& mdp, const TabularPolicy& pi, std::size_t episodes,
                               std::uint64_t seed);

/// Advantage table used by BRPO variants: exact A_beta, or W from the configured critic model.
AdvantageTable training_advantage(const Batch& batch, const TabularPolicy& beta, const Environment* env,
                                  const SolverConfig& solver, const CriticConfig& critic);

struct GenArgs {
  std::string env;
  std::vector<double> epsilons{0.25};
  double quality = 0.75;
  std::size_t n = 100000;
  std::vector<std::uint64_t> seeds{1};
  std::string out;
  double gamma = 0.99;
  std::size_t episode_cap = 200;
};

struct TrainArgs {
  std::string algo = "brpo";
  std::string batch;
  std::optional<std::string> config;
  std::optional<double> lambda;
  std::string policy_out = "policy.json";
  std::string metrics_out = "metrics.csv";
  std::optional<std::string> confidence_out;
};

struct EvalArgs {
  std::string policy;
  std::optional<std::string> env;
  std::optional<std::string> batch;
  std::optional<std::string> behavior;
  std::string mode = "exact";
  std::size_t episodes = 40;
  std::uint64_t seed = 0;
  double gamma = 0.99;
};

struct VerifyArgs {
  std::string suite = "identities";
  std::size_t trials = 100;
  std::uint64_t seed = 7;
  std::optional<std::string> csv;
  std::optional<std::string> jsonl;
};

/// Each returns a process exit code; reports go to `out`, diagnostics to `err`.
int cmd_gen(const GenArgs& args, std::ostream& out, std::ostream& err);
int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err);
int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err);
int cmd_verify(const VerifyArgs& args, std::ostream& out, std::ostream& err);

struct VerifyRow {
  std::size_t instance_id = 0;
  std::string bound_name;
  double rhs = 0.0;
  double exact_gap = 0.0;
  double slack = 0.0;
  bool pass = false;
};

struct VerifyResult {
  std::vector<VerifyRow> rows;
  std::vector<Json> instances;
  bool all_pass() const;
};

/// The property sweeps behind `verify`; suite in {identities, bounds, qp, proofs}.
VerifyResult run_verify_suite(const std::string& suite, std::size_t trials, std::uint64_t seed);
std::string verify_csv(const std::vector<VerifyRow>& rows);

std::string format_double(double x);

}  // namespace brpo
