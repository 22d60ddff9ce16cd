#pragma once

#include "brpo/batch.hpp"
#include "brpo/mdp.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace brpo {

/// Text form: "chain:N", "gridworld:WxH:SLIP", "cliff:WxH[:FALL_PENALTY[:SLIP]]".
struct EnvSpec {
  enum class Kind { chain, gridworld, cliff };
  Kind kind = Kind::chain;
  std::size_t n = 2;       // chain length
  std::size_t width = 0;
  std::size_t height = 0;
  double slip = 0.0;
  double fall_penalty = 1.0;
  double gamma = 0.99;
  double r_max = 1.0;

  static EnvSpec parse(const std::string& text, double gamma = 0.99);
  std::string str() const;
  /// FNV-1a over the canonical string and gamma, as 16 hex digits.
  std::string hash() const;
  void validate() const;
};

/// Grid and chain actions. Grid moves: 0 up (y+1), 1 right, 2 down, 3 left.
struct Environment {
  EnvSpec spec;
  FiniteMdp mdp;
  Matrix coordinates;  // one row per state
  std::optional<std::size_t> goal;
  std::vector<std::size_t> fall_states;
};

Environment make_env(const EnvSpec& spec);

struct BehaviorPolicy {
  TabularPolicy policy;
  TabularPolicy optimal;
  double mix = 1.0;        // weight on the optimal policy in the base mixture
  double target = 0.0;     // quality * J* + (1 - quality) * J_uniform
  double j_base = 0.0;
  double j_behavior = 0.0;
  double j_optimal = 0.0;
  double j_uniform = 0.0;
};

/// Base = c pi* + (1 - c) uniform with J_base at the quality target, then epsilon-greedy on top.
BehaviorPolicy behavior_policy(const FiniteMdp& mdp, double quality, double epsilon);

/// Rolls out `beta` from P0, restarting after `episode_cap` steps or right after a step
/// taken from an absorbing state. Records exactly n transitions.
Batch generate_batch(const FiniteMdp& mdp, const TabularPolicy& beta, std::size_t n, std::uint64_t seed,
                     std::size_t episode_cap = 200);

/// Same, with provenance metadata filled from the env spec and behavior construction.
Batch generate_batch(const Environment& env, const TabularPolicy& beta, std::size_t n, std::uint64_t seed,
                     double epsilon, double quality, std::size_t episode_cap = 200);

}  // namespace brpo
