#pragma once

#include "brpo/mdp.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace brpo {

struct Transition {
  std::size_t s = 0;
  std::size_t a = 0;
  double r = 0.0;
  std::size_t sp = 0;

  bool operator==(const Transition&) const = default;
};

struct BatchMeta {
  std::string env;             // canonical env spec string, e.g. "chain:8"
  std::string env_hash;        // FNV-1a of env + gamma, hex
  double gamma = 0.99;
  std::optional<Table> behavior;  // behavior policy table when known
  double epsilon = 0.0;
  double quality = 1.0;
  std::uint64_t seed = 0;
  std::size_t n = 0;
  std::size_t episode_cap = 200;
  std::size_t n_states = 0;
  std::size_t n_actions = 0;

  bool operator==(const BatchMeta& other) const;
};

/// Logged (s, a, r, s') transitions plus provenance.
struct Batch {
  std::vector<Transition> transitions;
  BatchMeta meta;

  std::size_t size() const { return transitions.size(); }
  bool empty() const { return transitions.empty(); }
  bool operator==(const Batch&) const = default;
};

/// Distinct states appearing as `s` in the batch, ascending.
std::vector<std::size_t> batch_states(const Batch& batch);

}  // namespace brpo
