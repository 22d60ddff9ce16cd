#include "brpo/env.hpp"

#include "brpo/batch_io.hpp"
#include "brpo/critic.hpp"
#include "brpo/error.hpp"
#include "brpo/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <vector>

namespace brpo {

namespace {

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  return out;
}

std::size_t parse_count(const std::string& s, const std::string& text) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || s.empty()) throw InvalidArgument("bad integer '" + s + "' in env spec '" + text + "'");
  return static_cast<std::size_t>(v);
}

double parse_real(const std::string& s, const std::string& text) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || s.empty()) throw InvalidArgument("bad number '" + s + "' in env spec '" + text + "'");
  return v;
}

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  std::string s = buf;
  // Prefer the shortest form that round-trips.
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    if (std::stod(buf) == x) return buf;
  }
  return s;
}

// Grid move with walls: returns the cell reached by `dir` from (x, y).
std::size_t move(std::size_t x, std::size_t y, int dir, std::size_t w, std::size_t h) {
  switch (dir) {
    case 0: if (y + 1 < h) ++y; break;
    case 1: if (x + 1 < w) ++x; break;
    case 2: if (y > 0) --y; break;
    case 3: if (x > 0) --x; break;
    default: break;
  }
  return y * w + x;
}

Environment grid(const EnvSpec& spec, bool cliff) {
  const std::size_t w = spec.width;
  const std::size_t h = spec.height;
  const std::size_t S = w * h;
  const std::size_t A = 4;
  Table reward = Table::Zero(idx(S), idx(A));
  Table trans = Table::Zero(idx(S * A), idx(S));
  Matrix coords(idx(S), 2);
  std::vector<bool> absorbing(S, false);
  std::vector<std::size_t> falls;
  const std::size_t goal = cliff ? (w - 1) : (S - 1);
  absorbing[goal] = true;
  if (cliff) {
    for (std::size_t x = 1; x + 1 < w; ++x) {
      absorbing[x] = true;
      falls.push_back(x);
    }
  }
  for (std::size_t s = 0; s < S; ++s) {
    const std::size_t x = s % w;
    const std::size_t y = s / w;
    coords(idx(s), 0) = static_cast<double>(x);
    coords(idx(s), 1) = static_cast<double>(y);
    for (std::size_t a = 0; a < A; ++a) {
      const auto row = idx(s * A + a);
      if (absorbing[s]) {
        trans(row, idx(s)) = 1.0;
        reward(idx(s), idx(a)) = s == goal ? 1.0 : 1.0 - spec.fall_penalty;
        continue;
      }
      const int dir = static_cast<int>(a);
      trans(row, idx(move(x, y, dir, w, h))) += 1.0 - spec.slip;
      trans(row, idx(move(x, y, (dir + 1) % 4, w, h))) += spec.slip / 2.0;
      trans(row, idx(move(x, y, (dir + 3) % 4, w, h))) += spec.slip / 2.0;
    }
  }
  Vector start = Vector::Zero(idx(S));
  start(0) = 1.0;
  return {spec, FiniteMdp(std::move(reward), std::move(trans), std::move(start), spec.gamma, spec.r_max),
          std::move(coords), goal, std::move(falls)};
}

Environment chain(const EnvSpec& spec) {
  const std::size_t S = spec.n;
  Table reward = Table::Zero(idx(S), 2);
  Table trans = Table::Zero(idx(S * 2), idx(S));
  Matrix coords(idx(S), 1);
  for (std::size_t s = 0; s < S; ++s) {
    coords(idx(s), 0) = static_cast<double>(s);
    trans(idx(s * 2), idx(s)) = 1.0;
    trans(idx(s * 2 + 1), idx((s + 1) % S)) = 1.0;
  }
  reward.row(idx(S - 1)).setConstant(1.0);
  Vector start = Vector::Zero(idx(S));
  start(0) = 1.0;
  return {spec, FiniteMdp(std::move(reward), std::move(trans), std::move(start), spec.gamma, spec.r_max),
          std::move(coords), S - 1, {}};
}

}  // namespace

EnvSpec EnvSpec::parse(const std::string& text, double gamma) {
  const std::vector<std::string> parts = split(text, ':');
  if (parts.empty()) throw InvalidArgument("empty env spec");
  EnvSpec spec;
  spec.gamma = gamma;
  auto dims = [&](const std::string& s) {
    const std::vector<std::string> wh = split(s, 'x');
    if (wh.size() != 2) throw InvalidArgument("expected WxH in env spec '" + text + "'");
    spec.width = parse_count(wh[0], text);
    spec.height = parse_count(wh[1], text);
  };
  if (parts[0] == "chain") {
    if (parts.size() != 2) throw InvalidArgument("expected chain:N, got '" + text + "'");
    spec.kind = Kind::chain;
    spec.n = parse_count(parts[1], text);
  } else if (parts[0] == "gridworld") {
    if (parts.size() < 2 || parts.size() > 3) throw InvalidArgument("expected gridworld:WxH:SLIP, got '" + text + "'");
    spec.kind = Kind::gridworld;
    dims(parts[1]);
    spec.slip = parts.size() == 3 ? parse_real(parts[2], text) : 0.0;
  } else if (parts[0] == "cliff") {
    if (parts.size() < 2 || parts.size() > 4) {
      throw InvalidArgument("expected cliff:WxH[:FALL_PENALTY[:SLIP]], got '" + text + "'");
    }
    spec.kind = Kind::cliff;
    dims(parts[1]);
    spec.fall_penalty = parts.size() >= 3 ? parse_real(parts[2], text) : 1.0;
    spec.slip = parts.size() == 4 ? parse_real(parts[3], text) : 0.1;
  } else {
    throw InvalidArgument("unknown environment '" + parts[0] + "'");
  }
  spec.validate();
  return spec;
}

void EnvSpec::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidArgument("gamma must lie in [0, 1)");
  if (!(slip >= 0.0 && slip < 1.0)) throw InvalidArgument("slip must lie in [0, 1)");
  switch (kind) {
    case Kind::chain:
      if (n < 1) throw InvalidArgument("chain needs at least one state");
      break;
    case Kind::gridworld:
      if (width < 1 || height < 1 || width * height < 2) throw InvalidArgument("gridworld needs at least two cells");
      break;
    case Kind::cliff:
      if (width < 3 || height < 2) throw InvalidArgument("cliff needs width >= 3 and height >= 2");
      if (!(fall_penalty >= 0.0 && fall_penalty <= 1.0)) throw InvalidArgument("fall_penalty must lie in [0, 1]");
      break;
  }
}

std::string EnvSpec::str() const {
  switch (kind) {
    case Kind::chain: return "chain:" + std::to_string(n);
    case Kind::gridworld:
      return "gridworld:" + std::to_string(width) + "x" + std::to_string(height) + ":" + num(slip);
    case Kind::cliff:
      return "cliff:" + std::to_string(width) + "x" + std::to_string(height) + ":" + num(fall_penalty) + ":" +
             num(slip);
  }
  return "";
}

std::string EnvSpec::hash() const {
  return hex64(fnv1a64(str() + "|gamma=" + num(gamma)));
}

Environment make_env(const EnvSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case EnvSpec::Kind::chain: return chain(spec);
    case EnvSpec::Kind::gridworld: return grid(spec, false);
    case EnvSpec::Kind::cliff: return grid(spec, true);
  }
  throw InvalidArgument("unknown environment kind");
}

BehaviorPolicy behavior_policy(const FiniteMdp& mdp, double quality, double epsilon) {
  if (!(quality > 0.0 && quality <= 1.0)) throw InvalidArgument("quality must lie in (0, 1]");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw InvalidArgument("epsilon must lie in [0, 1]");
  const std::size_t S = mdp.n_states();
  const std::size_t A = mdp.n_actions();
  const TabularPolicy uniform = TabularPolicy::uniform(S, A);
  const MixedFixedPoint fp = mixed_fixed_point(mdp, uniform, 1.0);
  const TabularPolicy optimal = TabularPolicy::deterministic(greedy_actions(fp.q), A);

  BehaviorPolicy out{uniform, optimal};
  out.j_optimal = expected_return(mdp, optimal);
  out.j_uniform = expected_return(mdp, uniform);
  out.target = quality * out.j_optimal + (1.0 - quality) * out.j_uniform;
  auto base_of = [&](double c) { return TabularPolicy(c * optimal.probs() + (1.0 - c) * uniform.probs()); };
  auto j_of = [&](double c) { return expected_return(mdp, base_of(c)); };

  double c = 1.0;
  if (quality < 1.0 && out.j_optimal > out.j_uniform) {
    // J(0) = J_uniform <= target <= J(1) = J*; bisect on the sign of J(c) - target.
    double lo = 0.0;
    double hi = 1.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
      const double mid = 0.5 * (lo + hi);
      (j_of(mid) < out.target ? lo : hi) = mid;
    }
    c = 0.5 * (lo + hi);
  }
  const TabularPolicy base = base_of(c);
  out.mix = c;
  out.j_base = expected_return(mdp, base);
  const double scale = std::max(std::abs(out.target), 1e-12);
  if (std::abs(out.j_base - out.target) > 1e-3 * scale) {
    throw NumericalError("behavior quality target not attained (J_base " + std::to_string(out.j_base) + ", target " +
                         std::to_string(out.target) + ")");
  }
  out.policy = TabularPolicy((1.0 - epsilon) * base.probs() + epsilon * uniform.probs());
  out.j_behavior = expected_return(mdp, out.policy);
  return out;
}

Batch generate_batch(const FiniteMdp& mdp, const TabularPolicy& beta, std::size_t n, std::uint64_t seed,
                     std::size_t episode_cap) {
  check_dimensions(mdp, beta);
  if (episode_cap < 1) throw InvalidArgument("episode_cap must be >= 1");
  Batch batch;
  batch.meta.gamma = mdp.gamma();
  batch.meta.behavior = beta.probs();
  batch.meta.seed = seed;
  batch.meta.n = n;
  batch.meta.episode_cap = episode_cap;
  batch.meta.n_states = mdp.n_states();
  batch.meta.n_actions = mdp.n_actions();
  batch.transitions.reserve(n);

  const std::vector<bool> absorbing = absorbing_states(mdp);
  const std::span<const double> p0(mdp.start().data(), mdp.n_states());
  Rng rng(seed);
  std::size_t s = rng.categorical(p0);
  std::size_t steps = 0;
  while (batch.transitions.size() < n) {
    const std::size_t a = rng.categorical(beta.row(s));
    const auto row = mdp.transition().row(idx(s * mdp.n_actions() + a));
    const std::size_t sp = rng.categorical(std::span<const double>(row.data(), mdp.n_states()));
    batch.transitions.push_back({s, a, mdp.reward()(idx(s), idx(a)), sp});
    ++steps;
    if (absorbing[s] || steps >= episode_cap) {
      s = rng.categorical(p0);
      steps = 0;
    } else {
      s = sp;
    }
  }
  return batch;
}

Batch generate_batch(const Environment& env, const TabularPolicy& beta, std::size_t n, std::uint64_t seed,
                     double epsilon, double quality, std::size_t episode_cap) {
  Batch batch = generate_batch(env.mdp, beta, n, seed, episode_cap);
  batch.meta.env = env.spec.str();
  batch.meta.env_hash = env.spec.hash();
  batch.meta.epsilon = epsilon;
  batch.meta.quality = quality;
  return batch;
}

}  // namespace brpo
