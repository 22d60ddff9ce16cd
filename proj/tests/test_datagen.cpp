#include "oracles.hpp"

#include "brpo/batch_io.hpp"
#include "brpo/critic.hpp"
#include "brpo/env.hpp"
#include "brpo/error.hpp"

#include <doctest.h>

#include <chrono>
#include <sstream>

using namespace brpo;

TEST_CASE("env spec parsing") {
  CHECK(EnvSpec::parse("chain:8").str() == "chain:8");
  CHECK(EnvSpec::parse("gridworld:5x5:0.1").str() == "gridworld:5x5:0.1");
  CHECK(EnvSpec::parse("gridworld:3x3").str() == "gridworld:3x3:0");
  CHECK(EnvSpec::parse("cliff:4x3").str() == "cliff:4x3:1:0.1");
  CHECK(EnvSpec::parse("cliff:4x3").hash() == EnvSpec::parse("cliff:4x3:1:0.1").hash());
  CHECK(EnvSpec::parse("cliff:4x3", 0.9).hash() != EnvSpec::parse("cliff:4x3", 0.99).hash());
  CHECK_THROWS_AS(EnvSpec::parse("maze:3"), InvalidArgument);
  CHECK_THROWS_AS(EnvSpec::parse("chain:x"), InvalidArgument);
  CHECK_THROWS_AS(EnvSpec::parse("gridworld:5:0.1"), InvalidArgument);
  CHECK_THROWS_AS(EnvSpec::parse("cliff:2x3"), InvalidArgument);
}

TEST_CASE("chain of two is the chain2 fixture") {
  const Environment env = make_env(EnvSpec::parse("chain:2", 0.5));
  const FiniteMdp ref = oracle::chain2();
  CHECK(env.mdp.reward() == ref.reward());
  CHECK(env.mdp.transition() == ref.transition());
  CHECK(env.mdp.start() == ref.start());
  CHECK(env.mdp.gamma() == 0.5);
}

TEST_CASE("deterministic gridworld") {
  const Environment env = make_env(EnvSpec::parse("gridworld:3x3:0", 0.9));
  const Table& t = env.mdp.transition();
  for (Eigen::Index r = 0; r < t.rows(); ++r) CHECK(t.row(r).maxCoeff() == 1.0);
  const Vector vstar = oracle::optimal_values(env.mdp);
  const MixedFixedPoint fp = mixed_fixed_point(env.mdp, TabularPolicy::uniform(9, 4), 1.0);
  CHECK(std::abs(fp.v(0) - vstar(0)) <= 1e-9);
  // Four moves to the goal, then reward 1 forever.
  CHECK(vstar(0) == doctest::Approx(std::pow(0.9, 4) / 0.1).epsilon(1e-9));
}

TEST_CASE("cliff optimal policy avoids the fall cells") {
  const Environment env = make_env(EnvSpec::parse("cliff:4x3", 0.99));
  REQUIRE(!env.fall_states.empty());
  const MixedFixedPoint fp = mixed_fixed_point(env.mdp, TabularPolicy::uniform(12, 4), 1.0);
  const std::vector<std::size_t> greedy = greedy_actions(fp.q);
  for (std::size_t f : env.fall_states) {
    const std::size_t above = f + 4;
    CHECK(greedy[above] != 2);  // never steps down into the cliff
  }
  const TabularPolicy opt = TabularPolicy::deterministic(greedy, 4);
  const TabularPolicy uni = TabularPolicy::uniform(12, 4);
  double fall_opt = 0.0, fall_uni = 0.0;
  for (std::size_t f : env.fall_states) {
    fall_opt += occupancy(env.mdp, opt).state(static_cast<Eigen::Index>(f));
    fall_uni += occupancy(env.mdp, uni).state(static_cast<Eigen::Index>(f));
  }
  CHECK(fall_opt < 0.1 * fall_uni);
}

TEST_CASE("behavior policy construction") {
  const Environment env = make_env(EnvSpec::parse("gridworld:5x5:0.1"));
  const BehaviorPolicy best = behavior_policy(env.mdp, 1.0, 0.0);
  CHECK(best.policy.probs() == best.optimal.probs());
  CHECK(!best.policy.full_support());

  const BehaviorPolicy rnd = behavior_policy(env.mdp, 0.75, 1.0);
  CHECK((rnd.policy.probs().array() - 0.25).abs().maxCoeff() <= 1e-15);

  const BehaviorPolicy bp = behavior_policy(env.mdp, 0.75, 0.15);
  CHECK(std::abs(bp.j_base - bp.target) <= 1e-3 * std::abs(bp.target));
  CHECK(bp.j_base == doctest::Approx(expected_return(env.mdp, TabularPolicy(bp.mix * bp.optimal.probs() +
                                                                           (1.0 - bp.mix) * 0.25 *
                                                                               Table::Ones(25, 4)))));
  CHECK(bp.j_behavior == doctest::Approx(expected_return(env.mdp, bp.policy)));
  CHECK(bp.policy.full_support());
}

TEST_CASE("batch generation") {
  const Environment env = make_env(EnvSpec::parse("chain:8"));
  const BehaviorPolicy bp = behavior_policy(env.mdp, 0.75, 0.25);

  const Batch empty = generate_batch(env, bp.policy, 0, 1, 0.25, 0.75);
  CHECK(empty.empty());
  CHECK(empty.meta.env == "chain:8");
  CHECK(empty.meta.n_states == 8);

  const Batch a = generate_batch(env, bp.policy, 5000, 3, 0.25, 0.75);
  const Batch b = generate_batch(env, bp.policy, 5000, 3, 0.25, 0.75);
  CHECK(a.size() == 5000);
  CHECK(batch_to_jsonl(a) == batch_to_jsonl(b));
  CHECK(batch_to_jsonl(a) != batch_to_jsonl(generate_batch(env, bp.policy, 5000, 4, 0.25, 0.75)));

  int files = 0;
  for (double eps : {0.05, 0.15, 0.25, 0.5, 1.0}) {
    const BehaviorPolicy e = behavior_policy(env.mdp, 0.75, eps);
    files += generate_batch(env, e.policy, 100, 1, eps, 0.75).size() == 100;
  }
  CHECK(files == 5);
}

TEST_CASE("batch frequencies match the episode visitation") {
  // chain:8 never absorbs, so every episode runs exactly episode_cap steps from state 0.
  const Environment env = make_env(EnvSpec::parse("chain:8"));
  const BehaviorPolicy bp = behavior_policy(env.mdp, 0.75, 0.25);
  const std::size_t cap = 200, n = 100000;
  const Batch batch = generate_batch(env.mdp, bp.policy, n, 9, cap);

  const Matrix tb = policy_transition(env.mdp, bp.policy);
  Eigen::RowVectorXd p = env.mdp.start().transpose();
  Eigen::RowVectorXd visit = Eigen::RowVectorXd::Zero(8);
  for (std::size_t t = 0; t < cap; ++t) {
    visit += p;
    p = p * tb;
  }
  visit /= static_cast<double>(cap);

  Table freq = Table::Zero(8, 2);
  for (const Transition& t : batch.transitions) freq(static_cast<Eigen::Index>(t.s), static_cast<Eigen::Index>(t.a)) += 1.0;
  freq /= static_cast<double>(n);
  for (Eigen::Index s = 0; s < 8; ++s) {
    CHECK(std::abs(freq.row(s).sum() - visit(s)) <= 0.01);
    for (Eigen::Index a = 0; a < 2; ++a) {
      CHECK(std::abs(freq(s, a) - visit(s) * bp.policy.probs()(s, a)) <= 0.01);
    }
  }
}

TEST_CASE("batch io round trip and diagnostics") {
  const Environment env = make_env(EnvSpec::parse("cliff:4x3"));
  const BehaviorPolicy bp = behavior_policy(env.mdp, 0.75, 0.5);
  const Batch batch = generate_batch(env, bp.policy, 300, 2, 0.5, 0.75);
  const std::string text = batch_to_jsonl(batch);
  std::istringstream is(text);
  CHECK(read_batch(is) == batch);

  // Drop the last line: the count check fails one line past the end.
  const std::string truncated = text.substr(0, text.rfind('\n', text.size() - 2) + 1);
  std::istringstream ts(truncated);
  try {
    read_batch(ts);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 301);
  }

  std::istringstream bad(text.substr(0, text.find('\n') + 1) + "{\"s\":0,\"a\":1,\"r\":0.0}\n");
  try {
    read_batch(bad);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }

  std::istringstream junk(text.substr(0, text.find('\n') + 1) + "{\"s\":0,\"a\":1,\n");
  CHECK_THROWS_AS(read_batch(junk), ParseError);
}

TEST_CASE("golden batch hash") {
  const Environment env = make_env(EnvSpec::parse("chain:8"));
  const BehaviorPolicy bp = behavior_policy(env.mdp, 0.75, 0.25);
  const Batch batch = generate_batch(env, bp.policy, 100000, 1, 0.25, 0.75);
  const auto t0 = std::chrono::steady_clock::now();
  const std::string text = batch_to_jsonl(batch);
  std::istringstream is(text);
  const Batch back = read_batch(is);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  MESSAGE("100000-transition round trip: " << secs << " s, " << text.size() / secs / 1e6 << " MB/s");
  CHECK(back == batch);
  CHECK(hex64(fnv1a64(text)) == "2c7293352c4a6d45");
}
