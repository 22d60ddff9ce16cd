#include "oracles.hpp"

#include "brpo/batch_io.hpp"
#include "brpo/error.hpp"
#include "brpo/harness.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace brpo;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("brpo_unit_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  for (std::string c; std::getline(is, c, ',');) out.push_back(c);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

fs::path make_batch(const fs::path& dir, const std::string& env, double eps, std::size_t n = 20000) {
  GenArgs g;
  g.env = env;
  g.epsilons = {eps};
  g.n = n;
  g.seeds = {1};
  g.out = (dir / "b.jsonl").string();
  std::ostringstream out, err;
  REQUIRE(cmd_gen(g, out, err) == 0);
  return g.out;
}

}  // namespace

TEST_CASE("gen writes one file per epsilon and is reproducible") {
  const fs::path dir = scratch("gen");
  GenArgs g;
  g.env = "chain:8";
  g.epsilons = {0.05, 0.15, 0.25, 0.5, 1.0};
  g.n = 2000;
  g.out = (dir / "sweep").string();
  std::ostringstream out, err;
  REQUIRE(cmd_gen(g, out, err) == 0);
  CHECK(lines(out.str()).size() == 5);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(g.out)) files += e.path().extension() == ".jsonl";
  CHECK(files == 5);
  CHECK(fs::exists(fs::path(g.out) / "chain-8_eps0.25_seed1.jsonl"));

  const Json first = Json::parse(lines(out.str())[2]);
  CHECK(first.contains("J_beta"));
  std::ostringstream again, err2;
  REQUIRE(cmd_gen(g, again, err2) == 0);
  CHECK(again.str() == out.str());
}

TEST_CASE("train brpo writes a monotone trace and a policy") {
  const fs::path dir = scratch("train");
  const fs::path batch = make_batch(dir, "chain:8", 0.25);
  write_json_file((dir / "cfg.json").string(), Json{{"brpo", {{"adv_source", "exact"}, {"iterations", 5}}}});
  TrainArgs t;
  t.batch = batch.string();
  t.config = (dir / "cfg.json").string();
  t.policy_out = (dir / "p.json").string();
  t.metrics_out = (dir / "m.csv").string();
  std::ostringstream out, err;
  REQUIRE(cmd_train(t, out, err) == 0);

  const std::vector<std::string> rows = lines(slurp(t.metrics_out));
  REQUIRE(rows.size() == 11);
  CHECK(rows[0] == "iter,half_step,L_bar,Lp,Lpp,Lppp,J_exact_if_available,wallclock");
  for (std::size_t i = 2; i < rows.size(); i += 2) {
    const auto anchor = split_csv(rows[i - 1]), step = split_csv(rows[i]);
    CHECK(anchor[1] == "rho");
    CHECK(step[1] == "lambda");
    CHECK(std::stod(step[2]) >= std::stod(anchor[2]) - 1e-9);
  }
  const Json summary = Json::parse(out.str());
  CHECK(summary["gap"].get<double>() >= -1e-9);
  CHECK(policy_from_json(read_json_file(t.policy_out)).n_states() == 8);

  write_json_file((dir / "bad.json").string(), Json{{"brpo", {{"iterationz", 5}}}});
  t.config = (dir / "bad.json").string();
  CHECK_THROWS_AS(cmd_train(t, out, err), InvalidArgument);
}

TEST_CASE("train baselines") {
  const fs::path dir = scratch("baselines");
  const fs::path batch = make_batch(dir, "cliff:4x3", 0.5, 100000);
  const Batch b = read_batch_file(batch.string());
  const TabularPolicy beta(*b.meta.behavior);

  TrainArgs t;
  t.batch = batch.string();
  t.policy_out = (dir / "p.json").string();
  t.metrics_out = (dir / "m.csv").string();
  std::ostringstream out, err;

  t.algo = "bc";
  REQUIRE(cmd_train(t, out, err) == 0);
  const std::vector<std::string> rows = lines(slurp(t.metrics_out));
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == "iter,algo,tv_to_beta,exact_J,J_beta,wallclock");
  const TabularPolicy bc = policy_from_json(read_json_file(t.policy_out));
  const EmpiricalModel em = empirical_mdp(b, 12, 4, 0.99);
  for (Eigen::Index s = 0; s < 12; ++s) {
    if (em.counts.row(s).sum() < 2000) continue;
    CHECK(0.5 * (bc.probs().row(s) - beta.probs().row(s)).cwiseAbs().sum() <= 0.02);
  }

  t.algo = "brpo-c";
  t.lambda = 0.5;
  REQUIRE(cmd_train(t, out, err) == 0);
  CHECK(lines(slurp(t.metrics_out))[1].rfind("0,brpo_c,", 0) == 0);

  t.algo = "bc";
  CHECK_THROWS_AS(cmd_train(t, out, err), InvalidArgument);
  t.lambda.reset();
  for (const char* algo : {"batch-q", "kl-q", "spibb"}) {
    t.algo = algo;
    CHECK(cmd_train(t, out, err) == 0);
  }
}

TEST_CASE("eval exact and rollout") {
  const fs::path dir = scratch("eval");
  const fs::path batch = make_batch(dir, "gridworld:5x5:0.1", 0.15, 1000);
  const Batch b = read_batch_file(batch.string());
  const TabularPolicy beta(*b.meta.behavior);
  write_json_file((dir / "beta.json").string(), policy_to_json(beta));

  EvalArgs e;
  e.policy = (dir / "beta.json").string();
  e.batch = batch.string();
  std::ostringstream out, err;
  REQUIRE(cmd_eval(e, out, err) == 0);
  const Json rep = Json::parse(out.str());
  CHECK(rep["gap"].get<double>() == 0.0);
  const Environment env = make_env(EnvSpec::parse("gridworld:5x5:0.1"));
  CHECK(std::abs(rep["J_pi"].get<double>() - expected_return(env.mdp, beta)) <= 1e-12);

  write_json_file((dir / "switch.json").string(), policy_to_json(oracle::always(1, 2, 2)));
  EvalArgs r;
  r.policy = (dir / "switch.json").string();
  r.behavior = r.policy;
  r.env = "chain:2";
  r.gamma = 0.5;
  r.mode = "rollout";
  r.episodes = 10000;
  std::ostringstream rout;
  REQUIRE(cmd_eval(r, rout, err) == 0);
  const Json roll = Json::parse(rout.str());
  const double se = roll["stderr"].get<double>();
  CHECK(std::abs(roll["J_pi"].get<double>() - 2.0 / 3.0) <= std::max(3.0 * se, 1e-9));

  const RolloutEstimate est = rollout_return(oracle::chain2(), TabularPolicy::uniform(2, 2), 10000, 4);
  CHECK(std::abs(est.mean - expected_return(oracle::chain2(), TabularPolicy::uniform(2, 2))) <= 4.0 * est.stderr_);

  write_json_file((dir / "wrong.json").string(), policy_to_json(TabularPolicy::uniform(3, 2)));
  e.policy = (dir / "wrong.json").string();
  CHECK_THROWS_AS(cmd_eval(e, out, err), InvalidArgument);
}

TEST_CASE("verify suites") {
  const VerifyResult ids = run_verify_suite("identities", 100, 7);
  CHECK(ids.rows.size() == 100);
  CHECK(ids.all_pass());
  for (const VerifyRow& r : ids.rows) CHECK(r.rhs <= 1e-8);

  const VerifyResult bounds = run_verify_suite("bounds", 200, 7);
  CHECK(bounds.all_pass());
  for (const VerifyRow& r : bounds.rows) CHECK(r.slack >= -1e-9);

  const VerifyResult qp = run_verify_suite("qp", 50, 7);
  CHECK(qp.all_pass());

  const std::string csv = verify_csv(ids.rows);
  CHECK(csv.rfind("instance_id,bound_name,rhs,exact_gap,slack,pass\n", 0) == 0);
  CHECK(csv.find('\r') == std::string::npos);

  VerifyArgs v;
  v.suite = "proofs";
  v.trials = 10;
  std::ostringstream out, err;
  CHECK(cmd_verify(v, out, err) == 0);
  CHECK_THROWS_AS(run_verify_suite("nope", 1, 1), InvalidArgument);
}

TEST_CASE("experiment config") {
  const ExperimentConfig d = experiment_config_from_json(Json::object());
  CHECK(d.gamma == 0.99);
  CHECK(d.eval.episodes == 40);
  CHECK(d.eval.seeds == 5);
  CHECK(d.eval.interval == 1000);
  CHECK(d.eval.window == 10);
  CHECK(d.epsilons == std::vector<double>{0.05, 0.15, 0.25, 0.5, 1.0});
  CHECK(d.brpo.mu == 0.9);
  CHECK(d.baseline.const_lambda == 0.5);
  CHECK(d.baseline.kl_weight == 0.1);
  CHECK(d.baseline.spibb_threshold == 0.2);

  const Json j = experiment_config_to_json(d);
  CHECK(experiment_config_to_json(experiment_config_from_json(j)) == j);
  CHECK_THROWS_AS(experiment_config_from_json(Json{{"seeds", Json::array()}}), InvalidArgument);
  CHECK_THROWS_AS(experiment_config_from_json(Json{{"learning_rate", 0.1}}), InvalidArgument);
  CHECK_THROWS_AS(experiment_config_from_json(Json{{"eval", {{"episodes", 0}}}}), InvalidArgument);
}
