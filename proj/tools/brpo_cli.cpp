#include "brpo/error.hpp"
#include "brpo/harness.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Tabular batch residual policy optimization"};
  app.require_subcommand(1);

  brpo::GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate logged batches");
  g->add_option("--env", gen.env, "chain:N | gridworld:WxH[:SLIP] | cliff:WxH[:FALL[:SLIP]]")->required();
  g->add_option("--epsilon", gen.epsilons, "Exploration rates (repeatable)")->delimiter(',');
  g->add_option("--quality", gen.quality, "Base behavior quality in (0, 1]");
  g->add_option("--n", gen.n, "Transitions per batch");
  g->add_option("--seed", gen.seeds, "Seeds (repeatable)")->delimiter(',');
  g->add_option("--gamma", gen.gamma);
  g->add_option("--episode-cap", gen.episode_cap);
  g->add_option("--out", gen.out, "Output file, or directory for several batches")->required();

  brpo::TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a policy on a batch");
  t->add_option("--algo", train.algo, "brpo | brpo-c | bc | batch-q | kl-q | spibb");
  t->add_option("--batch", train.batch)->required();
  t->add_option("--config", train.config);
  t->add_option("--lambda", train.lambda, "Constant confidence for brpo-c");
  t->add_option("--out", train.policy_out, "Policy JSON");
  t->add_option("--metrics", train.metrics_out, "Metrics CSV");
  t->add_option("--confidence", train.confidence_out, "Confidence JSON (brpo variants)");

  brpo::EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a policy");
  e->add_option("--policy", ev.policy)->required();
  e->add_option("--env", ev.env);
  e->add_option("--batch", ev.batch, "Batch whose meta names the env and behavior");
  e->add_option("--behavior", ev.behavior, "Behavior policy JSON");
  e->add_option("--mode", ev.mode, "exact | rollout");
  e->add_option("--episodes", ev.episodes);
  e->add_option("--seed", ev.seed);
  e->add_option("--gamma", ev.gamma);

  brpo::VerifyArgs ver;
  auto* v = app.add_subcommand("verify", "Run a certification suite");
  v->add_option("--suite", ver.suite, "identities | bounds | qp | proofs");
  v->add_option("--trials", ver.trials);
  v->add_option("--seed", ver.seed);
  v->add_option("--csv", ver.csv);
  v->add_option("--jsonl", ver.jsonl);

  CLI11_PARSE(app, argc, argv);

  try {
    if (g->parsed()) return brpo::cmd_gen(gen, std::cout, std::cerr);
    if (t->parsed()) return brpo::cmd_train(train, std::cout, std::cerr);
    if (e->parsed()) return brpo::cmd_eval(ev, std::cout, std::cerr);
    return brpo::cmd_verify(ver, std::cout, std::cerr);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 2;
  }
}
