#include "brpo/harness.hpp"

#include "brpo/batch_io.hpp"
#include "brpo/error.hpp"
#include "brpo/random.hpp"
#include "brpo/rng.hpp"
#include "brpo/value_gap.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

namespace brpo {

namespace {

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void reject_unknown(const Json& j, std::initializer_list<const char*> allowed, const std::string& what) {
  if (!j.is_object()) throw InvalidArgument(what + " must be a JSON object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) throw InvalidArgument(what + ": unknown key '" + key + "'");
  }
}

template <class T>
void maybe(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::string spibb_mode_str(SpibbMode m) { return m == SpibbMode::fraction ? "fraction" : "count"; }

SpibbMode spibb_mode_from(const std::string& s) {
  if (s == "fraction") return SpibbMode::fraction;
  if (s == "count") return SpibbMode::count;
  throw InvalidArgument("unknown spibb_mode '" + s + "'");
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path + " for writing");
  f << text;
  if (!f) throw Error("write failed: " + path);
}

double total_variation(const TabularPolicy& a, const TabularPolicy& b) {
  // max over states of 1/2 |a - b|_1
  return 0.5 * (a.probs() - b.probs()).cwiseAbs().rowwise().sum().maxCoeff();
}

std::string batch_file_name(const std::string& env, double eps, std::uint64_t seed) {
  std::string name = env;
  std::replace(name.begin(), name.end(), ':', '-');
  return name + "_eps" + format_double(eps) + "_seed" + std::to_string(seed) + ".jsonl";
}

std::optional<Environment> env_from_meta(const BatchMeta& meta) {
  if (meta.env.empty()) return std::nullopt;
  return make_env(EnvSpec::parse(meta.env, meta.gamma));
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

void ExperimentConfig::validate() const {
  EnvSpec::parse(env, gamma).validate();
  if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidArgument("gamma must lie in (0, 1)");
  if (seeds.empty()) throw InvalidArgument("seeds must be nonempty");
  if (epsilons.empty()) throw InvalidArgument("epsilons must be nonempty");
  for (double e : epsilons) {
    if (!(e >= 0.0 && e <= 1.0)) throw InvalidArgument("epsilon must lie in [0, 1]");
  }
  if (!(quality > 0.0 && quality <= 1.0)) throw InvalidArgument("quality must lie in (0, 1]");
  if (batch_size_transitions == 0) throw InvalidArgument("batch_size_transitions must be positive");
  if (episode_cap == 0) throw InvalidArgument("episode_cap must be positive");
  if (eval.mode != "exact" && eval.mode != "rollout") throw InvalidArgument("eval.mode must be exact or rollout");
  if (eval.episodes == 0 || eval.seeds == 0 || eval.interval == 0 || eval.window == 0) {
    throw InvalidArgument("eval parameters must be positive");
  }
  brpo.validate();
  baseline.validate();
}

ExperimentConfig experiment_config_from_json(const Json& j) {
  ExperimentConfig c;
  try {
    reject_unknown(j,
                   {"env", "gamma", "epsilons", "quality", "batch_size_transitions", "seeds", "episode_cap", "algo",
                    "brpo", "baseline", "critic", "eval"},
                   "config");
    maybe(j, "env", c.env);
    maybe(j, "gamma", c.gamma);
    maybe(j, "epsilons", c.epsilons);
    maybe(j, "quality", c.quality);
    maybe(j, "batch_size_transitions", c.batch_size_transitions);
    maybe(j, "seeds", c.seeds);
    maybe(j, "episode_cap", c.episode_cap);
    if (j.contains("algo")) c.algo = algo_from_string(j["algo"].get<std::string>());
    if (j.contains("brpo")) c.brpo = solver_config_from_json(j["brpo"]);
    if (j.contains("baseline")) {
      const Json& b = j["baseline"];
      reject_unknown(b, {"kl_weight", "spibb_threshold", "spibb_mode", "const_lambda"}, "baseline config");
      maybe(b, "kl_weight", c.baseline.kl_weight);
      maybe(b, "spibb_threshold", c.baseline.spibb_threshold);
      maybe(b, "const_lambda", c.baseline.const_lambda);
      if (b.contains("spibb_mode")) c.baseline.spibb_mode = spibb_mode_from(b["spibb_mode"].get<std::string>());
    }
    if (j.contains("critic")) c.baseline.critic = critic_config_from_json(j["critic"]);
    if (j.contains("eval")) {
      const Json& e = j["eval"];
      reject_unknown(e, {"mode", "episodes", "seeds", "interval", "window"}, "eval config");
      maybe(e, "mode", c.eval.mode);
      maybe(e, "episodes", c.eval.episodes);
      maybe(e, "seeds", c.eval.seeds);
      maybe(e, "interval", c.eval.interval);
      maybe(e, "window", c.eval.window);
    }
  } catch (const Json::exception& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
  c.baseline.algo = c.algo;
  c.validate();
  return c;
}

Json experiment_config_to_json(const ExperimentConfig& c) {
  return Json{{"env", c.env},
              {"gamma", c.gamma},
              {"epsilons", c.epsilons},
              {"quality", c.quality},
              {"batch_size_transitions", c.batch_size_transitions},
              {"seeds", c.seeds},
              {"episode_cap", c.episode_cap},
              {"algo", to_string(c.algo)},
              {"brpo", solver_config_to_json(c.brpo)},
              {"baseline",
               {{"kl_weight", c.baseline.kl_weight},
                {"spibb_threshold", c.baseline.spibb_threshold},
                {"spibb_mode", spibb_mode_str(c.baseline.spibb_mode)},
                {"const_lambda", c.baseline.const_lambda}}},
              {"critic", critic_config_to_json(c.baseline.critic)},
              {"eval",
               {{"mode", c.eval.mode},
                {"episodes", c.eval.episodes},
                {"seeds", c.eval.seeds},
                {"interval", c.eval.interval},
                {"window", c.eval.window}}}};
}

RolloutEstimate rollout_return(const FiniteMdp& mdp, const TabularPolicy& pi, std::size_t episodes,
                               std::uint64_t seed) {
  check_dimensions(mdp, pi);
  if (episodes == 0) throw InvalidArgument("rollout needs at least one episode");
  const double g = mdp.gamma();
  const double floor = 1e-10 * (1.0 - g) / std::max(mdp.r_max(), 1e-300);
  const auto horizon = static_cast<std::size_t>(std::ceil(std::log(floor) / std::log(g)));
  const std::size_t S = mdp.n_states();
  const std::size_t A = mdp.n_actions();
  const std::span<const double> p0(mdp.start().data(), S);

  Rng rng(seed);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t e = 0; e < episodes; ++e) {
    std::size_t s = rng.categorical(p0);
    double ret = 0.0, disc = 1.0;
    for (std::size_t t = 0; t < horizon; ++t) {
      const std::size_t a = rng.categorical(pi.row(s));
      ret += disc * mdp.reward()(idx(s), idx(a));
      disc *= g;
      s = rng.categorical({mdp.transition().data() + (s * A + a) * S, S});
    }
    sum += ret;
    sum_sq += ret * ret;
  }
  const double n = static_cast<double>(episodes);
  RolloutEstimate est;
  est.mean = sum / n;
  const double var = episodes > 1 ? std::max(0.0, (sum_sq - n * est.mean * est.mean) / (n - 1.0)) : 0.0;
  est.stderr_ = std::sqrt(var / n);
  est.episodes = episodes;
  est.horizon = horizon;
  return est;
}

AdvantageTable training_advantage(const Batch& batch, const TabularPolicy& beta, const Environment* env,
                                  const SolverConfig& solver, const CriticConfig& critic) {
  if (solver.adv_source == AdvSource::exact) {
    if (!env) throw InvalidArgument("adv_source = exact needs a batch with a known environment");
    return advantage_behavior(env->mdp, beta);
  }
  if (critic.source == CriticSource::exact_model) {
    if (!env) throw InvalidArgument("critic source exact_model needs a batch with a known environment");
    return weighted_advantage(env->mdp, beta, solver.mu, critic.sweeps, critic.tol);
  }
  const EmpiricalModel em = empirical_mdp(batch, beta.n_states(), beta.n_actions(), batch.meta.gamma);
  return weighted_advantage(em.model, beta, solver.mu, critic.sweeps, critic.tol);
}

int cmd_gen(const GenArgs& args, std::ostream& out, std::ostream&) {
  if (args.epsilons.empty() || args.seeds.empty()) throw InvalidArgument("gen: need at least one epsilon and seed");
  if (args.out.empty()) throw InvalidArgument("gen: --out is required");
  const Environment env = make_env(EnvSpec::parse(args.env, args.gamma));
  const bool single = args.epsilons.size() == 1 && args.seeds.size() == 1;
  if (!single) std::filesystem::create_directories(args.out);
  for (double eps : args.epsilons) {
    const BehaviorPolicy bp = behavior_policy(env.mdp, args.quality, eps);
    for (std::uint64_t seed : args.seeds) {
      const Batch batch = generate_batch(env, bp.policy, args.n, seed, eps, args.quality, args.episode_cap);
      const std::string path =
          single ? args.out : (std::filesystem::path(args.out) / batch_file_name(env.spec.str(), eps, seed)).string();
      write_batch_file(path, batch);
      out << Json{{"file", path},
                  {"env", env.spec.str()},
                  {"epsilon", eps},
                  {"seed", seed},
                  {"J_beta", bp.j_behavior},
                  {"J_star", bp.j_optimal},
                  {"hash", file_hash(path)}}
                 .dump()
          << '\n';
    }
  }
  return 0;
}

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream&) {
  const auto t0 = Clock::now();
  ExperimentConfig cfg;
  if (args.config) cfg = experiment_config_from_json(read_json_file(*args.config));
  const Algo algo = algo_from_string(args.algo);
  if (args.lambda && algo != Algo::brpo_c) throw InvalidArgument("--lambda only applies to brpo-c");
  BaselineConfig base = cfg.baseline;
  base.algo = algo;
  if (args.lambda) base.const_lambda = *args.lambda;
  base.validate();

  const Batch batch = read_batch_file(args.batch);
  if (batch.empty()) throw InvalidArgument("train: empty batch");
  std::optional<Environment> env = env_from_meta(batch.meta);
  const std::size_t S = env ? env->mdp.n_states() : batch.meta.n_states;
  const std::size_t A = env ? env->mdp.n_actions() : batch.meta.n_actions;
  if (S == 0 || A == 0) throw InvalidArgument("train: batch meta lacks state/action counts");
  const double gamma = batch.meta.gamma;

  std::optional<TabularPolicy> known;
  if (batch.meta.behavior) known = TabularPolicy(*batch.meta.behavior);
  const TabularPolicy beta = behavior_cloning(batch, S, A, known).policy;

  std::optional<ResidualPolicy> residual;
  std::optional<TabularPolicy> policy;
  std::string metrics;

  if (algo == Algo::brpo || algo == Algo::brpo_c) {
    const AdvantageTable adv = training_advantage(batch, beta, env ? &*env : nullptr, cfg.brpo, base.critic);
    if (algo == Algo::brpo) {
      CoordinateAscentInput in;
      in.batch = &batch;
      in.beta = &beta;
      in.adv = &adv;
      in.gamma = gamma;
      if (env) {
        in.coordinates = env->coordinates;
        in.exact_mdp = &env->mdp;
      }
      const CoordinateAscentResult res = coordinate_ascent(in, cfg.brpo);
      residual = res.policy;
      metrics = trace_csv(res.trace, true);
    } else {
      residual = brpo_constant(beta, adv, gamma, base.const_lambda, cfg.brpo);
    }
    policy = residual->mixed;
  } else if (algo == Algo::bc) {
    policy = behavior_cloning(batch, S, A).policy;
  } else if (algo == Algo::batch_q) {
    policy = batch_q_policy(batch, S, A, gamma, base);
  } else if (algo == Algo::kl_q) {
    policy = kl_q_policy(batch, beta, gamma, base);
  } else {
    policy = spibb_policy(batch, beta, gamma, base);
  }

  if (metrics.empty()) {
    std::ostringstream os;
    os << "iter,algo,tv_to_beta,exact_J,J_beta,wallclock\n";
    os << 0 << ',' << to_string(algo) << ',' << format_double(total_variation(*policy, beta)) << ',';
    if (env) os << format_double(expected_return(env->mdp, *policy));
    os << ',';
    if (env) os << format_double(expected_return(env->mdp, beta));
    os << ',' << format_double(seconds_since(t0)) << '\n';
    metrics = os.str();
  }

  write_json_file(args.policy_out, policy_to_json(*policy));
  write_text(args.metrics_out, metrics);
  if (args.confidence_out && residual) write_json_file(*args.confidence_out, confidence_to_json(residual->confidence));

  Json summary{{"algo", to_string(algo)}, {"policy", args.policy_out}, {"metrics", args.metrics_out}};
  if (env) {
    const double jp = expected_return(env->mdp, *policy);
    const double jb = expected_return(env->mdp, beta);
    summary["J_pi"] = jp;
    summary["J_beta"] = jb;
    summary["gap"] = jp - jb;
  }
  out << summary.dump() << '\n';
  return 0;
}

int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream&) {
  if (args.mode != "exact" && args.mode != "rollout") throw InvalidArgument("eval: mode must be exact or rollout");
  std::optional<Batch> batch;
  if (args.batch) batch = read_batch_file(*args.batch);
  std::optional<Environment> env;
  if (args.env) {
    env = make_env(EnvSpec::parse(*args.env, batch ? batch->meta.gamma : args.gamma));
  } else if (batch) {
    env = env_from_meta(batch->meta);
  }
  if (!env) throw InvalidArgument("eval: need --env or a batch that names its environment");

  const TabularPolicy pi = policy_from_json(read_json_file(args.policy));
  check_dimensions(env->mdp, pi);
  std::optional<TabularPolicy> beta;
  if (args.behavior) {
    beta = policy_from_json(read_json_file(*args.behavior));
  } else if (batch && batch->meta.behavior) {
    beta = TabularPolicy(*batch->meta.behavior);
  }
  if (beta) check_dimensions(env->mdp, *beta);

  Json rep{{"mode", args.mode}};
  const std::optional<double> jb = beta ? std::optional<double>(expected_return(env->mdp, *beta)) : std::nullopt;
  double jp = 0.0;
  if (args.mode == "exact") {
    jp = expected_return(env->mdp, pi);
    rep["stderr"] = 0.0;
  } else {
    const RolloutEstimate est = rollout_return(env->mdp, pi, args.episodes, args.seed);
    jp = est.mean;
    rep["stderr"] = est.stderr_;
    rep["episodes"] = est.episodes;
    rep["horizon"] = est.horizon;
  }
  rep["J_pi"] = jp;
  rep["J_beta"] = jb ? Json(*jb) : Json(nullptr);
  rep["gap"] = jb ? Json(jp - *jb) : Json(nullptr);
  out << rep.dump() << '\n';
  return 0;
}

bool VerifyResult::all_pass() const {
  return std::all_of(rows.begin(), rows.end(), [](const VerifyRow& r) { return r.pass; });
}

std::string verify_csv(const std::vector<VerifyRow>& rows) {
  std::ostringstream os;
  os << "instance_id,bound_name,rhs,exact_gap,slack,pass\n";
  for (const VerifyRow& r : rows) {
    os << r.instance_id << ',' << r.bound_name << ',' << format_double(r.rhs) << ',' << format_double(r.exact_gap)
       << ',' << format_double(r.slack) << ',' << (r.pass ? "true" : "false") << '\n';
  }
  return os.str();
}

namespace {

// Tolerance checks: rhs carries the measured deviation, slack = tol - deviation.
VerifyRow tol_row(std::size_t id, std::string name, double deviation, double gap, double tol) {
  const double slack = tol - deviation;
  return {id, std::move(name), deviation, gap, slack, slack >= 0.0};
}

void suite_identities(VerifyResult& res, Rng& rng, std::size_t id) {
  const RandomInstance inst = random_instance(rng);
  const DiffValueReport rep = diff_value_identity(inst.mdp, inst.beta, inst.rho, inst.lam, 1e-8);
  const double gap = exact_gap(inst.mdp, inst.beta, mix(inst.beta, inst.rho, inst.lam).mixed);
  res.rows.push_back(tol_row(id, "diff_value_identity", rep.max_deviation, gap, 1e-8));
  res.instances.push_back({{"instance_id", id},
                           {"suite", "identities"},
                           {"n_states", inst.mdp.n_states()},
                           {"n_actions", inst.mdp.n_actions()},
                           {"gamma", inst.mdp.gamma()},
                           {"max_deviation", rep.max_deviation}});
}

void suite_bounds(VerifyResult& res, Rng& rng, std::size_t id) {
  const RandomInstance inst = random_instance(rng);
  const FiniteMdp& mdp = inst.mdp;
  const std::size_t S = mdp.n_states();
  const ResidualPolicy rp = mix(inst.beta, inst.rho, inst.lam);
  const double scale = mdp.r_max() / (1.0 - mdp.gamma());

  std::vector<ValueTable> us;
  for (int i = 0; i < 5; ++i) us.push_back(random_values(rng, S, scale));
  us.push_back(evaluate_policy(mdp, inst.beta));
  const BoundReport rep = bound_report(mdp, inst.beta, inst.rho, inst.lam, us, {0.0, 0.5, 1.0}, 1e-9);
  for (const Certification& c : rep.certifications) {
    res.rows.push_back({id, c.bound, c.rhs, c.exact_gap, c.slack, c.pass});
  }

  const VanillaTerms tight = vanilla_cpi_bound(mdp, inst.beta, inst.rho, inst.lam, evaluate_policy(mdp, rp.mixed));
  res.rows.push_back(tol_row(id, "vanilla_tight", std::abs(tight.rhs - rep.exact_gap),
                             rep.exact_gap, 1e-8));

  const double lag_vs_res = rep.lagrangian.objective - rep.residual.rhs;
  res.rows.push_back({id, "lagrangian_ge_residual", rep.residual.rhs, rep.lagrangian.objective, lag_vs_res,
                      lag_vs_res >= -1e-12});

  const ConfidenceTable zero = ConfidenceTable::constant(S, mdp.n_actions(), 0.0);
  const ResidualTerms at_zero = residual_cpi_bound(mdp, inst.beta, inst.rho, zero);
  const ResidualTerms at_beta = residual_cpi_bound(mdp, inst.beta, inst.beta, inst.lam);
  const double eps = 64.0 * std::numeric_limits<double>::epsilon() * scale;
  res.rows.push_back(tol_row(id, "mm_anchor_lambda0", std::abs(at_zero.rhs), 0.0, eps));
  res.rows.push_back(tol_row(id, "mm_anchor_rho_beta", std::abs(at_beta.rhs), 0.0, eps));

  res.instances.push_back({{"instance_id", id},
                           {"suite", "bounds"},
                           {"n_states", S},
                           {"n_actions", mdp.n_actions()},
                           {"gamma", mdp.gamma()},
                           {"report", bound_report_to_json(rep)}});
}

void suite_qp(VerifyResult& res, Rng& rng, std::size_t id) {
  const ConfidenceQp qp = random_qp(rng, 6);
  QpOptions opt;
  opt.seed = rng.next();
  auto solve = [&](QpMethod m) {
    opt.method = m;
    return solve_confidence(qp, opt);
  };
  const QpSolution brute = solve(QpMethod::brute_force);
  const QpSolution as = solve(QpMethod::active_set);
  const QpSolution pg = solve(QpMethod::projected_gradient);
  const QpSolution cf = solve(QpMethod::closed_form_clip);

  res.rows.push_back({id, "active_set_vs_brute", brute.objective, as.objective, as.objective - brute.objective + 1e-6,
                      as.objective >= brute.objective - 1e-6});
  res.rows.push_back({id, "projected_gradient_vs_brute", brute.objective, pg.objective,
                      pg.objective - brute.objective + 1e-6, pg.objective >= brute.objective - 1e-6});
  res.rows.push_back({id, "closed_form_le_active_set", as.objective, cf.objective,
                      as.objective - cf.objective + 1e-9, cf.objective <= as.objective + 1e-9});
  const std::pair<const char*, const QpSolution*> sols[] = {
      {"brute_force", &brute}, {"active_set", &as}, {"projected_gradient", &pg}, {"closed_form_clip", &cf}};
  for (const auto& [name, sol] : sols) {
    const double viol = std::max(qp.max_equality_residual(sol->lambda), qp.max_box_violation(sol->lambda));
    res.rows.push_back(tol_row(id, std::string("feasible_") + name, viol, sol->objective, 1e-9));
  }
  res.instances.push_back({{"instance_id", id},
                           {"suite", "qp"},
                           {"dim", qp.dim()},
                           {"min_theta_eigenvalue", qp.min_theta_eigenvalue()},
                           {"brute_force", brute.objective},
                           {"active_set", as.objective},
                           {"projected_gradient", pg.objective},
                           {"closed_form_clip", cf.objective}});
}

void suite_proofs(VerifyResult& res, Rng& rng, std::size_t id) {
  const RandomInstance inst = random_instance(rng);
  const ProofReport rep = verify_proof_identities(inst.mdp, inst.beta, inst.rho, inst.lam, 1e-8, 1e-10);
  const double gap = exact_gap(inst.mdp, inst.beta, mix(inst.beta, inst.rho, inst.lam).mixed);
  res.rows.push_back(tol_row(id, "tech_identity", rep.identity_residual, gap, 1e-8));
  res.rows.push_back(tol_row(id, "stochastic_rows", rep.stochastic_row_dev, gap, 1e-10));
  res.rows.push_back(tol_row(id, "stochastic_nonnegative", std::max(0.0, -rep.stochastic_min_entry), gap, 1e-12));
  res.rows.push_back(tol_row(id, "zero_row_sum", rep.zero_rowsum_dev, gap, 1e-10));
  res.rows.push_back(tol_row(id, "mixed_row_sum", rep.mixed_rowsum_dev, gap, 1e-10));
  res.instances.push_back({{"instance_id", id},
                           {"suite", "proofs"},
                           {"residual_minus", rep.residual_minus},
                           {"residual_plus", rep.residual_plus},
                           {"sign", rep.sign}});
}

}  // namespace

VerifyResult run_verify_suite(const std::string& suite, std::size_t trials, std::uint64_t seed) {
  void (*run)(VerifyResult&, Rng&, std::size_t) = nullptr;
  if (suite == "identities") run = suite_identities;
  else if (suite == "bounds") run = suite_bounds;
  else if (suite == "qp") run = suite_qp;
  else if (suite == "proofs") run = suite_proofs;
  else throw InvalidArgument("unknown verify suite '" + suite + "'");
  VerifyResult res;
  Rng rng(seed);
  for (std::size_t i = 0; i < trials; ++i) run(res, rng, i);
  return res;
}

int cmd_verify(const VerifyArgs& args, std::ostream& out, std::ostream& err) {
  const VerifyResult res = run_verify_suite(args.suite, args.trials, args.seed);
  const std::string csv = verify_csv(res.rows);
  if (args.csv) write_text(*args.csv, csv);
  else out << csv;
  if (args.jsonl) {
    std::ostringstream os;
    for (const Json& j : res.instances) os << j.dump() << '\n';
    write_text(*args.jsonl, os.str());
  }
  const auto failed = std::count_if(res.rows.begin(), res.rows.end(), [](const VerifyRow& r) { return !r.pass; });
  err << args.suite << ": " << res.rows.size() - static_cast<std::size_t>(failed) << '/' << res.rows.size()
      << " checks passed\n";
  return failed == 0 ? 0 : 1;
}

}  // namespace brpo
