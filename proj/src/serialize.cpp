#include "brpo/serialize.hpp"

#include "brpo/error.hpp"

#include <fstream>
#include <set>

namespace brpo {

namespace {

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

void reject_unknown(const Json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw InvalidArgument(where + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw InvalidArgument("unknown key '" + key + "' in " + where);
  }
}

template <class T>
void maybe(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

}  // namespace

Json table_to_json(const Table& t) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < t.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < t.cols(); ++c) row.push_back(t(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Table table_from_json(const Json& j, const std::string& what) {
  if (!j.is_array()) throw InvalidArgument(what + " must be an array of rows");
  const std::size_t rows = j.size();
  const std::size_t cols = rows ? j[0].size() : 0;
  Table t(idx(rows), idx(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw InvalidArgument(what + " is ragged");
    for (std::size_t c = 0; c < cols; ++c) t(idx(r), idx(c)) = j[r][c].get<double>();
  }
  return t;
}

Json mdp_to_json(const FiniteMdp& mdp) {
  const std::size_t S = mdp.n_states();
  const std::size_t A = mdp.n_actions();
  Json trans = Json::array();
  for (std::size_t s = 0; s < S; ++s) {
    Json per_action = Json::array();
    for (std::size_t a = 0; a < A; ++a) {
      Json row = Json::array();
      const auto dist = mdp.next_state_dist(s, a);
      for (Eigen::Index sp = 0; sp < dist.size(); ++sp) row.push_back(dist(sp));
      per_action.push_back(std::move(row));
    }
    trans.push_back(std::move(per_action));
  }
  return Json{{"n_states", S},
              {"n_actions", A},
              {"gamma", mdp.gamma()},
              {"r_max", mdp.r_max()},
              {"reward", table_to_json(mdp.reward())},
              {"transition", std::move(trans)},
              {"start", vector_to_json(mdp.start())}};
}

FiniteMdp mdp_from_json(const Json& j) {
  try {
    reject_unknown(j, {"n_states", "n_actions", "gamma", "r_max", "reward", "transition", "start"}, "MDP");
    const auto S = j.at("n_states").get<std::size_t>();
    const auto A = j.at("n_actions").get<std::size_t>();
    Table reward = table_from_json(j.at("reward"), "reward");
    if (static_cast<std::size_t>(reward.rows()) != S || static_cast<std::size_t>(reward.cols()) != A) {
      throw InvalidArgument("reward must be n_states x n_actions");
    }
    const Json& tj = j.at("transition");
    if (tj.size() != S) throw InvalidArgument("transition must have n_states entries");
    Table trans(idx(S * A), idx(S));
    for (std::size_t s = 0; s < S; ++s) {
      if (tj[s].size() != A) throw InvalidArgument("transition[s] must have n_actions rows");
      for (std::size_t a = 0; a < A; ++a) {
        if (tj[s][a].size() != S) throw InvalidArgument("transition rows must have n_states entries");
        for (std::size_t sp = 0; sp < S; ++sp) trans(idx(s * A + a), idx(sp)) = tj[s][a][sp].get<double>();
      }
    }
    const Json& st = j.at("start");
    if (st.size() != S) throw InvalidArgument("start must have n_states entries");
    Vector start(idx(S));
    for (std::size_t s = 0; s < S; ++s) start(idx(s)) = st[s].get<double>();
    const double r_max = j.contains("r_max") ? j["r_max"].get<double>() : 1.0;
    return FiniteMdp(std::move(reward), std::move(trans), std::move(start), j.at("gamma").get<double>(), r_max);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("bad MDP JSON: ") + e.what());
  }
}

Json policy_to_json(const TabularPolicy& pi) {
  return Json{{"n_states", pi.n_states()}, {"n_actions", pi.n_actions()}, {"probs", table_to_json(pi.probs())}};
}

TabularPolicy policy_from_json(const Json& j) {
  try {
    reject_unknown(j, {"n_states", "n_actions", "probs"}, "policy");
    Table probs = table_from_json(j.at("probs"), "probs");
    if (static_cast<std::size_t>(probs.rows()) != j.at("n_states").get<std::size_t>() ||
        static_cast<std::size_t>(probs.cols()) != j.at("n_actions").get<std::size_t>()) {
      throw InvalidArgument("policy table does not match n_states x n_actions");
    }
    return TabularPolicy(std::move(probs));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("bad policy JSON: ") + e.what());
  }
}

Json confidence_to_json(const ConfidenceTable& lam) {
  return Json{{"n_states", lam.n_states()}, {"n_actions", lam.n_actions()}, {"lam", table_to_json(lam.lam)}};
}

ConfidenceTable confidence_from_json(const Json& j) {
  try {
    reject_unknown(j, {"n_states", "n_actions", "lam"}, "confidence");
    Table lam = table_from_json(j.at("lam"), "lam");
    if (static_cast<std::size_t>(lam.rows()) != j.at("n_states").get<std::size_t>() ||
        static_cast<std::size_t>(lam.cols()) != j.at("n_actions").get<std::size_t>()) {
      throw InvalidArgument("confidence table does not match n_states x n_actions");
    }
    return {std::move(lam)};
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("bad confidence JSON: ") + e.what());
  }
}

Json bound_report_to_json(const BoundReport& r) {
  Json weighted = Json::array();
  for (const WeightedTerms& w : r.weighted) weighted.push_back({{"mu", w.mu}, {"Lp_mu", w.lp_mu}, {"rhs", w.rhs}});
  Json certs = Json::array();
  for (const Certification& c : r.certifications) {
    certs.push_back({{"bound", c.bound}, {"rhs", c.rhs}, {"exact_gap", c.exact_gap}, {"slack", c.slack},
                     {"pass", c.pass}});
  }
  return Json{
      {"exact_gap", r.exact_gap},
      {"vanilla",
       {{"L_tilde", r.vanilla.l_tilde}, {"eps", r.vanilla.eps}, {"kl_term", r.vanilla.kl_term}, {"rhs", r.vanilla.rhs}}},
      {"residual",
       {{"Lp", r.residual.lp},
        {"Lpp", r.residual.lpp},
        {"Lppp", vector_to_json(r.residual.lppp)},
        {"Lppp_max", r.residual.lppp_max},
        {"rhs", r.residual.rhs}}},
      {"lagrangian", {{"E_P0_Lppp", r.lagrangian.expected_lppp}, {"objective", r.lagrangian.objective}}},
      {"pinsker",
       {{"kappa_lambda", vector_to_json(r.pinsker.kappa_lam)},
        {"kappa_abs_adv_lambda", vector_to_json(r.pinsker.kappa_abs_adv_lam)},
        {"Lpp_tilde", r.pinsker.lpp_tilde},
        {"Lppp_tilde", r.pinsker.lppp_tilde},
        {"Lpp", r.pinsker.lpp},
        {"Lppp_expected", r.pinsker.lppp_expected},
        {"Lpp_le_tilde", r.pinsker.lpp_below_tilde},
        {"Lppp_le_tilde", r.pinsker.lppp_below_tilde}}},
      {"weighted", std::move(weighted)},
      {"certifications", std::move(certs)}};
}

Json solver_config_to_json(const SolverConfig& c) {
  Json j{{"iterations", c.iterations},
         {"mu", c.mu},
         {"qp_method", to_string(c.qp_method)},
         {"qp_tol", c.qp_tol},
         {"qp_ridge", c.qp_ridge},
         {"nn_metric", to_string(c.nn_metric)},
         {"seed", c.seed},
         {"generalize", c.generalize},
         {"init_candidate_lambda", c.init_candidate_lambda},
         {"adv_source", to_string(c.adv_source)}};
  j["kappa_max"] = c.kappa_max ? Json(*c.kappa_max) : Json(nullptr);
  j["decay_eps"] = c.decay_eps ? Json(*c.decay_eps) : Json(nullptr);
  return j;
}

SolverConfig solver_config_from_json(const Json& j) {
  SolverConfig c;
  try {
    reject_unknown(j,
                   {"iterations", "mu", "kappa_max", "decay_eps", "qp_method", "qp_tol", "qp_ridge", "nn_metric",
                    "seed", "generalize", "init_candidate_lambda", "adv_source"},
                   "brpo config");
    maybe(j, "iterations", c.iterations);
    maybe(j, "mu", c.mu);
    if (j.contains("kappa_max") && !j["kappa_max"].is_null()) c.kappa_max = j["kappa_max"].get<double>();
    if (j.contains("decay_eps") && !j["decay_eps"].is_null()) c.decay_eps = j["decay_eps"].get<double>();
    if (j.contains("qp_method")) c.qp_method = qp_method_from_string(j["qp_method"].get<std::string>());
    maybe(j, "qp_tol", c.qp_tol);
    maybe(j, "qp_ridge", c.qp_ridge);
    if (j.contains("nn_metric")) c.nn_metric = nn_metric_from_string(j["nn_metric"].get<std::string>());
    maybe(j, "seed", c.seed);
    maybe(j, "generalize", c.generalize);
    maybe(j, "init_candidate_lambda", c.init_candidate_lambda);
    if (j.contains("adv_source")) c.adv_source = adv_source_from_string(j["adv_source"].get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("bad brpo config: ") + e.what());
  }
  c.validate();
  return c;
}

Json critic_config_to_json(const CriticConfig& c) {
  return Json{{"mu", c.mu}, {"sweeps", c.sweeps}, {"tol", c.tol}, {"source", to_string(c.source)}};
}

CriticConfig critic_config_from_json(const Json& j) {
  CriticConfig c;
  try {
    reject_unknown(j, {"mu", "sweeps", "tol", "source"}, "critic config");
    maybe(j, "mu", c.mu);
    maybe(j, "sweeps", c.sweeps);
    maybe(j, "tol", c.tol);
    if (j.contains("source")) c.source = critic_source_from_string(j["source"].get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("bad critic config: ") + e.what());
  }
  c.validate();
  return c;
}

Json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open '" + path + "'");
  try {
    return Json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path + "' for writing");
  f << j.dump(2) << '\n';
}

}  // namespace brpo
