#pragma once

#include "brpo/baselines.hpp"
#include "brpo/critic.hpp"
#include "brpo/mdp.hpp"
#include "brpo/residual.hpp"
#include "brpo/solver.hpp"
#include "brpo/value_gap.hpp"

#include <json.hpp>

#include <string>

namespace brpo {

using Json = nlohmann::json;

Json table_to_json(const Table& t);
Table table_from_json(const Json& j, const std::string& what);

Json mdp_to_json(const FiniteMdp& mdp);
FiniteMdp mdp_from_json(const Json& j);

Json policy_to_json(const TabularPolicy& pi);
TabularPolicy policy_from_json(const Json& j);

Json confidence_to_json(const ConfidenceTable& lam);
ConfidenceTable confidence_from_json(const Json& j);

Json bound_report_to_json(const BoundReport& r);

/// Missing keys keep their defaults; unknown keys are rejected.
Json solver_config_to_json(const SolverConfig& c);
SolverConfig solver_config_from_json(const Json& j);
Json critic_config_to_json(const CriticConfig& c);
CriticConfig critic_config_from_json(const Json& j);

Json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& j);

}  // namespace brpo
