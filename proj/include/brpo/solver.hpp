#pragma once

#include "brpo/batch.hpp"
#include "brpo/mdp.hpp"
#include "brpo/qp.hpp"
#include "brpo/residual.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace brpo {

enum class NnMetric { manhattan, hamming };
std::string to_string(NnMetric m);
NnMetric nn_metric_from_string(const std::string& s);

enum class AdvSource { critic, exact };
std::string to_string(AdvSource s);
AdvSource adv_source_from_string(const std::string& s);

struct SolverConfig {
  std::size_t iterations = 20;
  double mu = 0.9;
  std::optional<double> kappa_max;
  std::optional<double> decay_eps;
  QpMethod qp_method = QpMethod::active_set;
  double qp_tol = 1e-9;
  double qp_ridge = 1e-6;
  NnMetric nn_metric = NnMetric::manhattan;
  std::uint64_t seed = 0;
  bool generalize = false;
  // Confidence used for the very first candidate step; lambda_0 = 0 would leave rho = beta forever.
  double init_candidate_lambda = 1.0;
  AdvSource adv_source = AdvSource::critic;

  void validate() const;
};

/// tau(s) = gamma * kappa / (2 - 2 gamma), kappa = max(kappa_lam, kappa_|A|lam),
/// capped by kappa_max and scaled by decay_eps^k when those are set.
double temperature(const TabularPolicy& beta, const ConfidenceTable& lam, const AdvantageTable& adv,
                   std::size_t state, double gamma, std::optional<double> kappa_max = std::nullopt,
                   std::optional<double> decay_eps = std::nullopt, std::size_t k = 0);
Vector temperatures(const TabularPolicy& beta, const ConfidenceTable& lam, const AdvantageTable& adv, double gamma,
                    std::optional<double> kappa_max = std::nullopt, std::optional<double> decay_eps = std::nullopt,
                    std::size_t k = 0);

/// rho(a|s) proportional to beta(a|s) exp(lambda(s,a) adv(s,a) / tau(s)).
TabularPolicy candidate_policy(const TabularPolicy& beta, const AdvantageTable& adv, const ConfidenceTable& lam,
                               const Vector& tau);

/// Solved per-state labels with a nearest-state lookup.
struct ConfidenceLabelSet {
  std::vector<std::size_t> states;
  std::vector<Vector> labels;
  std::optional<Matrix> coordinates;  // one row per MDP state
  NnMetric metric = NnMetric::manhattan;

  static ConfidenceLabelSet from_qp(const ConfidenceQp& qp, const Vector& lambda,
                                    std::optional<Matrix> coordinates, NnMetric metric);
  /// Position in `states` of the closest labelled state; ties go to the lowest state index.
  std::size_t nearest(std::size_t query) const;
  double distance(std::size_t a, std::size_t b) const;
};

Vector generalize_confidence(const ConfidenceLabelSet& labels, std::size_t query, const TabularPolicy& beta,
                             const TabularPolicy& rho);

struct TraceRow {
  std::size_t iter = 0;
  std::string half_step;  // "rho" or "lambda"
  SaaTerms saa;
  std::optional<double> j_exact;
  double wallclock = 0.0;  // seconds since the run started
};

struct CoordinateAscentResult {
  ResidualPolicy policy;
  std::vector<TraceRow> trace;
  std::size_t warm_starts_kept = 0;
  double min_theta_eigenvalue = 0.0;
};

struct CoordinateAscentInput {
  const Batch* batch = nullptr;
  const TabularPolicy* beta = nullptr;
  const AdvantageTable* adv = nullptr;
  double gamma = 0.99;
  std::optional<Matrix> coordinates;
  const FiniteMdp* exact_mdp = nullptr;  // enables J_exact in the trace
};

CoordinateAscentResult coordinate_ascent(const CoordinateAscentInput& in, const SolverConfig& config);

/// Largest drop of the lambda-step objective relative to its rho-step anchor (<= 0 is monotone).
double max_lambda_step_drop(const std::vector<TraceRow>& trace);

std::string trace_csv(const std::vector<TraceRow>& trace, bool wallclock = false);

}  // namespace brpo
