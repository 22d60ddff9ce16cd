#pragma once

#include "brpo/mdp.hpp"
#include "brpo/residual.hpp"

#include <optional>
#include <vector>

namespace brpo {

enum class AdvantageMode { behavior, target };

/// Per-state residual quantities of a (beta, rho, lambda) triple.
struct ResidualReward {
  Vector delta_a;   // sum_a lambda (rho - beta) adv
  Matrix delta_t;   // sum_a T(s'|s,a) lambda (rho - beta)
  Vector delta_r;   // sum_a lambda (rho - beta) R
  AdvantageMode mode = AdvantageMode::behavior;
};

/// `adv` must be A_beta for behavior mode and A_pi for target mode.
ResidualReward residual_rewards(const FiniteMdp& mdp, const TabularPolicy& beta, const TabularPolicy& rho,
                                const ConfidenceTable& lam, const AdvantageTable& adv, AdvantageMode mode);

struct DiffValueReport {
  Vector direct;          // V_pi - V_beta
  Vector beta_resolvent;  // (I - gamma T_beta)^-1 dA_hat, advantages of pi
  Vector pi_resolvent;    // (I - gamma T_pi)^-1 dA, advantages of beta
  double max_deviation = 0.0;
  bool pass = false;
};
DiffValueReport diff_value_identity(const FiniteMdp& mdp, const TabularPolicy& beta,
                                    const TabularPolicy& rho, const ConfidenceTable& lam,
                                    double tol = 1e-8);

struct VanillaTerms {
  double l_tilde = 0.0;
  double eps = 0.0;
  double kl_term = 0.0;
  double rhs = 0.0;
};
VanillaTerms vanilla_cpi_bound(const FiniteMdp& mdp, const TabularPolicy& beta, const TabularPolicy& rho,
                               const ConfidenceTable& lam, const ValueTable& u);

struct ResidualTerms {
  double lp = 0.0;
  double lpp = 0.0;
  Vector lppp;          // per start state s0
  double lppp_max = 0.0;
  double rhs = 0.0;
};
ResidualTerms residual_cpi_bound(const FiniteMdp& mdp, const TabularPolicy& beta, const TabularPolicy& rho,
                                 const ConfidenceTable& lam);

struct LagrangianTerms {
  double expected_lppp = 0.0;
  double objective = 0.0;
};
LagrangianTerms lagrangian_objective(const FiniteMdp& mdp, const ResidualTerms& terms);
LagrangianTerms lagrangian_objective(const FiniteMdp& mdp, const TabularPolicy& beta, const TabularPolicy& rho,
                                     const ConfidenceTable& lam);

/// kappa_g = 1 + log E_{a~beta} exp(g^2), evaluated as a log-sum-exp.
double kappa(const Eigen::Ref<const Eigen::RowVectorXd>& beta_row, const Eigen::Ref<const Eigen::RowVectorXd>& g);

struct PinskerTerms {
  Vector kappa_lam;
  Vector kappa_abs_adv_lam;
  double lpp_tilde = 0.0;
  double lppp_tilde = 0.0;
  double lpp = 0.0;             // E_{d_beta} lambda |rho - beta|
  double lppp_expected = 0.0;   // E_{P0} L'''(s0)
  bool lpp_below_tilde = false;
  bool lppp_below_tilde = false;
};
PinskerTerms pinsker_terms(const FiniteMdp& mdp, const TabularPolicy& beta, const TabularPolicy& rho,
                           const ConfidenceTable& lam);

struct WeightedTerms {
  double mu = 0.0;
  double lp_mu = 0.0;
  double rhs = 0.0;
};
/// W defaults to (1 - mu) A_beta + mu A_pi for the mixed policy pi.
WeightedTerms weighted_bound(const FiniteMdp& mdp, const TabularPolicy& beta, const TabularPolicy& rho,
                             const ConfidenceTable& lam, double mu,
                             const std::optional<AdvantageTable>& w = std::nullopt);

struct ProofReport {
  double residual_minus = 0.0;   // |M_pi - M_beta + gamma M_beta dT M_pi|
  double residual_plus = 0.0;    // |M_pi - M_beta - gamma M_beta dT M_pi|
  int sign = 0;                  // +1 or -1, whichever holds; 0 when neither does
  double identity_residual = 0.0;    // residual_plus
  double stochastic_row_dev = 0.0;   // T_beta + dT
  double stochastic_min_entry = 0.0;
  double zero_rowsum_dev = 0.0;      // D_beta dT 1
  double mixed_rowsum_dev = 0.0;     // I + D_beta dT
  bool pass = false;
};
ProofReport verify_proof_identities(const FiniteMdp& mdp, const TabularPolicy& beta, const TabularPolicy& rho,
                                    const ConfidenceTable& lam, double identity_tol = 1e-8,
                                    double rowsum_tol = 1e-10);

struct Certification {
  std::string bound;
  double rhs = 0.0;
  double exact_gap = 0.0;
  double slack = 0.0;
  bool pass = false;
};

/// Every term for one instance plus the independently evaluated J_pi - J_beta.
struct BoundReport {
  double exact_gap = 0.0;
  VanillaTerms vanilla;
  ResidualTerms residual;
  LagrangianTerms lagrangian;
  PinskerTerms pinsker;
  std::vector<WeightedTerms> weighted;
  std::vector<Certification> certifications;
};

double exact_gap(const FiniteMdp& mdp, const TabularPolicy& beta, const TabularPolicy& pi);

/// Certifies the vanilla bound at every U in `us`, the residual bound and the weighted bound per mu.
BoundReport bound_report(const FiniteMdp& mdp, const TabularPolicy& beta, const TabularPolicy& rho,
                         const ConfidenceTable& lam, const std::vector<ValueTable>& us,
                         const std::vector<double>& mus, double tol = 1e-9);

}  // namespace brpo
