#pragma once

#include "brpo/mdp.hpp"
#include "brpo/qp.hpp"
#include "brpo/residual.hpp"
#include "brpo/rng.hpp"

#include <vector>

namespace brpo {

struct RandomInstanceOptions {
  std::size_t max_states = 8;
  std::size_t max_actions = 4;
  std::vector<double> gammas{0.5, 0.9, 0.95};
  double sparse_probability = 0.3;  // chance that T rows keep only one or two successors
};

/// Random MDP with full-support beta and rho and a random feasible lambda.
struct RandomInstance {
  FiniteMdp mdp;
  TabularPolicy beta;
  TabularPolicy rho;
  ConfidenceTable lam;
};

Vector random_simplex(Rng& rng, std::size_t n, double floor = 0.0);
RandomInstance random_instance(Rng& rng, const RandomInstanceOptions& opt = {});
/// Feasible confidence for (beta, rho): exact projections of uniform labels.
ConfidenceTable random_confidence(Rng& rng, const TabularPolicy& beta, const TabularPolicy& rho);
ValueTable random_values(Rng& rng, std::size_t n, double scale);

/// Small confidence QP with total dimension <= max_dim.
ConfidenceQp random_qp(Rng& rng, std::size_t max_dim = 6);

}  // namespace brpo
