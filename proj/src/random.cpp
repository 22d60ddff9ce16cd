#include "brpo/random.hpp"

#include <algorithm>
#include <cmath>

namespace brpo {

namespace {

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.uniform() * static_cast<double>(hi - lo + 1));
}

}  // namespace

Vector random_simplex(Rng& rng, std::size_t n, double floor) {
  Vector v(idx(n));
  for (std::size_t i = 0; i < n; ++i) v(idx(i)) = -std::log(1.0 - rng.uniform()) + floor;
  return v / v.sum();
}

ConfidenceTable random_confidence(Rng& rng, const TabularPolicy& beta, const TabularPolicy& rho) {
  Table lam(beta.probs().rows(), beta.probs().cols());
  const bool constant = rng.uniform() < 0.15;
  const double c = rng.uniform();
  for (Eigen::Index s = 0; s < lam.rows(); ++s) {
    Vector label(lam.cols());
    for (Eigen::Index a = 0; a < lam.cols(); ++a) label(a) = constant ? c : rng.uniform();
    lam.row(s) = project_confidence(label, beta.probs().row(s), rho.probs().row(s)).exact.transpose();
  }
  return {std::move(lam)};
}

ValueTable random_values(Rng& rng, std::size_t n, double scale) {
  ValueTable v(idx(n));
  for (std::size_t i = 0; i < n; ++i) v(idx(i)) = scale * (2.0 * rng.uniform() - 1.0);
  return v;
}

RandomInstance random_instance(Rng& rng, const RandomInstanceOptions& opt) {
  const std::size_t S = pick(rng, 2, opt.max_states);
  const std::size_t A = pick(rng, 2, opt.max_actions);
  const double gamma = opt.gammas[std::min(opt.gammas.size() - 1, pick(rng, 0, opt.gammas.size() - 1))];
  Table reward(idx(S), idx(A));
  for (Eigen::Index i = 0; i < reward.size(); ++i) reward.data()[i] = rng.uniform();
  Table trans = Table::Zero(idx(S * A), idx(S));
  for (std::size_t row = 0; row < S * A; ++row) {
    if (rng.uniform() < opt.sparse_probability) {
      const std::size_t first = pick(rng, 0, S - 1);
      const std::size_t second = pick(rng, 0, S - 1);
      const double w = rng.uniform();
      trans(idx(row), idx(first)) += w;
      trans(idx(row), idx(second)) += 1.0 - w;
    } else {
      trans.row(idx(row)) = random_simplex(rng, S).transpose();
    }
    trans.row(idx(row)) /= trans.row(idx(row)).sum();
  }
  Vector start;
  if (rng.uniform() < 0.3) {
    start = Vector::Zero(idx(S));
    start(idx(pick(rng, 0, S - 1))) = 1.0;
  } else {
    start = random_simplex(rng, S);
  }
  FiniteMdp mdp(std::move(reward), std::move(trans), std::move(start), gamma, 1.0);
  Table beta(idx(S), idx(A));
  Table rho(idx(S), idx(A));
  for (std::size_t s = 0; s < S; ++s) {
    beta.row(idx(s)) = random_simplex(rng, A, 0.05).transpose();
    rho.row(idx(s)) = random_simplex(rng, A, 0.05).transpose();
  }
  TabularPolicy b(std::move(beta));
  TabularPolicy r(std::move(rho));
  ConfidenceTable lam = random_confidence(rng, b, r);
  return {std::move(mdp), std::move(b), std::move(r), std::move(lam)};
}

ConfidenceQp random_qp(Rng& rng, std::size_t max_dim) {
  const std::size_t A = pick(rng, 2, std::min<std::size_t>(3, max_dim));
  const std::size_t max_blocks = std::max<std::size_t>(1, max_dim / A);
  const std::size_t m = pick(rng, 1, max_blocks);
  std::vector<std::size_t> states;
  std::vector<double> counts;
  Table b(idx(m), idx(A)), r(idx(m), idx(A)), adv(idx(m), idx(A));
  for (std::size_t i = 0; i < m; ++i) {
    states.push_back(i);
    counts.push_back(static_cast<double>(pick(rng, 1, 5)));
    b.row(idx(i)) = random_simplex(rng, A, 0.05).transpose();
    r.row(idx(i)) = rng.uniform() < 0.1 ? b.row(idx(i)) : Table(random_simplex(rng, A, 0.05).transpose());
    for (std::size_t a = 0; a < A; ++a) adv(idx(i), idx(a)) = 2.0 * rng.uniform() - 1.0;
  }
  const double gamma = rng.uniform() < 0.5 ? 0.5 : 0.9;
  return make_confidence_qp(states, counts, b, r, adv, gamma);
}

}  // namespace brpo
