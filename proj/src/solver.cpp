#include "brpo/solver.hpp"

#include "brpo/error.hpp"
#include "brpo/value_gap.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>

namespace brpo {

namespace {

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

double theta_min_eigenvalue(const ConfidenceQp& qp) {
  // Theta = c (u v' + v u') has eigenvalues c (u'v +- |u||v|) and zeros.
  const double lo = qp.coef * (qp.u.dot(qp.v) - qp.u.norm() * qp.v.norm());
  if (qp.dim() > 2) return std::min(0.0, lo);
  return qp.dim() == 2 ? lo : 2.0 * qp.coef * qp.u.dot(qp.v);
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

std::string to_string(NnMetric m) { return m == NnMetric::manhattan ? "manhattan" : "hamming"; }

NnMetric nn_metric_from_string(const std::string& s) {
  if (s == "manhattan") return NnMetric::manhattan;
  if (s == "hamming") return NnMetric::hamming;
  throw InvalidArgument("unknown nn_metric '" + s + "'");
}

std::string to_string(AdvSource s) { return s == AdvSource::critic ? "critic" : "exact"; }

AdvSource adv_source_from_string(const std::string& s) {
  if (s == "critic") return AdvSource::critic;
  if (s == "exact") return AdvSource::exact;
  throw InvalidArgument("unknown adv_source '" + s + "'");
}

void SolverConfig::validate() const {
  if (!(mu >= 0.0 && mu <= 1.0)) throw InvalidArgument("brpo.mu must lie in [0, 1]");
  if (kappa_max && !(*kappa_max > 0.0)) throw InvalidArgument("brpo.kappa_max must be > 0");
  if (decay_eps && !(*decay_eps > 0.0 && *decay_eps < 1.0)) {
    throw InvalidArgument("brpo.decay_eps must lie in (0, 1)");
  }
  if (!(qp_tol > 0.0)) throw InvalidArgument("brpo.qp_tol must be > 0");
  if (!(qp_ridge >= 0.0)) throw InvalidArgument("brpo.qp_ridge must be >= 0");
  if (!(init_candidate_lambda >= 0.0 && init_candidate_lambda <= 1.0)) {
    throw InvalidArgument("brpo.init_candidate_lambda must lie in [0, 1]");
  }
}

double temperature(const TabularPolicy& beta, const ConfidenceTable& lam, const AdvantageTable& adv,
                   std::size_t state, double gamma, std::optional<double> kappa_max,
                   std::optional<double> decay_eps, std::size_t k) {
  if (state >= beta.n_states()) throw InvalidArgument("temperature: state out of range");
  const Eigen::RowVectorXd l = lam.lam.row(idx(state));
  const Eigen::RowVectorXd la = l.cwiseProduct(adv.row(idx(state)).cwiseAbs());
  double kap = std::max(kappa(beta.probs().row(idx(state)), l), kappa(beta.probs().row(idx(state)), la));
  if (kappa_max) kap = std::min(kap, *kappa_max);
  if (decay_eps) kap *= std::pow(*decay_eps, static_cast<double>(k));
  return gamma * kap / (2.0 - 2.0 * gamma);
}

Vector temperatures(const TabularPolicy& beta, const ConfidenceTable& lam, const AdvantageTable& adv, double gamma,
                    std::optional<double> kappa_max, std::optional<double> decay_eps, std::size_t k) {
  Vector tau(idx(beta.n_states()));
  for (std::size_t s = 0; s < beta.n_states(); ++s) {
    tau(idx(s)) = temperature(beta, lam, adv, s, gamma, kappa_max, decay_eps, k);
  }
  return tau;
}

TabularPolicy candidate_policy(const TabularPolicy& beta, const AdvantageTable& adv, const ConfidenceTable& lam,
                               const Vector& tau) {
  const Eigen::Index S = beta.probs().rows();
  const Eigen::Index A = beta.probs().cols();
  if (adv.rows() != S || adv.cols() != A || lam.lam.rows() != S || lam.lam.cols() != A || tau.size() != S) {
    throw InvalidArgument("candidate_policy: shape mismatch");
  }
  Table rho = Table::Zero(S, A);
  for (Eigen::Index s = 0; s < S; ++s) {
    if (!(tau(s) > 0.0)) throw InvalidArgument("candidate_policy: temperature must be > 0");
    double top = -std::numeric_limits<double>::infinity();
    for (Eigen::Index a = 0; a < A; ++a) {
      if (beta.probs()(s, a) > 0.0) top = std::max(top, lam.lam(s, a) * adv(s, a) / tau(s));
    }
    double z = 0.0;
    for (Eigen::Index a = 0; a < A; ++a) {
      if (beta.probs()(s, a) == 0.0) continue;
      rho(s, a) = beta.probs()(s, a) * std::exp(lam.lam(s, a) * adv(s, a) / tau(s) - top);
      z += rho(s, a);
    }
    rho.row(s) /= z;
    // Exact zero exponent leaves the behavior row untouched.
    if ((lam.lam.row(s).cwiseProduct(adv.row(s)).array() == 0.0).all()) rho.row(s) = beta.probs().row(s);
  }
  return TabularPolicy(std::move(rho));
}

ConfidenceLabelSet ConfidenceLabelSet::from_qp(const ConfidenceQp& qp, const Vector& lambda,
                                               std::optional<Matrix> coordinates, NnMetric metric) {
  ConfidenceLabelSet set;
  set.states = qp.states;
  const auto A = idx(qp.n_actions);
  for (std::size_t b = 0; b < qp.n_blocks(); ++b) set.labels.push_back(lambda.segment(idx(b) * A, A));
  set.coordinates = std::move(coordinates);
  set.metric = metric;
  return set;
}

double ConfidenceLabelSet::distance(std::size_t a, std::size_t b) const {
  if (metric == NnMetric::manhattan && coordinates) {
    if (a >= static_cast<std::size_t>(coordinates->rows()) || b >= static_cast<std::size_t>(coordinates->rows())) {
      throw InvalidArgument("state has no coordinates");
    }
    return (coordinates->row(idx(a)) - coordinates->row(idx(b))).cwiseAbs().sum();
  }
  return static_cast<double>(std::popcount(static_cast<std::uint64_t>(a ^ b)));
}

std::size_t ConfidenceLabelSet::nearest(std::size_t query) const {
  if (states.empty()) throw InvalidArgument("empty confidence label set");
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < states.size(); ++i) {
    const double d = distance(query, states[i]);
    if (d < best_d || (d == best_d && states[i] < states[best])) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

Vector generalize_confidence(const ConfidenceLabelSet& labels, std::size_t query, const TabularPolicy& beta,
                             const TabularPolicy& rho) {
  const std::size_t i = labels.nearest(query);
  return project_confidence(labels.labels[i], beta.probs().row(idx(query)), rho.probs().row(idx(query))).exact;
}

CoordinateAscentResult coordinate_ascent(const CoordinateAscentInput& in, const SolverConfig& config) {
  config.validate();
  if (!in.batch || !in.beta || !in.adv) throw InvalidArgument("coordinate_ascent: missing batch, beta or adv");
  const Batch& batch = *in.batch;
  const TabularPolicy& beta = *in.beta;
  const AdvantageTable& adv = *in.adv;
  if (batch.empty()) throw InvalidArgument("coordinate_ascent: batch covers no state");
  const std::size_t S = beta.n_states();
  const std::size_t A = beta.n_actions();
  if (static_cast<std::size_t>(adv.rows()) != S || static_cast<std::size_t>(adv.cols()) != A) {
    throw InvalidArgument("coordinate_ascent: advantage table shape mismatch");
  }

  ConfidenceTable lam = ConfidenceTable::constant(S, A, 0.0);
  TabularPolicy rho = beta;
  CoordinateAscentResult out{mix(beta, rho, lam), {}, 0, 0.0};

  auto j_of = [&](const TabularPolicy& r, const ConfidenceTable& l) -> std::optional<double> {
    if (!in.exact_mdp) return std::nullopt;
    return expected_return(*in.exact_mdp, mix(beta, r, l).mixed);
  };

  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

  QpOptions opt;
  opt.method = config.qp_method;
  opt.tol = config.qp_tol;
  opt.ridge = config.qp_ridge;

  for (std::size_t k = 1; k <= config.iterations; ++k) {
    const ConfidenceTable seed = k == 1 ? ConfidenceTable::constant(S, A, config.init_candidate_lambda) : lam;
    const Vector tau = temperatures(beta, seed, adv, in.gamma, config.kappa_max, config.decay_eps, k - 1);
    rho = candidate_policy(beta, adv, seed, tau);
    const ConfidenceQp qp = build_confidence_qp(batch, beta, rho, adv, in.gamma);
    out.min_theta_eigenvalue = std::min(out.min_theta_eigenvalue, theta_min_eigenvalue(qp));

    // The previous confidence projected onto the new candidate's constraint set.
    ConfidenceTable anchor{Table(idx(S), idx(A))};
    for (std::size_t s = 0; s < S; ++s) {
      anchor.lam.row(idx(s)) =
          project_confidence(lam.lam.row(idx(s)).transpose(), beta.probs().row(idx(s)), rho.probs().row(idx(s)))
              .exact.transpose();
    }
    Vector warm(idx(qp.dim()));
    for (std::size_t b = 0; b < qp.n_blocks(); ++b) {
      warm.segment(idx(b * A), idx(A)) = anchor.lam.row(idx(qp.states[b])).transpose();
    }
    out.trace.push_back({k, "rho", saa_terms(qp, warm), j_of(rho, anchor), elapsed()});

    opt.warm_start = warm;
    opt.seed = config.seed + k;
    const QpSolution sol = solve_confidence(qp, opt);
    if (sol.warm_start_kept) ++out.warm_starts_kept;

    lam = extend_tabular(sol.lambda, batch, S, A);
    if (config.generalize) {
      const ConfidenceLabelSet labels = ConfidenceLabelSet::from_qp(qp, sol.lambda, in.coordinates, config.nn_metric);
      const std::set<std::size_t> seen(qp.states.begin(), qp.states.end());
      for (std::size_t s = 0; s < S; ++s) {
        if (!seen.count(s)) lam.lam.row(idx(s)) = generalize_confidence(labels, s, beta, rho).transpose();
      }
    }
    out.trace.push_back({k, "lambda", saa_terms(qp, sol.lambda), j_of(rho, lam), elapsed()});
  }
  out.policy = mix(beta, rho, lam);
  return out;
}

double max_lambda_step_drop(const std::vector<TraceRow>& trace) {
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < trace.size(); ++i) {
    if (trace[i].half_step == "lambda" && trace[i - 1].half_step == "rho" && trace[i - 1].iter == trace[i].iter) {
      worst = std::max(worst, trace[i - 1].saa.l_bar - trace[i].saa.l_bar);
    }
  }
  return worst;
}

std::string trace_csv(const std::vector<TraceRow>& trace, bool wallclock) {
  std::ostringstream os;
  os << "iter,half_step,L_bar,Lp,Lpp,Lppp,J_exact_if_available" << (wallclock ? ",wallclock" : "") << '\n';
  for (const TraceRow& r : trace) {
    os << r.iter << ',' << r.half_step << ',' << fmt(r.saa.l_bar) << ',' << fmt(r.saa.lp) << ',' << fmt(r.saa.lpp)
       << ',' << fmt(r.saa.lppp) << ',' << (r.j_exact ? fmt(*r.j_exact) : std::string());
    if (wallclock) os << ',' << fmt(r.wallclock);
    os << '\n';
  }
  return os.str();
}

}  // namespace brpo
