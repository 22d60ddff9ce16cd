#include "brpo/qp.hpp"

#include "brpo/error.hpp"
#include "brpo/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace brpo {

namespace {

using Index = Eigen::Index;

Index idx(std::size_t i) { return static_cast<Index>(i); }

Vector clip01(const Vector& y) { return y.cwiseMax(0.0).cwiseMin(1.0); }

// Strictly better objective, or equal up to rounding and more conservative.
bool better(double fa, const Vector& a, double fb, const Vector& b) {
  const double scale = 1e-13 * (1.0 + std::abs(fa) + std::abs(fb));
  if (fa > fb + scale) return true;
  if (fa < fb - scale) return false;
  return a.sum() < b.sum() - 1e-12;
}

struct Candidate {
  Vector x;
  double f = -std::numeric_limits<double>::infinity();
  bool valid = false;

  void offer(const Vector& y, double fy) {
    if (!valid || better(fy, y, f, x)) {
      x = y;
      f = fy;
      valid = true;
    }
  }
};

double lipschitz(const ConfidenceQp& qp) {
  return qp.coef * (qp.u.norm() * qp.v.norm() + std::abs(qp.u.dot(qp.v)));
}

// ---------------------------------------------------------------- projected gradient

struct PgResult {
  Vector x;
  std::size_t iterations = 0;
};

PgResult projected_gradient_run(const ConfidenceQp& qp, const Vector& start, std::size_t max_iter) {
  const double lip = lipschitz(qp);
  const double s0 = lip > 0.0 ? 1.0 / lip : 1.0;
  double step = s0;
  Vector x = project_feasible(qp, start);
  double f = qp.objective(x);
  std::size_t it = 0;
  for (; it < max_iter; ++it) {
    const Vector g = qp.gradient(x);
    double s = std::min(step * 2.0, s0 * 1e6);
    Vector y;
    double fy = 0.0;
    while (true) {
      y = project_feasible(qp, x + s * g);
      fy = qp.objective(y);
      if (fy >= f + (y - x).squaredNorm() / (2.0 * s) || s <= s0) break;
      s = std::max(s * 0.5, s0);
    }
    const double move = (y - x).lpNorm<Eigen::Infinity>();
    if (fy < f) break;  // rounding floor reached
    x = std::move(y);
    f = fy;
    step = s;
    if (move <= 1e-13) break;
  }
  return {x, it};
}

// ---------------------------------------------------------------- active set

enum : int { kFree = 0, kLower = -1, kUpper = 1 };

struct Face {
  std::vector<std::size_t> free;
  std::vector<std::size_t> block_of_free;
};

// Ascent direction restricted to the face: M p = 0 and p = 0 on bound coordinates.
Vector face_gradient(const ConfidenceQp& qp, const Vector& g, const std::vector<int>& status) {
  const std::size_t A = qp.n_actions;
  Vector p = Vector::Zero(g.size());
  for (std::size_t b = 0; b < qp.n_blocks(); ++b) {
    double dd = 0.0;
    double dg = 0.0;
    for (std::size_t a = 0; a < A; ++a) {
      const std::size_t i = b * A + a;
      if (status[i] != kFree) continue;
      dd += qp.diff(idx(i)) * qp.diff(idx(i));
      dg += qp.diff(idx(i)) * g(idx(i));
    }
    const double mult = dd > 0.0 ? dg / dd : 0.0;
    for (std::size_t a = 0; a < A; ++a) {
      const std::size_t i = b * A + a;
      if (status[i] == kFree) p(idx(i)) = g(idx(i)) - mult * qp.diff(idx(i));
    }
  }
  return p;
}

// Solves the equality-constrained stationarity system on the free coordinates.
// Returns nullopt when the system is inconsistent (no stationary point on the face).
std::optional<Vector> face_stationary_point(const ConfidenceQp& qp, const Vector& x, const std::vector<int>& status,
                                            const Matrix& theta, const Matrix& m_full) {
  std::vector<Index> free;
  for (std::size_t i = 0; i < status.size(); ++i) {
    if (status[i] == kFree) free.push_back(idx(i));
  }
  const Index nf = static_cast<Index>(free.size());
  const Index m = m_full.rows();
  Vector fixed = x;
  for (Index i : free) fixed(i) = 0.0;
  Matrix k = Matrix::Zero(nf + m, nf + m);
  Vector rhs(nf + m);
  const Vector theta_fixed = theta * fixed;
  for (Index r = 0; r < nf; ++r) {
    for (Index c = 0; c < nf; ++c) k(r, c) = theta(free[r], free[c]);
    for (Index j = 0; j < m; ++j) k(r, nf + j) = -m_full(j, free[r]);
    rhs(r) = qp.linear(free[r]) - theta_fixed(free[r]);
  }
  const Vector m_fixed = m_full * fixed;
  for (Index j = 0; j < m; ++j) {
    for (Index c = 0; c < nf; ++c) k(nf + j, c) = m_full(j, free[c]);
    rhs(nf + j) = -m_fixed(j);
  }
  const Eigen::CompleteOrthogonalDecomposition<Matrix> cod(k);
  const Vector z = cod.solve(rhs);
  if ((k * z - rhs).norm() > 1e-9 * (1.0 + rhs.norm())) return std::nullopt;
  Vector out = fixed;
  for (Index r = 0; r < nf; ++r) out(free[r]) = z(r);
  return out;
}

// Largest t range keeping x + t p inside the box, over free coordinates.
std::pair<double, double> box_ratio(const Vector& x, const Vector& p) {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < x.size(); ++i) {
    if (p(i) > 0.0) {
      hi = std::min(hi, (1.0 - x(i)) / p(i));
      lo = std::max(lo, -x(i) / p(i));
    } else if (p(i) < 0.0) {
      hi = std::min(hi, -x(i) / p(i));
      lo = std::max(lo, (1.0 - x(i)) / p(i));
    }
  }
  return {std::min(lo, 0.0), std::max(hi, 0.0)};
}

// Exact maximization of the quadratic objective along x + t p, t in [lo, hi].
double line_maximize(const ConfidenceQp& qp, const Vector& x, const Vector& p, double lo, double hi,
                     double* gain) {
  const double slope = qp.gradient(x).dot(p);
  const double curv = 2.0 * qp.coef * qp.u.dot(p) * qp.v.dot(p);  // p' Theta p
  auto phi = [&](double t) { return t * slope - 0.5 * t * t * curv; };
  double best_t = 0.0;
  double best = 0.0;
  for (double t : {lo, hi}) {
    if (std::isfinite(t) && phi(t) > best) {
      best = phi(t);
      best_t = t;
    }
  }
  if (curv > 0.0) {
    const double t = std::clamp(slope / curv, lo, hi);
    if (phi(t) > best) {
      best = phi(t);
      best_t = t;
    }
  }
  *gain = best;
  return best_t;
}

void snap(Vector& x, std::vector<int>& status, double eps = 1e-12) {
  for (Index i = 0; i < x.size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (x(i) <= eps) {
      x(i) = 0.0;
      status[k] = kLower;
    } else if (x(i) >= 1.0 - eps) {
      x(i) = 1.0;
      status[k] = kUpper;
    }
  }
}

// Index of the bound coordinate whose multiplier has the wrong sign, if any.
std::optional<std::size_t> most_violated(const ConfidenceQp& qp, const Vector& g, const std::vector<int>& status) {
  const std::size_t A = qp.n_actions;
  const double tol = 1e-10 * (1.0 + g.lpNorm<Eigen::Infinity>());
  double worst = tol;
  std::optional<std::size_t> arg;
  for (std::size_t b = 0; b < qp.n_blocks(); ++b) {
    double dd = 0.0;
    double dg = 0.0;
    bool has_free = false;
    for (std::size_t a = 0; a < A; ++a) {
      const std::size_t i = b * A + a;
      if (status[i] != kFree) continue;
      has_free = true;
      dd += qp.diff(idx(i)) * qp.diff(idx(i));
      dg += qp.diff(idx(i)) * g(idx(i));
    }
    auto violation = [&](std::size_t i, double nu) {
      const double r = g(idx(i)) + nu * qp.diff(idx(i));
      return status[i] == kLower ? std::max(0.0, r) : std::max(0.0, -r);
    };
    double nu = 0.0;
    if (has_free) {
      nu = dd > 0.0 ? -dg / dd : 0.0;
    } else {
      // Choose the block multiplier that minimizes the largest sign violation.
      std::vector<double> cands{0.0};
      for (std::size_t a = 0; a < A; ++a) {
        const double d = qp.diff(idx(b * A + a));
        if (d != 0.0) cands.push_back(-g(idx(b * A + a)) / d);
      }
      double best = std::numeric_limits<double>::infinity();
      for (double c : cands) {
        double v = 0.0;
        for (std::size_t a = 0; a < A; ++a) v = std::max(v, violation(b * A + a, c));
        if (v < best) {
          best = v;
          nu = c;
        }
      }
    }
    for (std::size_t a = 0; a < A; ++a) {
      const std::size_t i = b * A + a;
      if (status[i] == kFree) continue;
      const double v = violation(i, nu);
      if (v > worst) {
        worst = v;
        arg = i;
      }
    }
  }
  return arg;
}

Vector active_set_refine(const ConfidenceQp& qp, const Vector& start, std::size_t* iterations) {
  const Matrix theta = qp.theta();
  const Matrix m_full = qp.equality();
  Vector x = project_feasible(qp, start);
  std::vector<int> status(qp.dim(), kFree);
  snap(x, status);
  const std::size_t max_iter = 6 * qp.dim() + 20;
  std::size_t it = 0;
  std::size_t releases = 0;
  for (; it < max_iter; ++it) {
    const double f = qp.objective(x);
    const double tiny = 1e-15 * (1.0 + std::abs(f));
    bool moved = false;
    std::vector<Vector> directions;
    if (auto target = face_stationary_point(qp, x, status, theta, m_full)) directions.push_back(*target - x);
    directions.push_back(face_gradient(qp, qp.gradient(x), status));
    for (const Vector& p : directions) {
      if (p.lpNorm<Eigen::Infinity>() <= 1e-15) continue;
      const auto [lo, hi] = box_ratio(x, p);
      double gain = 0.0;
      const double t = line_maximize(qp, x, p, lo, hi, &gain);
      if (gain <= tiny) continue;
      Vector y = x + t * p;
      if (qp.objective(y) <= f) continue;
      x = std::move(y);
      snap(x, status);
      moved = true;
      break;
    }
    if (moved) continue;
    const auto release = most_violated(qp, qp.gradient(x), status);
    if (!release || releases > qp.dim() * 2) break;
    status[*release] = kFree;
    ++releases;
  }
  *iterations += it;
  return project_feasible(qp, x);
}

// ---------------------------------------------------------------- exhaustive enumeration

Vector enumerate_faces(const ConfidenceQp& qp, std::size_t* faces) {
  const std::size_t n = qp.dim();
  const Matrix theta = qp.theta();
  const Matrix m_full = qp.equality();
  Candidate best;
  best.offer(Vector::Zero(idx(n)), 0.0);
  std::vector<int> status(n, kFree);
  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) total *= 3;
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    Vector x(idx(n));
    for (std::size_t i = 0; i < n; ++i) {
      status[i] = static_cast<int>(c % 3) - 1;
      c /= 3;
      x(idx(i)) = status[i] == kUpper ? 1.0 : 0.0;
    }
    const auto point = face_stationary_point(qp, x, status, theta, m_full);
    if (!point) continue;
    if (point->minCoeff() < -1e-10 || point->maxCoeff() > 1.0 + 1e-10) continue;
    const Vector y = project_feasible(qp, *point);
    if (!qp.feasible(y)) continue;
    best.offer(y, qp.objective(y));
  }
  *faces = total;
  return best.x;
}

// ---------------------------------------------------------------- brute force

// Per block: a pivot coordinate is solved from the equality; the others are grid parameters.
struct Parametrization {
  std::vector<std::size_t> param_index;  // global coordinate per parameter
  std::vector<int> pivot;                // per block, local pivot or -1
};

Parametrization parametrize(const ConfidenceQp& qp) {
  Parametrization p;
  const std::size_t A = qp.n_actions;
  for (std::size_t b = 0; b < qp.n_blocks(); ++b) {
    int piv = -1;
    double best = 0.0;
    for (std::size_t a = 0; a < A; ++a) {
      const double d = std::abs(qp.diff(idx(b * A + a)));
      if (d > best) {
        best = d;
        piv = static_cast<int>(a);
      }
    }
    p.pivot.push_back(piv);
    for (std::size_t a = 0; a < A; ++a) {
      if (static_cast<int>(a) != piv) p.param_index.push_back(b * A + a);
    }
  }
  return p;
}

// Fills pivots; false when a pivot leaves [0, 1].
bool complete(const ConfidenceQp& qp, const Parametrization& par, Vector& x) {
  const std::size_t A = qp.n_actions;
  for (std::size_t b = 0; b < qp.n_blocks(); ++b) {
    const int piv = par.pivot[b];
    if (piv < 0) continue;
    const std::size_t pi = b * A + static_cast<std::size_t>(piv);
    double acc = 0.0;
    for (std::size_t a = 0; a < A; ++a) {
      if (b * A + a != pi) acc += qp.diff(idx(b * A + a)) * x(idx(b * A + a));
    }
    const double val = -acc / qp.diff(idx(pi));
    if (val < -1e-12 || val > 1.0 + 1e-12) return false;
    x(idx(pi)) = std::clamp(val, 0.0, 1.0);
  }
  return true;
}

Vector brute_force(const ConfidenceQp& qp, const QpOptions& opt, std::size_t* evals) {
  const Parametrization par = parametrize(qp);
  const std::size_t k = par.param_index.size();
  const std::size_t n = qp.dim();
  Candidate best;
  best.offer(Vector::Zero(idx(n)), 0.0);
  if (k == 0) return best.x;

  std::size_t per_dim = static_cast<std::size_t>(std::llround(1.0 / opt.grid_step)) + 1;
  while (per_dim > 3 && std::pow(static_cast<double>(per_dim), static_cast<double>(k)) >
                            static_cast<double>(opt.grid_budget)) {
    per_dim = static_cast<std::size_t>(std::pow(static_cast<double>(opt.grid_budget), 1.0 / static_cast<double>(k)));
  }
  per_dim = std::max<std::size_t>(per_dim, 3);
  const double step = 1.0 / static_cast<double>(per_dim - 1);

  // Keep a handful of the best coarse points as refinement seeds.
  const std::size_t n_seeds = k <= 2 ? 4 : 8;
  std::multimap<double, Vector> seeds;
  std::vector<std::size_t> counter(k, 0);
  Vector x = Vector::Zero(idx(n));
  while (true) {
    for (std::size_t j = 0; j < k; ++j) x(idx(par.param_index[j])) = static_cast<double>(counter[j]) * step;
    ++*evals;
    if (complete(qp, par, x)) {
      const double f = qp.objective(x);
      if (seeds.size() < n_seeds || f > seeds.begin()->first) {
        seeds.emplace(f, x);
        if (seeds.size() > n_seeds) seeds.erase(seeds.begin());
      }
    }
    std::size_t j = 0;
    while (j < k && ++counter[j] == per_dim) counter[j++] = 0;
    if (j == k) break;
  }

  const std::vector<double> offsets{-1.0, -0.5, 0.0, 0.5, 1.0};
  std::size_t local_points = 1;
  for (std::size_t j = 0; j < k; ++j) local_points *= offsets.size();
  for (const auto& [f0, seed] : seeds) {
    best.offer(seed, f0);
    Vector center = seed;
    double fc = f0;
    for (double radius = step; radius > opt.refine_to; radius *= 0.5) {
      Vector next = center;
      double fn = fc;
      for (std::size_t code = 0; code < local_points; ++code) {
        std::size_t c = code;
        Vector y = center;
        for (std::size_t j = 0; j < k; ++j) {
          const std::size_t gi = par.param_index[j];
          y(idx(gi)) = std::clamp(center(idx(gi)) + offsets[c % offsets.size()] * radius, 0.0, 1.0);
          c /= offsets.size();
        }
        ++*evals;
        if (!complete(qp, par, y)) continue;
        const double fy = qp.objective(y);
        if (fy > fn) {
          fn = fy;
          next = y;
        }
      }
      center = next;
      fc = fn;
    }
    best.offer(center, fc);
  }
  return best.x;
}

// ---------------------------------------------------------------- closed form

Vector closed_form_clip(const ConfidenceQp& qp, double ridge) {
  const Index n = idx(qp.dim());
  const Matrix h = qp.theta() + ridge * Matrix::Identity(n, n);
  const Eigen::FullPivLU<Matrix> lu(h);
  if (!lu.isInvertible()) {
    throw NumericalError("Theta + ridge*I is singular; closed_form_clip needs qp_ridge > 0");
  }
  // Equality columns, one per block with rho != beta.
  const Matrix m_rows = qp.equality();
  std::vector<Index> keep;
  for (Index j = 0; j < m_rows.rows(); ++j) {
    if (m_rows.row(j).squaredNorm() > 0.0) keep.push_back(j);
  }
  Matrix m(n, static_cast<Index>(keep.size()));
  for (Index c = 0; c < m.cols(); ++c) m.col(c) = m_rows.row(keep[static_cast<std::size_t>(c)]).transpose();
  const Vector hl = lu.solve(qp.linear);
  Vector raw = hl;
  if (m.cols() > 0) {
    const Matrix hm = lu.solve(m);
    const Matrix schur = m.transpose() * hm;
    const Vector nu = -schur.completeOrthogonalDecomposition().solve(m.transpose() * hl);
    raw = hl + hm * nu;
  }
  return clip01(raw);
}

}  // namespace

// ---------------------------------------------------------------- ConfidenceQp

Matrix ConfidenceQp::theta() const { return coef * (u * v.transpose() + v * u.transpose()); }

Matrix ConfidenceQp::equality() const {
  Matrix m = Matrix::Zero(idx(n_blocks()), idx(dim()));
  for (std::size_t b = 0; b < n_blocks(); ++b) {
    for (std::size_t a = 0; a < n_actions; ++a) m(idx(b), idx(b * n_actions + a)) = diff(idx(b * n_actions + a));
  }
  return m;
}

double ConfidenceQp::min_theta_eigenvalue() const {
  if (dim() == 0) return 0.0;
  const Eigen::SelfAdjointEigenSolver<Matrix> es(theta(), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double ConfidenceQp::objective(const Vector& x) const {
  return linear.dot(x) - coef * u.dot(x) * v.dot(x);
}

Vector ConfidenceQp::gradient(const Vector& x) const {
  return linear - coef * (u * v.dot(x) + v * u.dot(x));
}

double ConfidenceQp::max_equality_residual(const Vector& x) const {
  double worst = 0.0;
  for (std::size_t b = 0; b < n_blocks(); ++b) {
    const auto off = idx(b * n_actions);
    const auto len = idx(n_actions);
    worst = std::max(worst, std::abs(diff.segment(off, len).dot(x.segment(off, len))));
  }
  return worst;
}

double ConfidenceQp::max_box_violation(const Vector& x) const {
  if (x.size() == 0) return 0.0;
  return std::max({0.0, -x.minCoeff(), x.maxCoeff() - 1.0});
}

bool ConfidenceQp::feasible(const Vector& x, double tol) const {
  return x.size() == linear.size() && x.allFinite() && max_equality_residual(x) <= tol &&
         max_box_violation(x) <= tol;
}

SaaTerms saa_terms(const ConfidenceQp& qp, const Vector& x) {
  if (x.size() != qp.linear.size()) throw InvalidArgument("confidence vector has wrong length");
  const double g = qp.gamma;
  SaaTerms t;
  for (std::size_t b = 0; b < qp.n_blocks(); ++b) {
    const double w = qp.state_weight[b];
    for (std::size_t a = 0; a < qp.n_actions; ++a) {
      const auto i = idx(b * qp.n_actions + a);
      t.lp += w * x(i) * qp.diff(i) * qp.adv(i);
      t.lpp += w * x(i) * std::abs(qp.diff(i));
      t.lppp += w * x(i) * std::abs(qp.diff(i)) * qp.abs_adv(i);
    }
  }
  t.lp /= (1.0 - g);
  t.lpp /= (1.0 - g);
  t.lppp *= g / (1.0 - g);
  t.l_bar = t.lp - t.lpp * t.lppp;
  return t;
}

ConfidenceQp make_confidence_qp(const std::vector<std::size_t>& states, const std::vector<double>& counts,
                                const Table& beta_rows, const Table& rho_rows, const Table& adv_rows,
                                double gamma) {
  const std::size_t m = states.size();
  if (m == 0) throw InvalidArgument("confidence QP needs at least one batch state");
  if (counts.size() != m || static_cast<std::size_t>(beta_rows.rows()) != m ||
      rho_rows.rows() != beta_rows.rows() || adv_rows.rows() != beta_rows.rows() ||
      rho_rows.cols() != beta_rows.cols() || adv_rows.cols() != beta_rows.cols()) {
    throw InvalidArgument("confidence QP rows have inconsistent shapes");
  }
  if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidArgument("gamma must lie in [0, 1)");
  const std::size_t A = static_cast<std::size_t>(beta_rows.cols());
  double total = 0.0;
  for (double c : counts) {
    if (!(c > 0.0)) throw InvalidArgument("state counts must be positive");
    total += c;
  }
  ConfidenceQp qp;
  qp.states = states;
  qp.n_actions = A;
  qp.gamma = gamma;
  qp.coef = gamma / (static_cast<double>(m) * (1.0 - gamma));
  const Index n = idx(m * A);
  qp.diff.resize(n);
  qp.adv.resize(n);
  qp.abs_adv.resize(n);
  qp.linear.resize(n);
  qp.v.resize(n);
  for (std::size_t b = 0; b < m; ++b) {
    const double w = counts[b] / total;
    const double omega = static_cast<double>(m) * w;
    qp.state_weight.push_back(w);
    for (std::size_t a = 0; a < A; ++a) {
      const auto i = idx(b * A + a);
      const double beta = beta_rows(idx(b), idx(a));
      const double d = rho_rows(idx(b), idx(a)) - beta;
      if (beta == 0.0 && d != 0.0) {
        throw InvalidArgument("candidate puts mass where the behavior policy has none (state " +
                              std::to_string(states[b]) + ", action " + std::to_string(a) + ")");
      }
      qp.diff(i) = d;
      qp.adv(i) = adv_rows(idx(b), idx(a));
      qp.abs_adv(i) = std::abs(qp.adv(i));
      qp.linear(i) = omega * d * adv_rows(idx(b), idx(a));
      qp.v(i) = omega * std::abs(d);
    }
  }
  qp.u = qp.abs_adv.cwiseProduct(qp.v);
  return qp;
}

ConfidenceQp build_confidence_qp(const Batch& batch, const TabularPolicy& beta, const TabularPolicy& rho,
                                 const AdvantageTable& adv, double gamma) {
  if (batch.empty()) throw InvalidArgument("confidence QP needs a nonempty batch");
  const std::vector<std::size_t> states = batch_states(batch);
  std::map<std::size_t, double> count;
  for (const Transition& t : batch.transitions) count[t.s] += 1.0;
  const Index A = idx(beta.n_actions());
  Table b(idx(states.size()), A), r(idx(states.size()), A), a(idx(states.size()), A);
  std::vector<double> counts;
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i] >= beta.n_states()) throw InvalidArgument("batch state out of range");
    b.row(idx(i)) = beta.probs().row(idx(states[i]));
    r.row(idx(i)) = rho.probs().row(idx(states[i]));
    a.row(idx(i)) = adv.row(idx(states[i]));
    counts.push_back(count[states[i]]);
  }
  return make_confidence_qp(states, counts, b, r, a, gamma);
}

std::string to_string(QpMethod m) {
  switch (m) {
    case QpMethod::closed_form_clip: return "closed_form_clip";
    case QpMethod::projected_gradient: return "projected_gradient";
    case QpMethod::active_set: return "active_set";
    case QpMethod::brute_force: return "brute_force";
  }
  return "unknown";
}

QpMethod qp_method_from_string(const std::string& s) {
  if (s == "closed_form_clip") return QpMethod::closed_form_clip;
  if (s == "projected_gradient") return QpMethod::projected_gradient;
  if (s == "active_set") return QpMethod::active_set;
  if (s == "brute_force") return QpMethod::brute_force;
  throw InvalidArgument("unknown qp_method '" + s + "'");
}

QpSolution solve_confidence(const ConfidenceQp& qp, const QpOptions& opt) {
  const Index n = idx(qp.dim());
  QpSolution sol;
  sol.method = opt.method;
  if (opt.warm_start && opt.warm_start->size() != n) throw InvalidArgument("warm start has wrong length");

  const bool degenerate = qp.linear.lpNorm<Eigen::Infinity>() == 0.0 && lipschitz(qp) == 0.0;
  if (n == 0 || degenerate) {
    sol.lambda = Vector::Zero(n);
    return sol;
  }

  Candidate best;
  auto starts = [&]() {
    std::vector<Vector> s;
    if (opt.warm_start) s.push_back(*opt.warm_start);
    s.push_back(Vector::Zero(n));
    s.push_back(Vector::Ones(n));
    Rng rng(opt.seed);
    for (std::size_t r = 0; r < opt.random_starts; ++r) {
      Vector y(n);
      for (Index i = 0; i < n; ++i) y(i) = rng.uniform();
      s.push_back(y);
    }
    return s;
  };

  switch (opt.method) {
    case QpMethod::closed_form_clip: {
      const Vector x = project_feasible(qp, closed_form_clip(qp, opt.ridge));
      best.offer(x, qp.objective(x));
      break;
    }
    case QpMethod::projected_gradient: {
      for (const Vector& s : starts()) {
        PgResult r = projected_gradient_run(qp, s, opt.max_iterations);
        sol.iterations += r.iterations;
        best.offer(r.x, qp.objective(r.x));
      }
      break;
    }
    case QpMethod::active_set: {
      if (qp.dim() <= opt.enumeration_limit) {
        sol.exhaustive = true;
        const Vector x = enumerate_faces(qp, &sol.iterations);
        best.offer(x, qp.objective(x));
      } else {
        for (const Vector& s : starts()) {
          PgResult r = projected_gradient_run(qp, s, opt.max_iterations);
          sol.iterations += r.iterations;
          const Vector x = active_set_refine(qp, r.x, &sol.iterations);
          best.offer(r.x, qp.objective(r.x));
          best.offer(x, qp.objective(x));
        }
      }
      break;
    }
    case QpMethod::brute_force: {
      sol.exhaustive = true;
      const Vector x = brute_force(qp, opt, &sol.iterations);
      best.offer(x, qp.objective(x));
      break;
    }
  }

  if (opt.warm_start && opt.method != QpMethod::closed_form_clip) {
    const Vector w = project_feasible(qp, *opt.warm_start);
    const double fw = qp.objective(w);
    if (fw > best.f) {
      best.x = w;
      best.f = fw;
      sol.warm_start_kept = true;
    }
  }
  sol.lambda = best.x;
  sol.objective = best.f;
  return sol;
}

// ---------------------------------------------------------------- projection

Vector project_hyperplane_box(const Vector& y, const Vector& d) {
  if (y.size() != d.size()) throw InvalidArgument("projection: size mismatch");
  if (!y.allFinite()) throw InvalidArgument("projection: non-finite label");
  if (d.lpNorm<Eigen::Infinity>() == 0.0) return clip01(y);
  // g(mu) = d' clip(y + mu d) is nondecreasing and piecewise linear; find its root exactly.
  auto g = [&](double mu) { return d.dot(clip01(y + mu * d)); };
  std::vector<double> bp;
  for (Index i = 0; i < d.size(); ++i) {
    if (d(i) == 0.0) continue;
    bp.push_back(-y(i) / d(i));
    bp.push_back((1.0 - y(i)) / d(i));
  }
  std::sort(bp.begin(), bp.end());
  bp.erase(std::unique(bp.begin(), bp.end()), bp.end());
  double mu = 0.0;
  if (g(0.0) != 0.0) {
    std::size_t j = 0;
    double gj = g(bp[0]);
    double gprev = gj;
    while (gj < 0.0 && j + 1 < bp.size()) {
      gprev = gj;
      gj = g(bp[++j]);
    }
    if (j == 0 || gj < 0.0 || gj == gprev) {
      mu = bp[j];
    } else {
      mu = bp[j - 1] + (0.0 - gprev) * (bp[j] - bp[j - 1]) / (gj - gprev);
    }
  }
  Vector x = clip01(y + mu * d);
  // Remove rounding residue along the free coordinates.
  for (int pass = 0; pass < 2; ++pass) {
    const double r = d.dot(x);
    if (r == 0.0) break;
    double dd = 0.0;
    for (Index i = 0; i < x.size(); ++i) {
      if (x(i) > 0.0 && x(i) < 1.0) dd += d(i) * d(i);
    }
    if (dd == 0.0) break;
    for (Index i = 0; i < x.size(); ++i) {
      if (x(i) > 0.0 && x(i) < 1.0) x(i) = std::clamp(x(i) - r * d(i) / dd, 0.0, 1.0);
    }
  }
  return x;
}

Projection project_confidence(const Vector& label, const Eigen::Ref<const Eigen::RowVectorXd>& beta_row,
                              const Eigen::Ref<const Eigen::RowVectorXd>& rho_row) {
  if (label.size() != beta_row.size() || rho_row.size() != beta_row.size()) {
    throw InvalidArgument("projection: label and policy rows differ in length");
  }
  const Vector d = (rho_row - beta_row).transpose();
  Projection out;
  out.exact = project_hyperplane_box(label, d);
  const double dd = d.squaredNorm();
  out.heuristic = dd > 0.0 ? clip01(label + d * (-d.dot(label) / dd)) : clip01(label);
  out.heuristic_residual = std::abs(d.dot(out.heuristic));
  out.heuristic_differs = (out.exact - out.heuristic).lpNorm<Eigen::Infinity>() > 1e-12;
  return out;
}

Vector project_feasible(const ConfidenceQp& qp, const Vector& x) {
  if (x.size() != qp.linear.size()) throw InvalidArgument("confidence vector has wrong length");
  Vector out(x.size());
  const auto A = idx(qp.n_actions);
  for (std::size_t b = 0; b < qp.n_blocks(); ++b) {
    const Index off = idx(b) * A;
    out.segment(off, A) = project_hyperplane_box(x.segment(off, A), qp.diff.segment(off, A));
  }
  return out;
}

}  // namespace brpo
