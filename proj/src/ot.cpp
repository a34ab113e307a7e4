#include "lotus/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lotus/errors.hpp"
#include "lotus/rng.hpp"

namespace lotus {

namespace {

constexpr double kGFloor = 1e-12;

void require_cost_shape(const Matrix& c, const char* name) {
  if (c.rows() != c.cols()) throw DimensionError(std::string(name) + " cost must be square");
  if (!c.allFinite()) throw DimensionError(std::string(name) + " cost has non-finite entries");
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    if (std::abs(c(i, i)) > 1e-12) {
      throw DimensionError(std::string(name) + " cost must have zero diagonal");
    }
  }
  if (!c.isApprox(c.transpose(), 1e-9)) {
    throw DimensionError(std::string(name) + " cost must be symmetric");
  }
}

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

// KL projection of positive factors onto the low-rank transport polytope
// {Q 1 = a, R 1 = b, Q^T 1 = R^T 1 = g}: alternate row rescaling with the
// joint column/g step (g_k <- geometric mean of the three column masses).
void project_lr(Matrix& q, Matrix& r, Vector& g, const Vector& a, const Vector& b,
                double tol, int max_sweeps) {
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    q.array().colwise() *= (a.array() / q.rowwise().sum().array());
    r.array().colwise() *= (b.array() / r.rowwise().sum().array());
    const Vector qc = q.colwise().sum();
    const Vector rc = r.colwise().sum();
    const Vector g_new = (qc.array() * rc.array() * g.array()).pow(1.0 / 3.0);
    q.array().rowwise() *= (g_new.array() / qc.array()).transpose();
    r.array().rowwise() *= (g_new.array() / rc.array()).transpose();
    g = g_new;
    const double viol = std::max((q.rowwise().sum() - a).cwiseAbs().maxCoeff(),
                                 (r.rowwise().sum() - b).cwiseAbs().maxCoeff());
    if (!std::isfinite(viol)) throw SolverError("low-rank projection diverged");
    if (viol < tol) break;
  }
  if (g.minCoeff() < kGFloor) {
    throw RankCollapseError(
        "low-rank coupling collapsed (g entry below 1e-12); try a smaller rank or larger gamma");
  }
}

double lr_marginal_error(const Matrix& q, const Matrix& r, const Vector& g,
                         const Vector& a, const Vector& b) {
  double e = std::max((q.rowwise().sum() - a).cwiseAbs().maxCoeff(),
                      (r.rowwise().sum() - b).cwiseAbs().maxCoeff());
  e = std::max(e, (q.colwise().sum().transpose() - g).cwiseAbs().maxCoeff());
  e = std::max(e, (r.colwise().sum().transpose() - g).cwiseAbs().maxCoeff());
  return e;
}

}  // namespace

ProbabilityVector ProbabilityVector::uniform(Eigen::Index n) {
  ProbabilityVector p;
  p.w = Vector::Constant(n, 1.0 / static_cast<double>(n));
  return p;
}

void ProbabilityVector::validate() const {
  if (w.size() == 0) throw DimensionError("probability vector is empty");
  if ((w.array() < 0).any()) throw DimensionError("probability vector has negative entries");
  if (std::abs(w.sum() - 1.0) > 1e-12) {
    throw DimensionError("probability vector does not sum to 1");
  }
}

Matrix LowRankCoupling::dense() const {
  return q * g.cwiseInverse().asDiagonal() * r.transpose();
}

SinkhornResult sinkhorn(const Matrix& cost, const ProbabilityVector& a,
                        const ProbabilityVector& b, double eps, int max_iter,
                        double tol) {
  const Eigen::Index n = cost.rows();
  const Eigen::Index m = cost.cols();
  if (a.size() != n || b.size() != m) {
    throw DimensionError("sinkhorn: cost is " + std::to_string(n) + "x" + std::to_string(m) +
                         " but marginals have sizes " + std::to_string(a.size()) + ", " +
                         std::to_string(b.size()));
  }
  if (eps <= 0) throw ConfigError("sinkhorn: eps must be positive");
  a.validate();
  b.validate();

  const Vector log_a = a.w.array().log();
  const Vector log_b = b.w.array().log();
  Vector f = Vector::Zero(n);
  Vector g = Vector::Zero(m);

  auto plan_from_potentials = [&]() {
    Matrix p(n, m);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) {
        p(i, j) = std::exp((f[i] + g[j] - cost(i, j)) / eps);
      }
    }
    return p;
  };

  SinkhornResult out;
  double err = std::numeric_limits<double>::infinity();
  int it = 0;
  for (; it < max_iter; ++it) {
    // row step: after it, P 1 = a exactly; column step symmetric
    for (Eigen::Index i = 0; i < n; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < m; ++j) mx = std::max(mx, (g[j] - cost(i, j)) / eps);
      if (!std::isfinite(mx)) { f[i] = -std::numeric_limits<double>::infinity(); continue; }
      double s = 0;
      for (Eigen::Index j = 0; j < m; ++j) s += std::exp((g[j] - cost(i, j)) / eps - mx);
      f[i] = eps * (log_a[i] - mx - std::log(s));
    }
    for (Eigen::Index j = 0; j < m; ++j) {
      double mx = -std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < n; ++i) mx = std::max(mx, (f[i] - cost(i, j)) / eps);
      if (!std::isfinite(mx)) { g[j] = -std::numeric_limits<double>::infinity(); continue; }
      double s = 0;
      for (Eigen::Index i = 0; i < n; ++i) s += std::exp((f[i] - cost(i, j)) / eps - mx);
      g[j] = eps * (log_b[j] - mx - std::log(s));
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if (a.w[i] > 0 && !std::isfinite(f[i])) {
        throw SolverError("sinkhorn overflow at eps=" + std::to_string(eps));
      }
    }
    const Matrix p = plan_from_potentials();
    err = std::max((p.rowwise().sum() - a.w).cwiseAbs().maxCoeff(),
                   (p.colwise().sum().transpose() - b.w).cwiseAbs().maxCoeff());
    if (err < tol) {
      ++it;
      out.converged = true;
      break;
    }
  }

  out.coupling.plan = plan_from_potentials();
  if (!out.coupling.plan.allFinite()) {
    throw SolverError("sinkhorn produced a non-finite plan at eps=" + std::to_string(eps));
  }
  out.coupling.marginal_error = err;
  out.iterations = it;
  out.cost = out.coupling.plan.cwiseProduct(cost).sum();
  double ent = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const double v = out.coupling.plan(i, j);
      if (v > 0) ent += v * (std::log(v) - 1.0);
    }
  }
  out.entropic_objective = out.cost + eps * ent;
  return out;
}

double gw_energy(const Matrix& a_cost, const Matrix& b_cost, const Matrix& plan) {
  if (a_cost.rows() != a_cost.cols() || b_cost.rows() != b_cost.cols()) {
    throw DimensionError("gw_energy: cost matrices must be square");
  }
  if (plan.rows() != a_cost.rows() || plan.cols() != b_cost.rows()) {
    throw DimensionError("gw_energy: plan is " + std::to_string(plan.rows()) + "x" +
                         std::to_string(plan.cols()) + ", costs are " +
                         std::to_string(a_cost.rows()) + " and " + std::to_string(b_cost.rows()));
  }
  const Vector pa = plan.rowwise().sum();
  const Vector pb = plan.colwise().sum();
  const double quad_a = pa.dot(a_cost.cwiseProduct(a_cost) * pa);
  const double quad_b = pb.dot(b_cost.cwiseProduct(b_cost) * pb);
  const double cross = ((a_cost * plan) * b_cost).cwiseProduct(plan).sum();
  return std::max(0.0, quad_a + quad_b - 2.0 * cross);
}

CostOp CostOp::dense(Matrix a) {
  require_cost_shape(a, "dense");
  CostOp op;
  op.factored_ = false;
  op.size_ = a.rows();
  op.a_ = std::move(a);
  return op;
}

CostOp CostOp::squared_euclidean(Matrix points) {
  if (points.rows() < 1 || points.cols() < 1) {
    throw DimensionError("point cloud must be non-empty");
  }
  CostOp op;
  op.factored_ = true;
  op.size_ = points.rows();
  op.sqnorm_ = points.rowwise().squaredNorm();
  op.points_ = std::move(points);
  return op;
}

const Matrix& CostOp::dense_matrix() const {
  if (factored_) throw Error("cost operator is factored; dense matrix unavailable");
  return a_;
}

Matrix CostOp::apply(const Matrix& m) const {
  if (m.rows() != size_) throw DimensionError("cost operator: operand row mismatch");
  if (!factored_) return a_ * m;
  // A = z 1^T + 1 z^T - 2 X X^T applied without forming A
  const Eigen::RowVectorXd col_mass = m.colwise().sum();
  const Eigen::RowVectorXd z_mass = sqnorm_.transpose() * m;
  Matrix out = sqnorm_ * col_mass;
  out.rowwise() += z_mass;
  out.noalias() -= 2.0 * (points_ * (points_.transpose() * m));
  return out;
}

double CostOp::quad_sq(const Vector& w) const {
  if (w.size() != size_) throw DimensionError("cost operator: weight size mismatch");
  if (!factored_) return w.dot(a_.cwiseProduct(a_) * w);
  // w^T (A.^2) w for A_ii' = z_i + z_i' - 2 x_i.x_i', expanded so no n x n
  // matrix is formed: 2 s <w,z^2> + 2 <w,z>^2 - 8 <u,mu> + 4 ||X' diag(w) X||^2
  const double s = w.sum();
  const Vector z = sqnorm_;
  const double term1 = 2.0 * s * w.dot(z.cwiseProduct(z));
  const double wz = w.dot(z);
  const double term2 = 2.0 * wz * wz;
  const Vector mu = points_.transpose() * w;
  const Vector u = points_.transpose() * w.cwiseProduct(z);
  const double term3 = -8.0 * u.dot(mu);
  const Matrix s_w = points_.transpose() * w.asDiagonal() * points_;
  const double term4 = 4.0 * s_w.squaredNorm();
  return term1 + term2 + term3 + term4;
}

double gw_energy(const CostOp& a_cost, const CostOp& b_cost, const LowRankCoupling& c) {
  const Vector pa = c.q.rowwise().sum();
  const Vector pb = c.r.rowwise().sum();
  const Vector dinv = c.g.cwiseInverse();
  const Matrix m = c.q.transpose() * a_cost.apply(c.q);
  const Matrix n = c.r.transpose() * b_cost.apply(c.r);
  const double cross = (dinv.asDiagonal() * m * dinv.asDiagonal()).cwiseProduct(n).sum();
  return std::max(0.0, a_cost.quad_sq(pa) + b_cost.quad_sq(pb) - 2.0 * cross);
}

GwResult entropic_gw(const Matrix& a_cost, const Matrix& b_cost,
                     const ProbabilityVector& a, const ProbabilityVector& b,
                     const GwOptions& opts) {
  require_cost_shape(a_cost, "A");
  require_cost_shape(b_cost, "B");
  if (a.size() != a_cost.rows() || b.size() != b_cost.rows()) {
    throw DimensionError("entropic_gw: marginal sizes do not match cost matrices");
  }
  if (opts.eps <= 0) throw ConfigError("entropic_gw: eps must be positive");
  a.validate();
  b.validate();

  const Eigen::Index n = a.size();
  const Eigen::Index m = b.size();

  // product coupling with a seeded multiplicative perturbation; the exact
  // product plan is a stationary point on symmetric instances
  Rng rng(derive_seed(opts.seed, "entropic_gw"));
  Matrix plan(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      plan(i, j) = a.w[i] * b.w[j] * std::exp(1e-3 * rng.normal());
    }
  }
  for (int sweep = 0; sweep < 200; ++sweep) {
    plan.array().colwise() *= (a.w.array() / plan.rowwise().sum().array());
    plan.array().rowwise() *= (b.w.array() / plan.colwise().sum().array()).transpose();
    if ((plan.rowwise().sum() - a.w).cwiseAbs().maxCoeff() < 1e-14) break;
  }

  GwResult out;
  out.value = gw_energy(a_cost, b_cost, plan);
  Coupling best{plan, 0.0};
  double best_value = out.value;
  double prev = out.value;
  int it = 0;
  for (; it < opts.outer_iter; ++it) {
    const Matrix pseudo_cost = -2.0 * (a_cost * plan * b_cost);
    SinkhornResult sub;
    try {
      sub = sinkhorn(pseudo_cost, a, b, opts.eps, 4000, 1e-10);
    } catch (const SolverError& e) {
      throw SolverError("entropic_gw outer iteration " + std::to_string(it) + ": " + e.what());
    }
    plan = sub.coupling.plan;
    const double value = gw_energy(a_cost, b_cost, plan);
    if (value < best_value) {
      best_value = value;
      best = sub.coupling;
    }
    if (std::abs(value - prev) < opts.tol * std::max(1.0, prev)) {
      ++it;
      out.converged = true;
      break;
    }
    prev = value;
  }
  out.value = best_value;
  out.iterations = it;
  out.coupling = best;
  return out;
}

GwResult gw_lowrank(const CostOp& a_cost, const CostOp& b_cost,
                    const ProbabilityVector& a, const ProbabilityVector& b,
                    const GwLrOptions& opts) {
  const Eigen::Index n = a_cost.size();
  const Eigen::Index m = b_cost.size();
  if (a.size() != n || b.size() != m) {
    throw DimensionError("gw_lowrank: marginal sizes do not match cost operators");
  }
  a.validate();
  b.validate();
  const Eigen::Index r = opts.rank;
  if (r < 2 || r > std::min(n, m)) {
    throw ConfigError("gw_lowrank: rank must lie in [2, min(n,m)], got " + std::to_string(r));
  }
  if (opts.gamma <= 0) throw ConfigError("gw_lowrank: gamma must be positive");

  // rank-r rounding of the product coupling, perturbed to break symmetry
  Rng rng(derive_seed(opts.seed, "gw_lowrank"));
  Vector g(r);
  for (Eigen::Index k = 0; k < r; ++k) g[k] = std::exp(1e-1 * rng.normal());
  g /= g.sum();
  Matrix q(n, r), rr(m, r);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < r; ++k) q(i, k) = a.w[i] * g[k] * std::exp(1e-1 * rng.normal());
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index k = 0; k < r; ++k) rr(j, k) = b.w[j] * g[k] * std::exp(1e-1 * rng.normal());
  }
  project_lr(q, rr, g, a.w, b.w, 1e-11, 1000);

  const double const_terms = a_cost.quad_sq(a.w) + b_cost.quad_sq(b.w);
  auto energy_at = [&](const Matrix& tq, const Matrix& tr, const Vector& tg,
                       Matrix& m_out, Matrix& n_out) {
    const Vector dinv = tg.cwiseInverse();
    m_out = tq.transpose() * a_cost.apply(tq);
    n_out = tr.transpose() * b_cost.apply(tr);
    const double cross = (dinv.asDiagonal() * m_out * dinv.asDiagonal()).cwiseProduct(n_out).sum();
    return const_terms - 2.0 * cross;
  };

  GwResult out;
  Matrix mq, nr;
  double value = energy_at(q, rr, g, mq, nr);
  Matrix best_q = q, best_r = rr;
  Vector best_g = g;
  double best_value = value;
  double prev = value;
  int it = 0;
  for (; it < opts.outer_iter; ++it) {
    const Vector dinv = g.cwiseInverse();
    const Matrix scaled_n = dinv.asDiagonal() * nr * dinv.asDiagonal();
    const Matrix scaled_m = dinv.asDiagonal() * mq * dinv.asDiagonal();
    const Matrix grad_q = -4.0 * (a_cost.apply(q) * scaled_n);
    const Matrix grad_r = -4.0 * (b_cost.apply(rr) * scaled_m);
    const Vector grad_g =
        4.0 * (mq * dinv.asDiagonal() * nr).diagonal().cwiseProduct(dinv.cwiseProduct(dinv));

    const double scale = std::max({max_abs(grad_q), max_abs(grad_r),
                                   grad_g.cwiseAbs().maxCoeff(), 1e-12});
    const double step = opts.gamma / scale;
    q = q.cwiseProduct((-step * grad_q).array().exp().matrix());
    rr = rr.cwiseProduct((-step * grad_r).array().exp().matrix());
    g = g.cwiseProduct((-step * grad_g).array().exp().matrix());
    project_lr(q, rr, g, a.w, b.w, 1e-11, 1000);

    value = energy_at(q, rr, g, mq, nr);
    if (!std::isfinite(value)) throw SolverError("gw_lowrank: energy diverged");
    if (value < best_value) {
      best_value = value;
      best_q = q;
      best_r = rr;
      best_g = g;
    }
    if (std::abs(value - prev) < opts.tol * std::max(1.0, prev)) {
      ++it;
      out.converged = true;
      break;
    }
    prev = value;
  }

  LowRankCoupling c;
  c.q = std::move(best_q);
  c.r = std::move(best_r);
  c.g = std::move(best_g);
  c.marginal_error = lr_marginal_error(c.q, c.r, c.g, a.w, b.w);
  out.value = std::max(0.0, best_value);
  out.iterations = it;
  out.coupling = std::move(c);
  return out;
}

}  // namespace lotus
