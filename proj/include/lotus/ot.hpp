#pragma once

#include <cstdint>
#include <variant>

#include "lotus/dataset.hpp"

namespace lotus {

// Non-negative weights summing to 1 (tolerance 1e-12).
struct ProbabilityVector {
  Vector w;

  static ProbabilityVector uniform(Eigen::Index n);
  void validate() const;
  Eigen::Index size() const { return w.size(); }
};

// Dense transport plan with prescribed marginals.
struct Coupling {
  Matrix plan;
  double marginal_error = 0.0;
};

// Factored plan P = Q diag(1/g) R^T with Q 1 = a, R 1 = b,
// Q^T 1 = R^T 1 = g, g > 0.
struct LowRankCoupling {
  Matrix q;  // n x r
  Matrix r;  // m x r
  Vector g;  // r
  double marginal_error = 0.0;

  Matrix dense() const;
};

struct SinkhornResult {
  Coupling coupling;
  double cost = 0.0;               // <C, P>
  double entropic_objective = 0.0; // <C, P> + eps * sum P (log P - 1)
  int iterations = 0;
  bool converged = false;
};

// Log-domain Sinkhorn. Stops when the max marginal violation drops
// below tol.
SinkhornResult sinkhorn(const Matrix& cost, const ProbabilityVector& a,
                        const ProbabilityVector& b, double eps,
                        int max_iter = 2000, double tol = 1e-9);

// Quadratic GW energy sum_{iji'j'} (A_ii' - B_jj')^2 P_ij P_i'j',
// evaluated through the factored expansion in O(n^2 m + n m^2).
double gw_energy(const Matrix& a_cost, const Matrix& b_cost, const Matrix& plan);

// Symmetric intra-dataset cost, either dense or held in factored
// squared-Euclidean form (U V^T, never materialized).
class CostOp {
 public:
  static CostOp dense(Matrix a);
  static CostOp squared_euclidean(Matrix points);

  Eigen::Index size() const { return size_; }
  bool is_factored() const { return factored_; }

  Matrix apply(const Matrix& m) const;     // A * m
  double quad_sq(const Vector& w) const;   // w^T (A.^2) w
  const Matrix& dense_matrix() const;

 private:
  CostOp() = default;
  bool factored_ = false;
  Eigen::Index size_ = 0;
  Matrix a_;       // dense path
  Matrix points_;  // factored path
  Vector sqnorm_;  // row squared norms of points_
};

struct GwOptions {
  double eps = 1e-2;
  int outer_iter = 200;
  double tol = 1e-6;
  std::uint64_t seed = 0;
};

struct GwLrOptions {
  int rank = 10;
  double gamma = 10.0;
  int outer_iter = 200;
  double tol = 1e-6;
  std::uint64_t seed = 0;
};

struct GwResult {
  double value = 0.0;
  std::variant<Coupling, LowRankCoupling> coupling;
  int iterations = 0;
  bool converged = false;
};

// Entropy-regularized GW by mirror descent: linearize the energy at the
// current plan and solve the entropic OT subproblem with Sinkhorn. The
// reported value is the raw energy at the final plan (no entropy term).
GwResult entropic_gw(const Matrix& a_cost, const Matrix& b_cost,
                     const ProbabilityVector& a, const ProbabilityVector& b,
                     const GwOptions& opts);

// GW restricted to rank-r couplings: alternating mirror-descent updates of
// (Q, R, g) with KL marginal projections. Warm-started from a seeded
// perturbation of the product coupling.
GwResult gw_lowrank(const CostOp& a_cost, const CostOp& b_cost,
                    const ProbabilityVector& a, const ProbabilityVector& b,
                    const GwLrOptions& opts);

inline GwResult gw_lowrank_points(const Matrix& x, const Matrix& y,
                                  const ProbabilityVector& a,
                                  const ProbabilityVector& b,
                                  const GwLrOptions& opts) {
  return gw_lowrank(CostOp::squared_euclidean(x), CostOp::squared_euclidean(y), a, b, opts);
}

// Energy of a factored coupling, computed through the factors.
double gw_energy(const CostOp& a_cost, const CostOp& b_cost, const LowRankCoupling& coupling);

}  // namespace lotus
