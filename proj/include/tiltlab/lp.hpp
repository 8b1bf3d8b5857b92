#pragma once

#include "tiltlab/core.hpp"

namespace tiltlab {

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  Vec x;
  double objective = 0.0;
};

/// Linear program over free variables:
///   minimize c'x  subject to  A_ub x <= b_ub,  A_eq x = b_eq.
/// Dense two-phase tableau simplex with Bland's rule; sized for desk-scale problems.
struct LinearProgram {
  Vec c;
  Mat a_ub;
  Vec b_ub;
  Mat a_eq;
  Vec b_eq;

  explicit LinearProgram(int n) : c(Vec::Zero(n)), a_ub(0, n), b_ub(0), a_eq(0, n), b_eq(0) {}
  int dim() const { return static_cast<int>(c.size()); }
};

LpResult solve_lp(const LinearProgram& lp, double tol = 1e-10);

/// Some feasible point of {A x <= b, E x = e}, if any.
std::optional<Vec> feasible_point(const Mat& a, const Vec& b, const Mat& e, const Vec& f,
                                  double tol = 1e-10);

/// Euclidean projection of p onto {A x <= b, E x = e} (primal active-set QP).
/// Throws Infeasible when the set is empty.
Vec project_polyhedral(const Vec& p, const Mat& a, const Vec& b, const Mat& e, const Vec& f,
                       double tol = 1e-11);

}  // namespace tiltlab
