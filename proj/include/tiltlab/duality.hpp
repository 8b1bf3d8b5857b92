#pragma once

#include <cstdint>

#include "tiltlab/criticality.hpp"

namespace tiltlab {

struct ConjugatePair {
  FunctionExpr primal;
  FunctionExpr conjugate;
};

/// Exact conjugate for the convex subclass: polyhedral functions (norms l1/linf,
/// affine maxima, polyhedral indicators and their sums, tilts, positive scalings
/// and invertible affine precompositions), convex quadratics and squared norms.
/// Throws NonConvex on non-convex input and Unsupported when no rule applies.
FunctionExpr conjugate(const FunctionExpr& f);
ConjugatePair conjugate_pair(const FunctionExpr& f);

/// f(x) + f*(u) - <u, x>; nonnegative, zero iff u in subdiff f(x).
double fenchel_young_gap(const ConjugatePair& p, const Vec& x, const Vec& u);

/// inf_x f(x) + h(Ax + y) - <v, x>  and  sup_u -h*(u) - f*(v - A'u) + <y, u>
struct PrimalDualProblem {
  FunctionExpr f;
  FunctionExpr h;
  Mat a;
  Vec v;
  Vec y;
};

struct DualityCertificate {
  Vec x;
  Vec u;
  ExtReal primal_value;
  ExtReal dual_value;
  double gap = 0.0;
  struct Feasibility {
    /// y in int(dom h - A dom f)
    bool y_interior = false;
    /// v in int(dom f* + A' dom h*)
    bool v_interior = false;
  } feasibility;
};

ExtReal primal_objective(const PrimalDualProblem& p, const Vec& x);
ExtReal dual_objective(const PrimalDualProblem& p, const Vec& u);

/// Interiority flags decided by LP with slack threshold 1e-9.
DualityCertificate::Feasibility feasibility_flags(const PrimalDualProblem& p);

/// Optimal pair from the generalized-equation solver on the optimality system
/// v - A'u in subdiff f(x), u in subdiff h(Ax + y). Throws Infeasible or
/// Unbounded when a problem has no optimal solution, NotConverged otherwise.
DualityCertificate solve_primal_dual(const PrimalDualProblem& p);
inline DualityCertificate solve_primal_dual(const FunctionExpr& f, const FunctionExpr& h, const Mat& a,
                                            const Vec& v, const Vec& y) {
  return solve_primal_dual(PrimalDualProblem{f, h, a, v, y});
}

/// subdiff f* = (subdiff f)^{-1}: on sampled pairs with u in subdiff f(x),
/// checks x in subdiff f*(u) with the polytope oracle.
bool inverse_subdiff_check(const FunctionExpr& f, int pairs = 100, std::uint64_t seed = 0);

struct SmoothDependence {
  bool smooth = false;
  /// Largest joint difference quotient of (x, u) in (v, y).
  double lipschitz_estimate = 0.0;
  std::string diagnostic;
};

/// Perturbs (v, y) along coordinate directions on the scales of
/// weak_critical_value_probe (times radius / 1e-2); requires unique solutions,
/// quotient ratios <= 2 between scales and matching one-sided quotients at the
/// finest scale. Throws Qualification when the base solution is not unique.
SmoothDependence smooth_dependence_probe(const PrimalDualProblem& p, double radius = 1e-2);

}  // namespace tiltlab
