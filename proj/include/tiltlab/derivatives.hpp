#pragma once

#include <variant>

#include "tiltlab/subdiff.hpp"

namespace tiltlab {

/// df(x)(u), exact for the class.
ExtReal subderivative(const FunctionExpr& f, const Vec& x, const Vec& u, double atol = kActiveTol);

/// d^2 f(x)(u | w). Throws DomainViolation when df(x)(u) is not finite.
ExtReal parabolic_subderivative(const FunctionExpr& f, const Vec& x, const Vec& u, const Vec& w,
                                double atol = kActiveTol);

/// inf over w of d^2 f(x)(u | w), by LPs on the piecewise-affine dependence on w.
/// -inf when unbounded below; +inf when df(x)(u) or every d^2 value is infinite.
double second_subderivative(const FunctionExpr& f, const Vec& x, const Vec& u, double atol = kActiveTol);

/// Step ladder shared by the numerical estimators.
inline constexpr double kLadder[] = {1e-2, 1e-3, 1e-4, 1e-5, 1e-6};

/// Difference-quotient estimate of df(x)(u): minimum over a small net of
/// perturbed directions at each step, then Richardson extrapolation across
/// the ladder.
ExtReal subderivative_numeric(const FunctionExpr& f, const Vec& x, const Vec& u);

/// Estimate of d^2 f(x)(u | w) along arcs x + t u + t^2/2 w'. Uses a
/// three-point combination that does not need df(x)(u).
ExtReal parabolic_numeric(const FunctionExpr& f, const Vec& x, const Vec& u, const Vec& w);

/// {x : eq(x) = 0, ineq(x) <= 0}, each part optional.
struct SmoothSet {
  int n = 0;
  std::optional<SmoothMap> eq;
  std::optional<SmoothMap> ineq;

  /// Max constraint violation at x.
  double violation(const Vec& x) const;
  bool contains(const Vec& x, double tol = 1e-9) const { return violation(x) <= tol; }
};

using TangentBase = std::variant<Polyhedron, SmoothSet>;

/// Second-order tangent set at x in direction u. Both supported base kinds give
/// a polyhedron; arc_test checks the defining limit directly.
struct SecondOrderTangentRep {
  TangentBase base;
  Vec x;
  Vec u;
  Polyhedron set;

  bool contains(const Vec& w, double tol = 1e-8) const { return set.contains(w, tol); }
  /// x + t u + t^2/2 w stays in the base set up to o(t^2) along t -> 0.
  bool arc_test(const Vec& w) const;
};

struct TangentSets {
  ConeRep tangent;
  SecondOrderTangentRep second;
};

/// T_Q(x) and T^2_Q(x | u). Throws DomainViolation when x is not in Q or u is
/// not tangent; curved sets need linearly independent active gradients.
TangentSets tangent_sets(const TangentBase& q, const Vec& x, const Vec& u, double atol = 1e-9);

/// Subgradients collected from proximal subdifferentials at grid points within
/// `radius` of x whose values are within delta of f(x).
std::vector<Vec> attentive_subgradient_samples(const FunctionExpr& f, const Vec& x, double radius,
                                               int per_axis, double delta = 1e-6);

}  // namespace tiltlab
