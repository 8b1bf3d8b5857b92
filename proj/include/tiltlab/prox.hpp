#pragma once

#include "tiltlab/expr.hpp"

namespace tiltlab {

/// All global minimizers of x -> f(x) + (r/2)|x - z|^2, sorted lexicographically.
/// Closed forms for norms, indicators, convex quadratics and squared l1 norms;
/// otherwise exact piecewise enumeration. Throws Unbounded when the subproblem
/// is unbounded below.
std::vector<Vec> prox(const FunctionExpr& f, const Vec& z, double r);

/// Euclidean projection onto the l1 ball of the given radius.
Vec project_l1_ball(const Vec& z, double radius);

}  // namespace tiltlab
