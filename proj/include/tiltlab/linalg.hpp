#pragma once

#include "tiltlab/core.hpp"

namespace tiltlab {

/// Numerical rank with singular values below tol * max(1, sigma_max) treated as zero.
int rank(const Mat& m, double tol = kDefaultTol);

/// Orthonormal basis (columns) of the null space of m. m may have zero rows.
Mat null_space(const Mat& m, int cols, double tol = kDefaultTol);

/// Orthonormal basis (columns) of the span of the columns of m.
Mat column_basis(const Mat& m, int rows, double tol = kDefaultTol);

/// Stack row vectors into a matrix with `cols` columns (zero rows allowed).
Mat stack_rows(const std::vector<Vec>& rows, int cols);

/// Whether the subspaces spanned by the columns of a and b coincide.
bool same_subspace(const Mat& a, const Mat& b, int dim, double tol = 1e-8);

/// First `count` points of the Halton sequence (bases 2, 3, 5, ...) mapped to the box [lo, hi].
std::vector<Vec> halton(const Vec& lo, const Vec& hi, int count);

/// `count` deterministic points of the closed ball B_r(c): evenly spaced in 1-D,
/// Halton points otherwise.
std::vector<Vec> ball_points(const Vec& c, double r, int count);

}  // namespace tiltlab
