#pragma once

#include "tiltlab/expr.hpp"

namespace tiltlab {

/// Polynomials whose zero sets contain every boundary between smooth pieces of f
/// (and the boundary of its domain).
std::vector<Polynomial> switching_polys(const FunctionExpr& f);

/// Every polynomial that coincides with f on some open piece (possibly more).
std::vector<Polynomial> selection_polys(const FunctionExpr& f, std::size_t budget = 4096);

/// The polynomial equal to f near x, or nullopt when x is outside the domain.
/// x is assumed off every switching set.
std::optional<Polynomial> local_selection(const FunctionExpr& f, const Vec& x);

/// Exact decomposition of a univariate f into open intervals between sorted
/// breakpoints; pieces[k] lives on (breaks[k-1], breaks[k]) with +-inf at the ends.
struct Decomposition1D {
  std::vector<double> breaks;
  std::vector<std::optional<Poly1>> pieces;
};
Decomposition1D decompose_1d(const FunctionExpr& f);

struct StationaryOptions {
  /// Search box for the continuation path (required outside the exact subclass).
  std::optional<std::pair<Vec, Vec>> box;
  double tol = 1e-8;
  int starts = 64;
};

struct StationarySet {
  /// Verified points with 0 in the limiting subdifferential of f_v, sorted lexicographically.
  std::vector<Vec> points;
  /// A positive-dimensional family of critical points was detected.
  bool continuum = false;
  /// The result came from the exact path (1-D roots or linear strata systems).
  bool exact = true;
};

/// Critical points of f_v. Exact for n = 1 (polynomial roots per piece) and for
/// n <= 3 with linear switching sets and pieces of degree <= 2; otherwise a
/// multi-start Newton search on every stratum inside opts.box.
StationarySet stationary_points(const FunctionExpr& f, const Vec& v, const StationaryOptions& opts = {});

/// Whether stationary_points can run without a box.
bool in_exact_subclass(const FunctionExpr& f);

}  // namespace tiltlab
