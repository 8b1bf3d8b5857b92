#pragma once

#include <cstdint>

#include "tiltlab/manifold.hpp"
#include "tiltlab/pieces.hpp"
#include "tiltlab/subdiff.hpp"

namespace tiltlab {

enum class Classification { LocalMin, NotLocalMin, Unknown };
const char* to_string(Classification c);

struct CriticalPoint {
  Vec x;
  /// f_v(x)
  ExtReal value;
  /// dist(0, limiting subdifferential of f_v at x)
  double residual = 0.0;
  Classification classification = Classification::Unknown;
};

struct CriticalEnumeration {
  std::vector<CriticalPoint> points;
  /// A positive-dimensional set of critical points was detected; `points`
  /// then holds only the representatives that were found.
  bool continuum = false;
  bool exact = true;
};

/// Critical points of f_v, merged at 1e-8 and sorted lexicographically.
/// Classification is skipped (left Unknown) when `classify` is false.
CriticalEnumeration enumerate_critical_points(const FunctionExpr& f, const Vec& v,
                                              const StationaryOptions& opts = {}, bool classify = true);

/// min over unit u in the critical cone C_f(x, v) of inf_w d^2 f_v(x)(u|w);
/// +inf when the cone is {0}. Cones of dimension >= 2 are sampled.
double second_order_min(const FunctionExpr& f, const Vec& v, const Vec& x);

/// min over unit u in the cone of inf_w d^2 g(x)(u|w); +inf when the cone is {0}.
double second_order_min_on(const FunctionExpr& g, const Vec& x, const ConeRep& cone);

/// Grid search on B_{1e-2}(x) plus the necessary second-order condition.
Classification classify_critical_point(const FunctionExpr& f, const Vec& v, const Vec& x);

// ---- composite problems  min f(x) - <v,x> + h(G(x) + y) --------------------

struct CompositeProblem {
  FunctionExpr f;
  FunctionExpr h;
  SmoothMap g;
  Vec v;
  Vec y;
};

struct QualFlags {
  bool bcq = false;
  bool licq_analogue = false;
  /// Only decided when the manifolds K and M are supplied.
  std::optional<bool> nondegeneracy;
};

struct GeneralizedEquationResidual {
  /// dist(v - J(x)^T lambda, subdiff f(x))
  double r_v = 0.0;
  /// dist(G(x) + y, (subdiff h)^{-1}(lambda)); +inf when the preimage is empty
  double r_y = 0.0;
  bool no_multiplier_match = false;
  double max() const { return std::max(r_v, r_y); }
};

enum class SolveStatus { Converged, NonIsolated, MaxIterations, Diverged };
const char* to_string(SolveStatus s);

struct CriticalPair {
  Vec x;
  Vec lambda;
  /// -J(x)^T lambda
  Vec w;
  /// r_v and r_y of the generalized equation.
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  /// Empty when a qualification oracle does not support the data.
  std::optional<QualFlags> qual_flags;
  bool multiplier_unique = false;
  SolveStatus status = SolveStatus::MaxIterations;
  int iterations = 0;
};

struct CompositeOptions {
  double tol = 1e-10;
  int newton_max = 200;
  int max_halvings = 50;
  int splitting_max = 5000;
  /// Prox step in the natural map.
  double gamma = 1.0;
  /// Restarts around a converged pair, used to detect non-isolated solutions.
  int restarts = 8;
  double restart_radius = 1e-2;
  double separation = 1e-4;
  std::uint64_t seed = 0;
};

/// Semismooth Newton on the natural map
///   F(x, l) = (x - prox_f(x + g (v - J^T l)),  z - prox_h(z + g l)),  z = G(x) + y,
/// with a finite-difference Jacobian, step halving, and a proximal splitting
/// fallback. Never throws on non-convergence; the status says what happened.
CriticalPair solve_composite_critical(const CompositeProblem& p, const Vec& x0, const Vec& lambda0,
                                      const CompositeOptions& opts = {});

GeneralizedEquationResidual residual(const CompositeProblem& p, const Vec& x, const Vec& lambda);
inline GeneralizedEquationResidual residual(const CompositeProblem& p, const CriticalPair& pair) {
  return residual(p, pair.x, pair.lambda);
}

/// dist(z, {z' : lambda in the limiting subdifferential of h at z'}); +inf when empty.
double inverse_subdiff_distance(const FunctionExpr& h, const Vec& lambda, const Vec& z);

/// Orthonormal basis of the direction space of the affine hull of a union of polyhedra.
Mat parallel_basis(const SubgradientSet& s);

/// Whether the multiplier set at x is a single point (widths by LP, within 1e-6).
bool multiplier_unique(const CompositeProblem& p, const Vec& x);

QualFlags check_qualifications(const FunctionExpr& f, const FunctionExpr& h, const SmoothMap& g, const Vec& x,
                               const Vec& y);
/// Adds the nondegeneracy flag for manifolds K (through G(x) + y) and M (through x).
QualFlags check_qualifications(const FunctionExpr& f, const FunctionExpr& h, const SmoothMap& g, const Vec& x,
                               const Vec& y, const ManifoldSpec& k, const ManifoldSpec& m);

}  // namespace tiltlab
