#pragma once

#include "tiltlab/expr.hpp"

namespace tiltlab {

/// Finite union of polyhedra. No pieces means the empty set.
struct SubgradientSet {
  int dim = 0;
  std::vector<Polyhedron> pieces;
  bool convex_hint = false;

  bool empty() const { return pieces.empty(); }
  bool contains(const Vec& g, double tol = 1e-8) const;
  /// Euclidean distance from g to the set; +inf when empty.
  double distance(const Vec& g) const;
  /// Nearest point of the set to g (throws EmptySet when empty).
  Vec nearest(const Vec& g) const;
};

/// Closed polyhedral cone, stored as a polyhedron with a homogeneous H-rep.
class ConeRep {
 public:
  explicit ConeRep(Polyhedron set);
  static ConeRep zero(int n);
  static ConeRep whole(int n);
  /// {u : M u <= 0}
  static ConeRep from_constraints(const Mat& m);
  static ConeRep from_generators(int n, const std::vector<Vec>& rays, const Mat& lineality = {});

  int dim() const { return set_.dim(); }
  const Polyhedron& set() const { return set_; }
  std::vector<Vec> rays() const { return set_.vrep().rays; }
  const Mat& lineality() const { return set_.vrep().lineality; }
  bool contains(const Vec& u, double tol = 1e-8) const { return set_.contains(u, tol); }
  bool is_zero() const;
  /// Mutual containment of generators.
  bool equals(const ConeRep& other, double tol = 1e-8) const;
  /// Whether the cone is a linear subspace, and a basis of it.
  bool is_subspace() const;
  int linear_dim() const;

 private:
  Polyhedron set_;
};

/// First-order local structure of f at a point. Regular points carry the
/// generators of the convex subdifferential; min-type points carry the finitely
/// many limiting subgradients of a nonregular (negated max) structure.
struct LocalModel {
  bool regular = true;
  std::vector<Vec> points;
  std::vector<Vec> rays;
  std::vector<Vec> lines;
  std::optional<Polyhedron> hrep;
};

/// Tolerance for deciding which pieces/constraints are active at a point.
inline constexpr double kActiveTol = 1e-9;

LocalModel local_model(const FunctionExpr& f, const Vec& x, double atol = kActiveTol);

SubgradientSet proximal_subdiff(const FunctionExpr& f, const Vec& x, double atol = kActiveTol);
SubgradientSet limiting_subdiff(const FunctionExpr& f, const Vec& x, double atol = kActiveTol);
ConeRep horizon_subdiff(const FunctionExpr& f, const Vec& x, double atol = kActiveTol);

/// {u : df(x)(u) = <v, u>}
ConeRep critical_cone(const FunctionExpr& f, const Vec& x, const Vec& v, double atol = kActiveTol);

/// dist(0, limiting subdifferential of f_v at x).
double criticality_residual(const FunctionExpr& f, const Vec& v, const Vec& x, double atol = kActiveTol);

/// Points where a proper function must be finite; throws DomainViolation otherwise.
void require_in_domain(const FunctionExpr& f, const Vec& x, const char* where);

/// Subgradients of min_i <g_i, .> that are strictly minimal along some direction.
std::vector<Vec> essential_points(const std::vector<Vec>& pts, double tol = 1e-9);

}  // namespace tiltlab
