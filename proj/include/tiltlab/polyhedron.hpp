#pragma once

#include <memory>
#include <mutex>

#include "tiltlab/core.hpp"

namespace tiltlab {

/// Generators of a polyhedral set: conv(vertices) + cone(rays) + span(lineality columns).
struct VRep {
  std::vector<Vec> vertices;
  std::vector<Vec> rays;
  Mat lineality;  // n x l, orthonormal columns
};

/// Generators of the cone {z : M z <= 0}: extreme rays of its pointed part plus a
/// lineality basis. Double-description method.
VRep cone_generators(const Mat& m, int dim, double tol = kDefaultTol);

/// Closed convex polyhedron {x : A x <= b}. H-representation is primary; the
/// V-representation is computed on first use and cached (thread-safe).
class Polyhedron {
 public:
  Polyhedron(Mat a, Vec b);
  /// The whole space R^n.
  static Polyhedron whole(int n);
  /// Build from generators; H-rep computed by double description on the polar cone.
  static Polyhedron from_generators(int n, const std::vector<Vec>& vertices,
                                    const std::vector<Vec>& rays = {}, const Mat& lineality = {});
  /// Axis-aligned box lo <= x <= hi.
  static Polyhedron box(const Vec& lo, const Vec& hi);
  /// {x : E x = e}
  static Polyhedron affine(const Mat& e, const Vec& f);

  int dim() const { return static_cast<int>(a_.cols()); }
  const Mat& a() const { return a_; }
  const Vec& b() const { return b_; }
  int rows() const { return static_cast<int>(a_.rows()); }

  const VRep& vrep() const;
  bool is_empty() const;
  bool contains(const Vec& x, double tol = kDefaultTol) const;
  /// Rows that hold with equality on all of P.
  std::vector<int> implicit_equalities(double tol = kDefaultTol) const;
  /// Dimension of the affine hull; -1 when empty.
  int affine_dim(double tol = kDefaultTol) const;
  bool is_bounded() const;
  /// Tight rows at x.
  std::vector<int> active_set(const Vec& x, double tol = kDefaultTol) const;
  /// Euclidean projection onto P.
  Vec project(const Vec& x) const;
  /// Intersection (stacked constraints).
  Polyhedron intersect(const Polyhedron& other) const;

  struct Face {
    std::vector<int> active;  // closed tight-constraint set
    int dim = 0;
    std::vector<Vec> vertices;  // generators of the face
    std::vector<Vec> rays;
  };
  /// All nonempty faces, including P itself; fails with Budget beyond max_faces.
  std::vector<Face> faces(std::size_t max_faces = kFaceBudget, double tol = kDefaultTol) const;

 private:
  struct Cache {
    std::once_flag once;
    VRep vrep;
  };
  Mat a_;
  Vec b_;
  std::shared_ptr<Cache> cache_;
};

/// p in ri(S), decided by LPs: implicit equalities satisfied within tol and every other
/// constraint has slack at least tol.
bool relative_interior_contains(const Polyhedron& s, const Vec& p, double tol = kDefaultTol);

}  // namespace tiltlab
