#pragma once

#include "tiltlab/expr.hpp"

namespace tiltlab {

/// A smooth manifold, given either as the relative interior of a polyhedral face
/// (locally its affine hull) or as a regular zero set {F = 0} near a base point.
class ManifoldSpec {
 public:
  enum class Kind { AffineFace, SmoothZeroSet };

  static ManifoldSpec affine_face(const Polyhedron& p, std::vector<int> active);
  /// Throws when F(base) != 0 or the Jacobian at base is rank deficient.
  static ManifoldSpec zero_set(const SmoothMap& f, const Vec& base);
  /// {x : E x = e}; zero rows give the whole space.
  static ManifoldSpec affine(const Mat& e, const Vec& f);
  static ManifoldSpec whole(int n);

  Kind kind() const { return kind_; }
  int ambient_dim() const { return n_; }
  int dim() const { return dim_; }
  const std::vector<int>& active() const { return active_; }
  const std::optional<Polyhedron>& polyhedron() const { return poly_; }
  const std::optional<SmoothMap>& map() const { return map_; }

  /// Local membership: defining equalities hold within tol.
  bool contains(const Vec& x, double tol = 1e-8) const;
  /// Orthonormal bases of T_M(x) and N_M(x).
  Mat tangent_basis(const Vec& x) const;
  Mat normal_basis(const Vec& x) const;
  /// Nearest point of the (local) manifold to p.
  Vec project(const Vec& p) const;
  /// Defining equalities E(x) = 0 as affine/polynomial components (for solvers).
  std::vector<Polynomial> equations() const;

  std::string describe() const;

 private:
  ManifoldSpec() = default;
  Kind kind_ = Kind::AffineFace;
  int n_ = 0;
  int dim_ = 0;
  std::optional<Polyhedron> poly_;
  std::vector<int> active_;
  std::optional<SmoothMap> map_;
  Vec base_;
};

struct FaceEntry {
  std::vector<int> active;
  ManifoldSpec manifold;
  int relative_dim;
};

/// All nonempty faces of P with their tight sets and affine dimensions.
std::vector<FaceEntry> face_lattice(const Polyhedron& p, std::size_t max_faces = kFaceBudget);

}  // namespace tiltlab
