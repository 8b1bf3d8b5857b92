#pragma once

#include <memory>
#include <variant>

#include "tiltlab/polyhedron.hpp"
#include "tiltlab/polynomial.hpp"

namespace tiltlab {

/// G : R^n -> R^m with polynomial components.
class SmoothMap {
 public:
  explicit SmoothMap(std::vector<Polynomial> components);
  static SmoothMap identity(int n);
  static SmoothMap linear(const Mat& a);

  int n() const { return components_.front().nvars(); }
  int m() const { return static_cast<int>(components_.size()); }
  const std::vector<Polynomial>& components() const { return components_; }
  bool is_affine() const;

  Vec value(const Vec& x) const;
  Mat jacobian(const Vec& x) const;
  /// (<hess g_1(x) u, u>, ..., <hess g_m(x) u, u>)
  Vec hessian_form(const Vec& x, const Vec& u) const;

 private:
  std::vector<Polynomial> components_;
};

struct SmoothJet {
  Vec value;
  Mat jacobian;
  std::vector<Mat> hessians;
  Vec hessian_form(const Vec& u) const;
};

/// Value, Jacobian and per-component Hessians of G at x.
SmoothJet smooth_jet(const SmoothMap& g, const Vec& x);

struct ExprNode;

/// Immutable handle to an extended-real-valued function from the supported
/// semi-algebraic class. Copies share structure.
class FunctionExpr {
 public:
  FunctionExpr(std::shared_ptr<const ExprNode> node, int dim);
  int dim() const { return dim_; }
  const ExprNode& node() const { return *node_; }

 private:
  std::shared_ptr<const ExprNode> node_;
  int dim_;
};

namespace expr {
struct Poly {
  Polynomial p;
};
struct MaxOfSmooth {
  std::vector<Polynomial> pieces;
};
struct NormL1 {};
struct NormL2 {};
struct NormLinf {};
struct Indicator {
  Polyhedron set;
};
struct Sum {
  std::vector<FunctionExpr> terms;
};
/// base(x) - <v, x>
struct Tilted {
  FunctionExpr base;
  Vec v;
};
/// inner(x)^2 for nonnegative inner
struct Squared {
  FunctionExpr inner;
};
/// outer(G(x) + y)
struct Precomposed {
  FunctionExpr outer;
  SmoothMap map;
  Vec shift;
};
/// factor * base(x)
struct Scaled {
  double factor;
  FunctionExpr base;
};
}  // namespace expr

struct ExprNode {
  std::variant<expr::Poly, expr::MaxOfSmooth, expr::NormL1, expr::NormL2, expr::NormLinf,
               expr::Indicator, expr::Sum, expr::Tilted, expr::Squared, expr::Precomposed,
               expr::Scaled>
      v;
};

// Builders. All validate dimensions.
FunctionExpr polynomial(const Polynomial& p);
FunctionExpr max_of(const std::vector<Polynomial>& pieces);
FunctionExpr norm_l1(int n);
FunctionExpr norm_l2(int n);
FunctionExpr norm_linf(int n);
FunctionExpr indicator(const Polyhedron& set);
/// Throws Infeasible when the polyhedral domain of the sum is empty.
FunctionExpr sum(const std::vector<FunctionExpr>& terms);
FunctionExpr squared(const FunctionExpr& inner);
FunctionExpr scaled(double factor, const FunctionExpr& base);
FunctionExpr zero_function(int n);

/// f_v(x) = f(x) - <v, x>
FunctionExpr tilt(const FunctionExpr& f, const Vec& v);
/// h(G(x) + y)
FunctionExpr shift(const FunctionExpr& h, const SmoothMap& g, const Vec& y);

/// Exact value; +inf iff x is outside the domain (polyhedral membership within tol).
ExtReal evaluate(const FunctionExpr& f, const Vec& x, double tol = kDefaultTol);

/// Structural facts used by the oracles.
bool is_convex(const FunctionExpr& f);
bool has_indicator(const FunctionExpr& f);
/// Nonnegative everywhere (structurally).
bool is_nonnegative(const FunctionExpr& f);
/// Smooth (a single polynomial after tilts/sums/affine precomposition).
bool is_smooth(const FunctionExpr& f);

/// Polyhedral domain when it can be expressed as one; nullopt otherwise.
std::optional<Polyhedron> polyhedral_domain(const FunctionExpr& f);

/// Human-readable one-line form for logs and reports.
std::string describe(const FunctionExpr& f);

}  // namespace tiltlab
