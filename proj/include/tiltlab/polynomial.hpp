#pragma once

#include <map>

#include "tiltlab/core.hpp"

namespace tiltlab {

/// Univariate polynomial, coefficients in increasing degree.
class Poly1 {
 public:
  Poly1() = default;
  explicit Poly1(std::vector<double> coeffs);
  static Poly1 constant(double c) { return Poly1({c}); }
  static Poly1 identity() { return Poly1({0.0, 1.0}); }

  int degree() const { return static_cast<int>(c_.size()) - 1; }
  const std::vector<double>& coeffs() const { return c_; }
  double operator()(double x) const;
  Poly1 derivative() const;
  bool is_zero(double tol = 0.0) const;

  friend Poly1 operator+(const Poly1& a, const Poly1& b);
  friend Poly1 operator-(const Poly1& a, const Poly1& b);
  friend Poly1 operator*(const Poly1& a, const Poly1& b);
  friend Poly1 operator*(double s, const Poly1& a);
  /// Composition a(b(x)).
  Poly1 compose(const Poly1& inner) const;

 private:
  void trim();
  std::vector<double> c_{0.0};
};

/// Real roots, ascending, merged within 1e-8. Companion-matrix eigenvalues
/// polished by Newton steps. The zero polynomial is rejected.
std::vector<double> real_roots(const Poly1& p);

/// Real roots inside [lo, hi] (inclusive, with a small tolerance).
std::vector<double> real_roots_in(const Poly1& p, double lo, double hi);

/// Multivariate polynomial over R^n as a sparse coefficient table.
class Polynomial {
 public:
  using Exponents = std::vector<int>;

  explicit Polynomial(int n);
  Polynomial(int n, std::map<Exponents, double> terms);
  static Polynomial constant(int n, double c);
  /// x_i
  static Polynomial variable(int n, int i);
  /// a'x + c
  static Polynomial affine(const Vec& a, double c);
  /// 0.5 x'Qx + c'x + d
  static Polynomial quadratic(const Mat& q, const Vec& c, double d);

  int nvars() const { return n_; }
  int degree() const;
  const std::map<Exponents, double>& terms() const { return terms_; }

  double operator()(const Vec& x) const;
  Vec gradient(const Vec& x) const;
  Mat hessian(const Vec& x) const;
  Polynomial partial(int i) const;

  friend Polynomial operator+(const Polynomial& a, const Polynomial& b);
  friend Polynomial operator-(const Polynomial& a, const Polynomial& b);
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
  friend Polynomial operator*(double s, const Polynomial& a);
  Polynomial pow(int k) const;

  /// Substitute x_i := inner[i](z); every inner polynomial shares the same variable count.
  Polynomial compose(const std::vector<Polynomial>& inner) const;
  /// Restriction to the line t -> x0 + t d.
  Poly1 along_line(const Vec& x0, const Vec& d) const;
  /// Univariate view (requires nvars == 1).
  Poly1 as_poly1() const;
  static Polynomial from_poly1(const Poly1& p);

  bool is_affine() const { return degree() <= 1; }
  bool is_zero() const { return terms_.empty(); }

 private:
  void prune();
  int n_;
  std::map<Exponents, double> terms_;
};

}  // namespace tiltlab
