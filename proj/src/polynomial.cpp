#include "tiltlab/polynomial.hpp"

#include <algorithm>
#include <complex>

namespace tiltlab {

// ---- Poly1 -----------------------------------------------------------------

Poly1::Poly1(std::vector<double> coeffs) : c_(std::move(coeffs)) {
  if (c_.empty()) c_.push_back(0.0);
  trim();
}

void Poly1::trim() {
  while (c_.size() > 1 && c_.back() == 0.0) c_.pop_back();
}

double Poly1::operator()(double x) const {
  double acc = 0.0;
  for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * x + *it;
  return acc;
}

Poly1 Poly1::derivative() const {
  if (c_.size() <= 1) return Poly1({0.0});
  std::vector<double> d(c_.size() - 1);
  for (std::size_t k = 1; k < c_.size(); ++k) d[k - 1] = static_cast<double>(k) * c_[k];
  return Poly1(d);
}

bool Poly1::is_zero(double tol) const {
  return std::all_of(c_.begin(), c_.end(), [tol](double c) { return std::abs(c) <= tol; });
}

Poly1 operator+(const Poly1& a, const Poly1& b) {
  std::vector<double> c(std::max(a.c_.size(), b.c_.size()), 0.0);
  for (std::size_t k = 0; k < a.c_.size(); ++k) c[k] += a.c_[k];
  for (std::size_t k = 0; k < b.c_.size(); ++k) c[k] += b.c_[k];
  return Poly1(c);
}

Poly1 operator-(const Poly1& a, const Poly1& b) { return a + (-1.0) * b; }

Poly1 operator*(const Poly1& a, const Poly1& b) {
  std::vector<double> c(a.c_.size() + b.c_.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.c_.size(); ++i) {
    for (std::size_t j = 0; j < b.c_.size(); ++j) c[i + j] += a.c_[i] * b.c_[j];
  }
  return Poly1(c);
}

Poly1 operator*(double s, const Poly1& a) {
  std::vector<double> c = a.c_;
  for (auto& x : c) x *= s;
  return Poly1(c);
}

Poly1 Poly1::compose(const Poly1& inner) const {
  Poly1 acc({0.0});
  for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * inner + Poly1::constant(*it);
  return acc;
}

std::vector<double> real_roots(const Poly1& p_in) {
  // Drop numerically negligible leading coefficients relative to the largest one.
  std::vector<double> c = p_in.coeffs();
  double big = 0.0;
  for (double x : c) big = std::max(big, std::abs(x));
  if (big == 0.0) fail(ErrorKind::Unsupported, "roots of the zero polynomial");
  while (c.size() > 1 && std::abs(c.back()) <= 1e-14 * big) c.pop_back();
  const int d = static_cast<int>(c.size()) - 1;
  if (d <= 0) return {};
  const Poly1 p(c);
  const Poly1 dp = p.derivative();
  std::vector<double> cand;
  if (d == 1) {
    cand.push_back(-c[0] / c[1]);
  } else {
    Mat comp = Mat::Zero(d, d);
    for (int i = 1; i < d; ++i) comp(i, i - 1) = 1.0;
    for (int i = 0; i < d; ++i) comp(i, d - 1) = -c[i] / c[d];
    Eigen::EigenSolver<Mat> es(comp, false);
    for (int i = 0; i < d; ++i) {
      const std::complex<double> z = es.eigenvalues()(i);
      // Multiple roots split into complex clusters of size ~ eps^(1/m).
      if (std::abs(z.imag()) <= 1e-5 * (1.0 + std::abs(z))) cand.push_back(z.real());
    }
  }
  std::vector<double> roots;
  for (double x : cand) {
    for (int it = 0; it < 60; ++it) {
      const double fx = p(x);
      const double dfx = dp(x);
      if (dfx == 0.0) break;
      const double step = fx / dfx;
      // Newton is only a polish: reject wild steps near multiple roots.
      if (std::abs(step) > 1e-2 * (1.0 + std::abs(x))) break;
      x -= step;
      if (std::abs(step) <= 1e-16 * (1.0 + std::abs(x))) break;
    }
    // Residual test scaled by the size of the terms.
    double mag = 0.0;
    double xp = 1.0;
    for (double ck : c) {
      mag += std::abs(ck) * xp;
      xp *= std::abs(x);
    }
    if (std::abs(p(x)) <= 1e-7 * mag) roots.push_back(x);
  }
  std::sort(roots.begin(), roots.end());
  std::vector<double> out;
  for (double r : roots) {
    if (out.empty() || std::abs(r - out.back()) > 1e-8 * (1.0 + std::abs(r))) {
      out.push_back(r);
    } else {
      // keep the better of a cluster
      if (std::abs(p(r)) < std::abs(p(out.back()))) out.back() = r;
    }
  }
  return out;
}

std::vector<double> real_roots_in(const Poly1& p, double lo, double hi) {
  std::vector<double> out;
  const double slack = 1e-12 * (1.0 + std::max(std::abs(lo), std::abs(hi)));
  for (double r : real_roots(p)) {
    if (r >= lo - slack && r <= hi + slack) out.push_back(std::clamp(r, lo, hi));
  }
  return out;
}

// ---- Polynomial ------------------------------------------------------------

Polynomial::Polynomial(int n) : n_(n) {
  if (n < 1 || n > kMaxDim) fail(ErrorKind::Budget, "polynomial variable count must be in [1, 8]");
}

Polynomial::Polynomial(int n, std::map<Exponents, double> terms) : Polynomial(n) {
  for (auto& [e, c] : terms) {
    if (static_cast<int>(e.size()) != n) fail(ErrorKind::DimensionMismatch, "polynomial exponent length");
    for (int k : e) {
      if (k < 0) fail(ErrorKind::DomainViolation, "negative exponent");
    }
    if (!std::isfinite(c)) fail(ErrorKind::DomainViolation, "non-finite coefficient");
  }
  terms_ = std::move(terms);
  prune();
}

void Polynomial::prune() {
  for (auto it = terms_.begin(); it != terms_.end();) {
    if (it->second == 0.0) {
      it = terms_.erase(it);
    } else {
      ++it;
    }
  }
}

Polynomial Polynomial::constant(int n, double c) {
  return Polynomial(n, {{Exponents(static_cast<std::size_t>(n), 0), c}});
}

Polynomial Polynomial::variable(int n, int i) {
  Exponents e(static_cast<std::size_t>(n), 0);
  e[static_cast<std::size_t>(i)] = 1;
  return Polynomial(n, {{e, 1.0}});
}

Polynomial Polynomial::affine(const Vec& a, double c) {
  const int n = static_cast<int>(a.size());
  Polynomial p = constant(n, c);
  for (int i = 0; i < n; ++i) p = p + a(i) * variable(n, i);
  return p;
}

Polynomial Polynomial::quadratic(const Mat& q, const Vec& c, double d) {
  const int n = static_cast<int>(c.size());
  require_dim(q.rows(), n, "quadratic");
  require_dim(q.cols(), n, "quadratic");
  Polynomial p = affine(c, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (q(i, j) != 0.0) p = p + (0.5 * q(i, j)) * (variable(n, i) * variable(n, j));
    }
  }
  return p;
}

int Polynomial::degree() const {
  int d = 0;
  for (const auto& [e, c] : terms_) {
    int s = 0;
    for (int k : e) s += k;
    d = std::max(d, s);
  }
  return d;
}

double Polynomial::operator()(const Vec& x) const {
  require_dim(x.size(), n_, "Polynomial eval");
  double acc = 0.0;
  for (const auto& [e, c] : terms_) {
    double t = c;
    for (int i = 0; i < n_; ++i) {
      for (int k = 0; k < e[i]; ++k) t *= x(i);
    }
    acc += t;
  }
  return acc;
}

Polynomial Polynomial::partial(int i) const {
  std::map<Exponents, double> out;
  for (const auto& [e, c] : terms_) {
    if (e[i] == 0) continue;
    Exponents f = e;
    f[i] -= 1;
    out[f] += c * e[i];
  }
  return Polynomial(n_, out);
}

Vec Polynomial::gradient(const Vec& x) const {
  require_dim(x.size(), n_, "Polynomial gradient");
  Vec g(n_);
  for (int i = 0; i < n_; ++i) g(i) = partial(i)(x);
  return g;
}

Mat Polynomial::hessian(const Vec& x) const {
  require_dim(x.size(), n_, "Polynomial hessian");
  Mat h(n_, n_);
  for (int i = 0; i < n_; ++i) {
    const Polynomial pi = partial(i);
    for (int j = i; j < n_; ++j) {
      h(i, j) = pi.partial(j)(x);
      h(j, i) = h(i, j);
    }
  }
  return h;
}

Polynomial operator+(const Polynomial& a, const Polynomial& b) {
  require_dim(a.n_, b.n_, "Polynomial +");
  auto t = a.terms_;
  for (const auto& [e, c] : b.terms_) t[e] += c;
  return Polynomial(a.n_, t);
}

Polynomial operator-(const Polynomial& a, const Polynomial& b) { return a + (-1.0) * b; }

Polynomial operator*(double s, const Polynomial& a) {
  auto t = a.terms_;
  for (auto& [e, c] : t) c *= s;
  return Polynomial(a.n_, t);
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  require_dim(a.n_, b.n_, "Polynomial *");
  std::map<Polynomial::Exponents, double> t;
  for (const auto& [ea, ca] : a.terms_) {
    for (const auto& [eb, cb] : b.terms_) {
      Polynomial::Exponents e(ea.size());
      for (std::size_t i = 0; i < e.size(); ++i) e[i] = ea[i] + eb[i];
      t[e] += ca * cb;
    }
  }
  return Polynomial(a.n_, t);
}

Polynomial Polynomial::pow(int k) const {
  Polynomial acc = constant(n_, 1.0);
  for (int i = 0; i < k; ++i) acc = acc * *this;
  return acc;
}

Polynomial Polynomial::compose(const std::vector<Polynomial>& inner) const {
  require_dim(static_cast<Eigen::Index>(inner.size()), n_, "Polynomial compose");
  const int m = inner.empty() ? 1 : inner.front().nvars();
  Polynomial acc(m);
  for (const auto& [e, c] : terms_) {
    Polynomial t = constant(m, c);
    for (int i = 0; i < n_; ++i) {
      if (e[i] > 0) t = t * inner[i].pow(e[i]);
    }
    acc = acc + t;
  }
  return acc;
}

Poly1 Polynomial::along_line(const Vec& x0, const Vec& d) const {
  require_dim(x0.size(), n_, "along_line");
  Poly1 acc({0.0});
  for (const auto& [e, c] : terms_) {
    Poly1 t = Poly1::constant(c);
    for (int i = 0; i < n_; ++i) {
      const Poly1 li({x0(i), d(i)});
      for (int k = 0; k < e[i]; ++k) t = t * li;
    }
    acc = acc + t;
  }
  return acc;
}

Poly1 Polynomial::as_poly1() const {
  if (n_ != 1) fail(ErrorKind::DimensionMismatch, "as_poly1 needs a univariate polynomial");
  std::vector<double> c(static_cast<std::size_t>(degree()) + 1, 0.0);
  for (const auto& [e, v] : terms_) c[static_cast<std::size_t>(e[0])] += v;
  return Poly1(c);
}

Polynomial Polynomial::from_poly1(const Poly1& p) {
  std::map<Exponents, double> t;
  for (std::size_t k = 0; k < p.coeffs().size(); ++k) t[{static_cast<int>(k)}] += p.coeffs()[k];
  return Polynomial(1, t);
}

}  // namespace tiltlab
