#include "tiltlab/prox.hpp"

#include <algorithm>

#include "tiltlab/pieces.hpp"

namespace tiltlab {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

namespace {

Vec soft_threshold(const Vec& z, double tau) {
  return z.unaryExpr([tau](double a) { return a > tau ? a - tau : (a < -tau ? a + tau : 0.0); });
}

// prox of ||x||_1^2: x = soft(z, tau) with tau = 2 S_k / (r + 2k) for the right k.
Vec prox_l1_squared(const Vec& z, double r) {
  std::vector<double> a(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) a[static_cast<std::size_t>(i)] = std::abs(z(i));
  std::sort(a.begin(), a.end(), std::greater<>());
  double s = 0.0;
  double tau = 0.0;
  for (std::size_t k = 1; k <= a.size(); ++k) {
    s += a[k - 1];
    const double t = 2.0 * s / (r + 2.0 * static_cast<double>(k));
    const double next = k < a.size() ? a[k] : 0.0;
    if (a[k - 1] > t && t >= next) {
      tau = t;
      break;
    }
  }
  return soft_threshold(z, tau);
}

std::optional<std::vector<Vec>> closed_form(const FunctionExpr& f, const Vec& z, double r) {
  using Out = std::optional<std::vector<Vec>>;
  const int n = f.dim();
  return std::visit(
      overloaded{
          [&](const expr::Poly& a) -> Out {
            if (a.p.degree() > 2) return std::nullopt;
            const Vec zero = Vec::Zero(n);
            const Mat h = a.p.hessian(zero) + r * Mat::Identity(n, n);
            Eigen::SelfAdjointEigenSolver<Mat> es(h);
            if (es.eigenvalues().minCoeff() <= 1e-12) fail(ErrorKind::Unbounded, "prox subproblem is unbounded below");
            return std::vector<Vec>{h.ldlt().solve(r * z - a.p.gradient(zero))};
          },
          [&](const expr::NormL1&) -> Out { return std::vector<Vec>{soft_threshold(z, 1.0 / r)}; },
          [&](const expr::NormL2&) -> Out {
            const double nz = z.norm();
            const double lam = 1.0 / r;
            return std::vector<Vec>{nz <= lam ? Vec::Zero(n) : Vec((1.0 - lam / nz) * z)};
          },
          [&](const expr::NormLinf&) -> Out {
            const double lam = 1.0 / r;
            return std::vector<Vec>{z - lam * project_l1_ball(z / lam, 1.0)};
          },
          [&](const expr::Indicator& a) -> Out { return std::vector<Vec>{a.set.project(z)}; },
          [&](const expr::Tilted& a) -> Out { return prox(a.base, z + a.v / r, r); },
          [&](const expr::Scaled& a) -> Out {
            if (a.factor > 0) return prox(a.base, z, r / a.factor);
            return std::nullopt;
          },
          [&](const expr::Squared& a) -> Out {
            if (std::holds_alternative<expr::NormL1>(a.inner.node().v)) return std::vector<Vec>{prox_l1_squared(z, r)};
            if (std::holds_alternative<expr::NormL2>(a.inner.node().v)) return std::vector<Vec>{Vec(r * z / (2.0 + r))};
            return std::nullopt;
          },
          [&](const auto&) -> Out { return std::nullopt; },
      },
      f.node().v);
}

// Leading behaviour of a polynomial piece towards +inf (dir = 1) or -inf (dir = -1).
bool tends_to_minus_infinity(const Poly1& p, double dir) {
  if (p.degree() < 1) return false;
  const double lead = p.coeffs().back();
  const double sign = p.degree() % 2 == 0 ? 1.0 : dir;
  return lead * sign < 0;
}

std::vector<Vec> prox_by_enumeration(const FunctionExpr& f, const Vec& z, double r) {
  const int n = f.dim();
  const FunctionExpr phi = sum({f, polynomial(Polynomial::quadratic(r * Mat::Identity(n, n), -r * z, 0.5 * r * z.squaredNorm()))});
  if (n == 1) {
    const Decomposition1D d = decompose_1d(phi);
    if ((d.pieces.front() && tends_to_minus_infinity(*d.pieces.front(), -1.0)) ||
        (d.pieces.back() && tends_to_minus_infinity(*d.pieces.back(), 1.0))) {
      fail(ErrorKind::Unbounded, "prox subproblem is unbounded below");
    }
  }
  const StationarySet st = stationary_points(phi, Vec::Zero(n));
  if (st.continuum) fail(ErrorKind::Unsupported, "prox has a continuum of minimizers");
  if (st.points.empty()) fail(ErrorKind::Unbounded, "prox subproblem has no minimizer");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : st.points) best = std::min(best, evaluate(phi, p).as_double());
  std::vector<Vec> out;
  for (const auto& p : st.points) {
    if (evaluate(phi, p).as_double() <= best + 1e-12 * (1.0 + std::abs(best))) out.push_back(p);
  }
  return out;
}

}  // namespace

Vec project_l1_ball(const Vec& z, double radius) {
  if (z.lpNorm<1>() <= radius) return z;
  std::vector<double> a(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) a[static_cast<std::size_t>(i)] = std::abs(z(i));
  std::sort(a.begin(), a.end(), std::greater<>());
  double s = 0.0;
  double theta = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    s += a[k];
    const double t = (s - radius) / static_cast<double>(k + 1);
    if (a[k] > t) theta = t;
  }
  return soft_threshold(z, theta);
}

std::vector<Vec> prox(const FunctionExpr& f, const Vec& z, double r) {
  require_dim(z.size(), f.dim(), "prox");
  if (!(r > 0) || !std::isfinite(r)) fail(ErrorKind::DomainViolation, "prox parameter must be positive");
  auto out = closed_form(f, z, r);
  if (!out) out = prox_by_enumeration(f, z, r);
  std::sort(out->begin(), out->end(), lex_less);
  return *out;
}

}  // namespace tiltlab
