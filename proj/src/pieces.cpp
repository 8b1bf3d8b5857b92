#include "tiltlab/pieces.hpp"

#include <algorithm>
#include <functional>

#include "tiltlab/linalg.hpp"
#include "tiltlab/subdiff.hpp"

namespace tiltlab {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

namespace {

bool same_poly(const Polynomial& a, const Polynomial& b, double tol = 1e-12) {
  if (a.nvars() != b.nvars()) return false;
  const Polynomial d = a - b;
  double scale = 1.0;
  for (const auto& [e, c] : a.terms()) scale = std::max(scale, std::abs(c));
  for (const auto& [e, c] : d.terms()) {
    if (std::abs(c) > tol * scale) return false;
  }
  return true;
}

void add_poly(std::vector<Polynomial>& out, const Polynomial& p) {
  for (const auto& q : out) {
    if (same_poly(p, q)) return;
  }
  out.push_back(p);
}

// Scale to unit max coefficient with a positive leading term, so that p and c*p collapse.
Polynomial normalized(const Polynomial& p) {
  double big = 0.0;
  double lead = 0.0;
  for (const auto& [e, c] : p.terms()) {
    if (std::abs(c) > big) {
      big = std::abs(c);
      lead = c;
    }
  }
  if (big == 0.0) return p;
  return (1.0 / lead) * p;
}

std::vector<Polynomial> shifted_map(const SmoothMap& g, const Vec& y) {
  std::vector<Polynomial> out;
  for (int i = 0; i < g.m(); ++i) out.push_back(g.components()[i] + Polynomial::constant(g.n(), y(i)));
  return out;
}

std::vector<Polynomial> pairwise_differences(const std::vector<Polynomial>& pieces) {
  std::vector<Polynomial> out;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    for (std::size_t j = i + 1; j < pieces.size(); ++j) {
      const Polynomial d = pieces[i] - pieces[j];
      if (d.degree() >= 1) add_poly(out, normalized(d));
    }
  }
  return out;
}

std::vector<Polynomial> linf_pieces(int n) {
  std::vector<Polynomial> out;
  for (int i = 0; i < n; ++i) {
    out.push_back(Polynomial::variable(n, i));
    out.push_back(-1.0 * Polynomial::variable(n, i));
  }
  return out;
}

}  // namespace

std::vector<Polynomial> switching_polys(const FunctionExpr& f) {
  const int n = f.dim();
  std::vector<Polynomial> out;
  std::visit(overloaded{
                 [&](const expr::Poly&) {},
                 [&](const expr::MaxOfSmooth& a) { out = pairwise_differences(a.pieces); },
                 [&](const expr::NormL1&) {
                   for (int i = 0; i < n; ++i) out.push_back(Polynomial::variable(n, i));
                 },
                 [&](const expr::NormL2&) {
                   if (n > 1) fail(ErrorKind::Unsupported, "the Euclidean norm in dimension > 1 is not piecewise polynomial");
                   out.push_back(Polynomial::variable(1, 0));
                 },
                 [&](const expr::NormLinf&) { out = pairwise_differences(linf_pieces(n)); },
                 [&](const expr::Indicator& a) {
                   for (int i = 0; i < a.set.rows(); ++i) {
                     const Polynomial p = Polynomial::affine(a.set.a().row(i).transpose(), -a.set.b()(i));
                     if (p.degree() >= 1) add_poly(out, normalized(p));
                   }
                 },
                 [&](const expr::Sum& a) {
                   for (const auto& t : a.terms) {
                     for (const auto& p : switching_polys(t)) add_poly(out, p);
                   }
                 },
                 [&](const expr::Tilted& a) { out = switching_polys(a.base); },
                 [&](const expr::Squared& a) { out = switching_polys(a.inner); },
                 [&](const expr::Precomposed& a) {
                   const auto inner = shifted_map(a.map, a.shift);
                   for (const auto& p : switching_polys(a.outer)) {
                     const Polynomial q = p.compose(inner);
                     if (q.degree() >= 1) add_poly(out, normalized(q));
                   }
                 },
                 [&](const expr::Scaled& a) { out = switching_polys(a.base); },
             },
             f.node().v);
  return out;
}

std::vector<Polynomial> selection_polys(const FunctionExpr& f, std::size_t budget) {
  const int n = f.dim();
  std::vector<Polynomial> out;
  auto check = [&](std::size_t k) {
    if (k > budget) fail(ErrorKind::Budget, "too many smooth pieces");
  };
  std::visit(overloaded{
                 [&](const expr::Poly& a) { out = {a.p}; },
                 [&](const expr::MaxOfSmooth& a) {
                   for (const auto& p : a.pieces) add_poly(out, p);
                 },
                 [&](const expr::NormL1&) {
                   check(std::size_t{1} << n);
                   for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
                     Polynomial p(n);
                     for (int i = 0; i < n; ++i) p = p + ((mask >> i) & 1 ? 1.0 : -1.0) * Polynomial::variable(n, i);
                     out.push_back(p);
                   }
                 },
                 [&](const expr::NormL2&) {
                   if (n > 1) fail(ErrorKind::Unsupported, "the Euclidean norm in dimension > 1 is not piecewise polynomial");
                   out = linf_pieces(1);
                 },
                 [&](const expr::NormLinf&) { out = linf_pieces(n); },
                 [&](const expr::Indicator&) { out = {Polynomial(n)}; },
                 [&](const expr::Sum& a) {
                   out = {Polynomial(n)};
                   for (const auto& t : a.terms) {
                     const auto ps = selection_polys(t, budget);
                     check(out.size() * ps.size());
                     std::vector<Polynomial> next;
                     for (const auto& p : out) {
                       for (const auto& q : ps) add_poly(next, p + q);
                     }
                     out = std::move(next);
                   }
                 },
                 [&](const expr::Tilted& a) {
                   const Polynomial lin = Polynomial::affine(-a.v, 0.0);
                   for (const auto& p : selection_polys(a.base, budget)) add_poly(out, p + lin);
                 },
                 [&](const expr::Squared& a) {
                   for (const auto& p : selection_polys(a.inner, budget)) add_poly(out, p * p);
                 },
                 [&](const expr::Precomposed& a) {
                   const auto inner = shifted_map(a.map, a.shift);
                   for (const auto& p : selection_polys(a.outer, budget)) add_poly(out, p.compose(inner));
                 },
                 [&](const expr::Scaled& a) {
                   for (const auto& p : selection_polys(a.base, budget)) add_poly(out, a.factor * p);
                 },
             },
             f.node().v);
  return out;
}

std::optional<Polynomial> local_selection(const FunctionExpr& f, const Vec& x) {
  const int n = f.dim();
  auto argmax = [&](const std::vector<Polynomial>& pieces) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < pieces.size(); ++i) {
      if (pieces[i](x) > pieces[best](x)) best = i;
    }
    return pieces[best];
  };
  return std::visit(
      overloaded{
          [&](const expr::Poly& a) -> std::optional<Polynomial> { return a.p; },
          [&](const expr::MaxOfSmooth& a) -> std::optional<Polynomial> { return argmax(a.pieces); },
          [&](const expr::NormL1&) -> std::optional<Polynomial> {
            Polynomial p(n);
            for (int i = 0; i < n; ++i) p = p + (x(i) >= 0 ? 1.0 : -1.0) * Polynomial::variable(n, i);
            return p;
          },
          [&](const expr::NormL2&) -> std::optional<Polynomial> {
            if (n > 1) fail(ErrorKind::Unsupported, "the Euclidean norm in dimension > 1 is not piecewise polynomial");
            return (x(0) >= 0 ? 1.0 : -1.0) * Polynomial::variable(1, 0);
          },
          [&](const expr::NormLinf&) -> std::optional<Polynomial> { return argmax(linf_pieces(n)); },
          [&](const expr::Indicator& a) -> std::optional<Polynomial> {
            if (!a.set.contains(x, 0.0)) return std::nullopt;
            return Polynomial(n);
          },
          [&](const expr::Sum& a) -> std::optional<Polynomial> {
            Polynomial acc(n);
            for (const auto& t : a.terms) {
              auto p = local_selection(t, x);
              if (!p) return std::nullopt;
              acc = acc + *p;
            }
            return acc;
          },
          [&](const expr::Tilted& a) -> std::optional<Polynomial> {
            auto p = local_selection(a.base, x);
            if (!p) return std::nullopt;
            return *p + Polynomial::affine(-a.v, 0.0);
          },
          [&](const expr::Squared& a) -> std::optional<Polynomial> {
            auto p = local_selection(a.inner, x);
            if (!p) return std::nullopt;
            return *p * *p;
          },
          [&](const expr::Precomposed& a) -> std::optional<Polynomial> {
            auto p = local_selection(a.outer, a.map.value(x) + a.shift);
            if (!p) return std::nullopt;
            return p->compose(shifted_map(a.map, a.shift));
          },
          [&](const expr::Scaled& a) -> std::optional<Polynomial> {
            auto p = local_selection(a.base, x);
            if (!p) return std::nullopt;
            return a.factor * *p;
          },
      },
      f.node().v);
}

Decomposition1D decompose_1d(const FunctionExpr& f) {
  if (f.dim() != 1) fail(ErrorKind::DimensionMismatch, "decompose_1d needs a univariate function");
  Decomposition1D d;
  std::vector<double> roots;
  for (const auto& s : switching_polys(f)) {
    const Poly1 p = s.as_poly1();
    if (p.is_zero() || p.degree() == 0) continue;
    for (double r : real_roots(p)) roots.push_back(r);
  }
  std::sort(roots.begin(), roots.end());
  for (double r : roots) {
    if (d.breaks.empty() || r - d.breaks.back() > 1e-10 * (1.0 + std::abs(r))) d.breaks.push_back(r);
  }
  const std::size_t k = d.breaks.size();
  for (std::size_t i = 0; i <= k; ++i) {
    double mid;
    if (k == 0) {
      mid = 0.0;
    } else if (i == 0) {
      mid = d.breaks.front() - 1.0;
    } else if (i == k) {
      mid = d.breaks.back() + 1.0;
    } else {
      mid = 0.5 * (d.breaks[i - 1] + d.breaks[i]);
    }
    auto p = local_selection(f, vec({mid}));
    d.pieces.push_back(p ? std::optional<Poly1>(p->as_poly1()) : std::nullopt);
  }
  return d;
}

bool in_exact_subclass(const FunctionExpr& f) {
  if (f.dim() == 1) return true;
  if (f.dim() > 3) return false;
  for (const auto& s : switching_polys(f)) {
    if (s.degree() > 1) return false;
  }
  for (const auto& p : selection_polys(f)) {
    if (p.degree() > 2) return false;
  }
  return true;
}

namespace {

void add_point(std::vector<Vec>& pts, const Vec& p) { push_unique(pts, p, 1e-8); }

StationarySet stationary_1d(const FunctionExpr& f, const Vec& v, double tol) {
  StationarySet out;
  const Decomposition1D d = decompose_1d(f);
  std::vector<double> cand = d.breaks;
  for (std::size_t i = 0; i < d.pieces.size(); ++i) {
    if (!d.pieces[i]) continue;
    const double lo = i == 0 ? -std::numeric_limits<double>::infinity() : d.breaks[i - 1];
    const double hi = i == d.breaks.size() ? std::numeric_limits<double>::infinity() : d.breaks[i];
    const Poly1 q = d.pieces[i]->derivative() - Poly1::constant(v(0));
    double scale = 1.0;
    for (double c : d.pieces[i]->coeffs()) scale = std::max(scale, std::abs(c));
    if (q.is_zero(1e-12 * scale)) {
      out.continuum = true;
      continue;
    }
    if (q.degree() == 0) continue;
    for (double r : real_roots(q)) {
      if (r > lo && r < hi) cand.push_back(r);
    }
  }
  for (double c : cand) {
    const Vec x = vec({c});
    if (criticality_residual(f, v, x) <= tol) add_point(out.points, x);
  }
  return out;
}

// Stationarity of a selection polynomial P restricted to {E = 0}:
//   grad P(x) - v + J_E(x)' eta = 0,  E(x) = 0.
class StratumSystem {
 public:
  StratumSystem(const Polynomial& p, std::vector<Polynomial> eqs, const Vec& v)
      : n_(p.nvars()), k_(static_cast<int>(eqs.size())), v_(v), eqs_(std::move(eqs)) {
    for (int i = 0; i < n_; ++i) grad_p_.push_back(p.partial(i));
    for (const auto& e : eqs_) {
      std::vector<Polynomial> g;
      for (int i = 0; i < n_; ++i) g.push_back(e.partial(i));
      grad_e_.push_back(g);
    }
  }
  int size() const { return n_ + k_; }

  Vec residual(const Vec& z) const {
    const Vec x = z.head(n_);
    Vec r(n_ + k_);
    for (int i = 0; i < n_; ++i) {
      r(i) = grad_p_[static_cast<std::size_t>(i)](x) - v_(i);
      for (int j = 0; j < k_; ++j) r(i) += z(n_ + j) * grad_e_[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)](x);
    }
    for (int j = 0; j < k_; ++j) r(n_ + j) = eqs_[static_cast<std::size_t>(j)](x);
    return r;
  }

  Mat jacobian(const Vec& z) const {
    const Vec x = z.head(n_);
    Mat jac = Mat::Zero(n_ + k_, n_ + k_);
    for (int i = 0; i < n_; ++i) {
      for (int l = 0; l < n_; ++l) {
        double h = grad_p_[static_cast<std::size_t>(i)].partial(l)(x);
        for (int j = 0; j < k_; ++j) {
          h += z(n_ + j) * grad_e_[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)].partial(l)(x);
        }
        jac(i, l) = h;
      }
      for (int j = 0; j < k_; ++j) {
        const double g = grad_e_[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)](x);
        jac(i, n_ + j) = g;
        jac(n_ + j, i) = g;
      }
    }
    return jac;
  }

  /// Multipliers by least squares at x.
  Vec lift(const Vec& x) const {
    Vec z = Vec::Zero(n_ + k_);
    z.head(n_) = x;
    if (k_ == 0) return z;
    Mat je(n_, k_);
    Vec rhs(n_);
    for (int i = 0; i < n_; ++i) {
      rhs(i) = v_(i) - grad_p_[static_cast<std::size_t>(i)](x);
      for (int j = 0; j < k_; ++j) je(i, j) = grad_e_[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)](x);
    }
    z.tail(k_) = je.completeOrthogonalDecomposition().solve(rhs);
    return z;
  }

  std::optional<Vec> newton(Vec z) const {
    const double scale = 1.0 + v_.lpNorm<Eigen::Infinity>();
    Vec r = residual(z);
    for (int it = 0; it < 60; ++it) {
      if (r.norm() <= 1e-11 * (scale + z.lpNorm<Eigen::Infinity>())) return z;
      const Vec step = jacobian(z).completeOrthogonalDecomposition().solve(-r);
      double alpha = 1.0;
      bool moved = false;
      for (int h = 0; h < 40; ++h) {
        const Vec zn = z + alpha * step;
        const Vec rn = residual(zn);
        if (rn.norm() < r.norm()) {
          z = zn;
          r = rn;
          moved = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!moved) break;
    }
    if (r.norm() <= 1e-9 * (scale + z.lpNorm<Eigen::Infinity>())) return z;
    return std::nullopt;
  }

  /// x-parts of null directions of the Jacobian.
  std::vector<Vec> null_directions(const Vec& z) const {
    Eigen::JacobiSVD<Mat> svd(jacobian(z), Eigen::ComputeFullV);
    const Vec s = svd.singularValues();
    const double cut = 1e-9 * std::max(1.0, s.size() ? s(0) : 0.0);
    std::vector<Vec> out;
    for (Eigen::Index j = 0; j < s.size(); ++j) {
      if (s(j) > cut) continue;
      const Vec dx = svd.matrixV().col(j).head(n_);
      if (dx.norm() > 1e-6) out.push_back(dx.normalized());
    }
    return out;
  }

 private:
  int n_;
  int k_;
  Vec v_;
  std::vector<Polynomial> eqs_;
  std::vector<Polynomial> grad_p_;
  std::vector<std::vector<Polynomial>> grad_e_;
};


void subsets(int s, int max_size, std::vector<std::vector<int>>& out) {
  for (int size = max_size; size >= 0; --size) {
    std::vector<int> idx(static_cast<std::size_t>(size));
    std::function<void(int, int)> rec = [&](int start, int depth) {
      if (depth == size) {
        out.push_back(idx);
        if (out.size() > kFaceBudget) fail(ErrorKind::Budget, "too many strata");
        return;
      }
      for (int i = start; i < s; ++i) {
        idx[static_cast<std::size_t>(depth)] = i;
        rec(i + 1, depth + 1);
      }
    };
    rec(0, 0);
  }
}

StationarySet stationary_nd(const FunctionExpr& f, const Vec& v, const StationaryOptions& opts) {
  const int n = f.dim();
  const bool exact = in_exact_subclass(f);
  if (!exact && !opts.box) {
    fail(ErrorKind::Unsupported, "critical points outside the exact subclass need a bounding box");
  }
  const auto sw = switching_polys(f);
  const auto sel = selection_polys(f);
  std::vector<std::vector<int>> strata;
  subsets(static_cast<int>(sw.size()), std::min(n, static_cast<int>(sw.size())), strata);

  std::vector<Vec> base_starts{Vec::Zero(n)};
  if (opts.box) {
    const auto& [lo, hi] = *opts.box;
    base_starts = {0.5 * (lo + hi)};
    if (!exact) {
      for (const auto& p : halton(lo, hi, opts.starts)) base_starts.push_back(p);
    }
  }
  auto in_box = [&](const Vec& x) {
    if (!opts.box) return true;
    const auto& [lo, hi] = *opts.box;
    const double m = 1e-9 * (1.0 + (hi - lo).norm());
    return ((x - lo).array() >= -m).all() && ((hi - x).array() >= -m).all();
  };

  StationarySet out;
  out.exact = exact;
  std::vector<Vec> found;
  for (const auto& e : strata) {
    std::vector<Polynomial> eqs;
    for (int i : e) eqs.push_back(sw[static_cast<std::size_t>(i)]);
    for (const auto& p : sel) {
      const StratumSystem sys(p, eqs, v);
      std::vector<Vec> starts = base_starts;
      starts.insert(starts.end(), found.begin(), found.end());
      for (const auto& s : starts) {
        auto z = sys.newton(sys.lift(s));
        if (!z) continue;
        const Vec x = z->head(n);
        if (!in_box(x) || criticality_residual(f, v, x) > opts.tol) continue;
        add_point(out.points, x);
        add_point(found, x);
        if (out.continuum) continue;
        for (const auto& dx : sys.null_directions(*z)) {
          for (double sgn : {1.0, -1.0}) {
            auto z2 = sys.newton(sys.lift(x + sgn * 1e-2 * dx));
            if (!z2) continue;
            const Vec x2 = z2->head(n);
            if ((x2 - x).norm() > 1e-4 && in_box(x2) && criticality_residual(f, v, x2) <= opts.tol) {
              out.continuum = true;
            }
          }
        }
      }
    }
  }
  return out;
}

}  // namespace

StationarySet stationary_points(const FunctionExpr& f, const Vec& v, const StationaryOptions& opts) {
  require_dim(v.size(), f.dim(), "stationary_points");
  StationarySet out = f.dim() == 1 ? stationary_1d(f, v, opts.tol) : stationary_nd(f, v, opts);
  std::sort(out.points.begin(), out.points.end(), lex_less);
  return out;
}

}  // namespace tiltlab
