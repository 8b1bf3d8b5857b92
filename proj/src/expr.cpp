#include "tiltlab/expr.hpp"

#include <sstream>

namespace tiltlab {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// ---- SmoothMap -------------------------------------------------------------

SmoothMap::SmoothMap(std::vector<Polynomial> components) : components_(std::move(components)) {
  if (components_.empty()) fail(ErrorKind::DimensionMismatch, "smooth map needs a component");
  if (static_cast<int>(components_.size()) > kMaxDim) fail(ErrorKind::Budget, "smooth map output dimension > 8");
  for (const auto& c : components_) require_dim(c.nvars(), components_.front().nvars(), "SmoothMap");
}

SmoothMap SmoothMap::identity(int n) {
  std::vector<Polynomial> c;
  for (int i = 0; i < n; ++i) c.push_back(Polynomial::variable(n, i));
  return SmoothMap(c);
}

SmoothMap SmoothMap::linear(const Mat& a) {
  std::vector<Polynomial> c;
  for (Eigen::Index i = 0; i < a.rows(); ++i) c.push_back(Polynomial::affine(a.row(i).transpose(), 0.0));
  return SmoothMap(c);
}

bool SmoothMap::is_affine() const {
  for (const auto& c : components_) {
    if (!c.is_affine()) return false;
  }
  return true;
}

Vec SmoothMap::value(const Vec& x) const {
  require_dim(x.size(), n(), "SmoothMap value");
  Vec out(m());
  for (int i = 0; i < m(); ++i) out(i) = components_[i](x);
  return out;
}

Mat SmoothMap::jacobian(const Vec& x) const {
  require_dim(x.size(), n(), "SmoothMap jacobian");
  Mat j(m(), n());
  for (int i = 0; i < m(); ++i) j.row(i) = components_[i].gradient(x).transpose();
  return j;
}

Vec SmoothMap::hessian_form(const Vec& x, const Vec& u) const {
  require_dim(u.size(), n(), "SmoothMap hessian_form");
  Vec out(m());
  for (int i = 0; i < m(); ++i) out(i) = u.dot(components_[i].hessian(x) * u);
  return out;
}

Vec SmoothJet::hessian_form(const Vec& u) const {
  Vec out(static_cast<Eigen::Index>(hessians.size()));
  for (std::size_t i = 0; i < hessians.size(); ++i) {
    require_dim(u.size(), hessians[i].cols(), "hessian_form");
    out(static_cast<Eigen::Index>(i)) = u.dot(hessians[i] * u);
  }
  return out;
}

SmoothJet smooth_jet(const SmoothMap& g, const Vec& x) {
  SmoothJet j{g.value(x), g.jacobian(x), {}};
  for (const auto& c : g.components()) j.hessians.push_back(c.hessian(x));
  return j;
}

// ---- FunctionExpr ----------------------------------------------------------

FunctionExpr::FunctionExpr(std::shared_ptr<const ExprNode> node, int dim) : node_(std::move(node)), dim_(dim) {
  if (dim_ < 1 || dim_ > kMaxDim) fail(ErrorKind::Budget, "function dimension must be in [1, 8]");
}

namespace {
template <class T>
FunctionExpr make(T alt, int dim) {
  return FunctionExpr(std::make_shared<const ExprNode>(ExprNode{std::move(alt)}), dim);
}
}  // namespace

FunctionExpr polynomial(const Polynomial& p) { return make(expr::Poly{p}, p.nvars()); }

FunctionExpr max_of(const std::vector<Polynomial>& pieces) {
  if (pieces.empty()) fail(ErrorKind::DimensionMismatch, "max of an empty family");
  for (const auto& p : pieces) require_dim(p.nvars(), pieces.front().nvars(), "max_of");
  return make(expr::MaxOfSmooth{pieces}, pieces.front().nvars());
}

FunctionExpr norm_l1(int n) { return make(expr::NormL1{}, n); }
FunctionExpr norm_l2(int n) { return make(expr::NormL2{}, n); }
FunctionExpr norm_linf(int n) { return make(expr::NormLinf{}, n); }

FunctionExpr indicator(const Polyhedron& set) {
  if (set.is_empty()) fail(ErrorKind::Infeasible, "indicator of an empty polyhedron is not proper");
  return make(expr::Indicator{set}, set.dim());
}

FunctionExpr sum(const std::vector<FunctionExpr>& terms) {
  if (terms.empty()) fail(ErrorKind::DimensionMismatch, "empty sum");
  for (const auto& t : terms) require_dim(t.dim(), terms.front().dim(), "sum");
  FunctionExpr f = make(expr::Sum{terms}, terms.front().dim());
  if (has_indicator(f)) {
    if (auto dom = polyhedral_domain(f); dom && dom->is_empty()) {
      fail(ErrorKind::Infeasible, "sum has an empty domain");
    }
  }
  return f;
}

FunctionExpr squared(const FunctionExpr& inner) { return make(expr::Squared{inner}, inner.dim()); }

FunctionExpr scaled(double factor, const FunctionExpr& base) {
  if (!std::isfinite(factor)) fail(ErrorKind::DomainViolation, "non-finite scale factor");
  return make(expr::Scaled{factor, base}, base.dim());
}

FunctionExpr zero_function(int n) { return polynomial(Polynomial(n)); }

FunctionExpr tilt(const FunctionExpr& f, const Vec& v) {
  require_dim(v.size(), f.dim(), "tilt");
  if (!v.allFinite()) fail(ErrorKind::DomainViolation, "non-finite tilt");
  return make(expr::Tilted{f, v}, f.dim());
}

FunctionExpr shift(const FunctionExpr& h, const SmoothMap& g, const Vec& y) {
  require_dim(g.m(), h.dim(), "shift: map output vs outer function");
  require_dim(y.size(), g.m(), "shift: y");
  return make(expr::Precomposed{h, g, y}, g.n());
}

ExtReal evaluate(const FunctionExpr& f, const Vec& x, double tol) {
  require_dim(x.size(), f.dim(), "evaluate");
  return std::visit(
      overloaded{
          [&](const expr::Poly& a) { return ExtReal::finite(a.p(x)); },
          [&](const expr::MaxOfSmooth& a) {
            double best = -std::numeric_limits<double>::infinity();
            for (const auto& p : a.pieces) best = std::max(best, p(x));
            return ExtReal::finite(best);
          },
          [&](const expr::NormL1&) { return ExtReal::finite(x.lpNorm<1>()); },
          [&](const expr::NormL2&) { return ExtReal::finite(x.norm()); },
          [&](const expr::NormLinf&) { return ExtReal::finite(x.lpNorm<Eigen::Infinity>()); },
          [&](const expr::Indicator& a) {
            return a.set.contains(x, tol) ? ExtReal::finite(0.0) : ExtReal::plus_infinity();
          },
          [&](const expr::Sum& a) {
            ExtReal acc = ExtReal::finite(0.0);
            for (const auto& t : a.terms) {
              acc = acc + evaluate(t, x, tol);
              if (acc.is_infinite()) break;
            }
            return acc;
          },
          [&](const expr::Tilted& a) { return evaluate(a.base, x, tol) - a.v.dot(x); },
          [&](const expr::Squared& a) {
            const ExtReal g = evaluate(a.inner, x, tol);
            if (g.is_infinite()) return g;
            return ExtReal::finite(g.value() * g.value());
          },
          [&](const expr::Precomposed& a) { return evaluate(a.outer, a.map.value(x) + a.shift, tol); },
          [&](const expr::Scaled& a) {
            const ExtReal g = evaluate(a.base, x, tol);
            if (g.is_infinite()) return g;
            return ExtReal::finite(a.factor * g.value());
          },
      },
      f.node().v);
}

namespace {

bool poly_convex(const Polynomial& p) {
  if (p.degree() <= 1) return true;
  if (p.degree() == 2) {
    const Mat h = p.hessian(Vec::Zero(p.nvars()));
    Eigen::SelfAdjointEigenSolver<Mat> es(h);
    return es.eigenvalues().minCoeff() >= -1e-12;
  }
  if (p.nvars() == 1) {
    const Poly1 q = p.as_poly1().derivative().derivative();
    if (q.is_zero()) return true;
    if (q.degree() == 0) return q(0.0) >= -1e-12;
    if (q.degree() % 2 == 1 || q.coeffs().back() < 0) return false;
    for (double r : real_roots(q.derivative())) {
      if (q(r) < -1e-12) return false;
    }
    return true;
  }
  return false;
}

}  // namespace

bool is_convex(const FunctionExpr& f) {
  return std::visit(overloaded{
                        [](const expr::Poly& a) { return poly_convex(a.p); },
                        [](const expr::MaxOfSmooth& a) {
                          for (const auto& p : a.pieces) {
                            if (!poly_convex(p)) return false;
                          }
                          return true;
                        },
                        [](const expr::NormL1&) { return true; },
                        [](const expr::NormL2&) { return true; },
                        [](const expr::NormLinf&) { return true; },
                        [](const expr::Indicator&) { return true; },
                        [](const expr::Sum& a) {
                          for (const auto& t : a.terms) {
                            if (!is_convex(t)) return false;
                          }
                          return true;
                        },
                        [](const expr::Tilted& a) { return is_convex(a.base); },
                        [](const expr::Squared& a) { return is_convex(a.inner) && is_nonnegative(a.inner); },
                        [](const expr::Precomposed& a) { return a.map.is_affine() && is_convex(a.outer); },
                        [](const expr::Scaled& a) { return a.factor >= 0 && is_convex(a.base); },
                    },
                    f.node().v);
}

bool has_indicator(const FunctionExpr& f) {
  return std::visit(overloaded{
                        [](const expr::Indicator&) { return true; },
                        [](const expr::Sum& a) {
                          for (const auto& t : a.terms) {
                            if (has_indicator(t)) return true;
                          }
                          return false;
                        },
                        [](const expr::Tilted& a) { return has_indicator(a.base); },
                        [](const expr::Squared& a) { return has_indicator(a.inner); },
                        [](const expr::Precomposed& a) { return has_indicator(a.outer); },
                        [](const expr::Scaled& a) { return has_indicator(a.base); },
                        [](const auto&) { return false; },
                    },
                    f.node().v);
}

bool is_nonnegative(const FunctionExpr& f) {
  return std::visit(overloaded{
                        [](const expr::NormL1&) { return true; },
                        [](const expr::NormL2&) { return true; },
                        [](const expr::NormLinf&) { return true; },
                        [](const expr::Indicator&) { return true; },
                        [](const expr::Squared&) { return true; },
                        [](const expr::Poly& a) { return a.p.degree() == 0 && !a.p.is_zero() ? a.p(Vec::Zero(a.p.nvars())) >= 0 : a.p.is_zero(); },
                        [](const expr::Sum& a) {
                          for (const auto& t : a.terms) {
                            if (!is_nonnegative(t)) return false;
                          }
                          return true;
                        },
                        [](const expr::Precomposed& a) { return is_nonnegative(a.outer); },
                        [](const expr::Scaled& a) { return a.factor >= 0 && is_nonnegative(a.base); },
                        [](const auto&) { return false; },
                    },
                    f.node().v);
}

bool is_smooth(const FunctionExpr& f) {
  return std::visit(overloaded{
                        [](const expr::Poly&) { return true; },
                        [](const expr::MaxOfSmooth& a) { return a.pieces.size() == 1; },
                        [](const expr::Sum& a) {
                          for (const auto& t : a.terms) {
                            if (!is_smooth(t)) return false;
                          }
                          return true;
                        },
                        [](const expr::Tilted& a) { return is_smooth(a.base); },
                        [](const expr::Squared& a) { return is_smooth(a.inner); },
                        [](const expr::Precomposed& a) { return is_smooth(a.outer); },
                        [](const expr::Scaled& a) { return is_smooth(a.base); },
                        [](const auto&) { return false; },
                    },
                    f.node().v);
}

std::optional<Polyhedron> polyhedral_domain(const FunctionExpr& f) {
  const int n = f.dim();
  return std::visit(
      overloaded{
          [&](const expr::Indicator& a) -> std::optional<Polyhedron> { return a.set; },
          [&](const expr::Sum& a) -> std::optional<Polyhedron> {
            Polyhedron acc = Polyhedron::whole(n);
            for (const auto& t : a.terms) {
              auto d = polyhedral_domain(t);
              if (!d) return std::nullopt;
              acc = acc.intersect(*d);
            }
            return acc;
          },
          [&](const expr::Tilted& a) { return polyhedral_domain(a.base); },
          [&](const expr::Squared& a) { return polyhedral_domain(a.inner); },
          [&](const expr::Scaled& a) { return polyhedral_domain(a.base); },
          [&](const expr::Precomposed& a) -> std::optional<Polyhedron> {
            auto d = polyhedral_domain(a.outer);
            if (!d) return std::nullopt;
            if (d->rows() == 0) return Polyhedron::whole(n);
            if (!a.map.is_affine()) return std::nullopt;
            const Vec zero = Vec::Zero(n);
            const Mat j = a.map.jacobian(zero);
            const Vec c = a.map.value(zero) + a.shift;
            return Polyhedron(d->a() * j, d->b() - d->a() * c);
          },
          [&](const auto&) -> std::optional<Polyhedron> { return Polyhedron::whole(n); },
      },
      f.node().v);
}

namespace {
std::string poly_str(const Polynomial& p) {
  std::ostringstream os;
  os.precision(6);
  bool first = true;
  for (const auto& [e, c] : p.terms()) {
    if (!first) os << " + ";
    first = false;
    os << c;
    for (std::size_t i = 0; i < e.size(); ++i) {
      if (e[i] == 1) os << "*x" << i;
      if (e[i] > 1) os << "*x" << i << "^" << e[i];
    }
  }
  if (first) os << "0";
  return os.str();
}
}  // namespace

std::string describe(const FunctionExpr& f) {
  return std::visit(overloaded{
                        [](const expr::Poly& a) { return "poly(" + poly_str(a.p) + ")"; },
                        [](const expr::MaxOfSmooth& a) {
                          std::string s = "max(";
                          for (std::size_t i = 0; i < a.pieces.size(); ++i) {
                            s += (i ? ", " : "") + poly_str(a.pieces[i]);
                          }
                          return s + ")";
                        },
                        [](const expr::NormL1&) { return std::string("norm_l1"); },
                        [](const expr::NormL2&) { return std::string("norm_l2"); },
                        [](const expr::NormLinf&) { return std::string("norm_linf"); },
                        [](const expr::Indicator& a) { return "indicator(" + std::to_string(a.set.rows()) + " rows)"; },
                        [](const expr::Sum& a) {
                          std::string s = "sum(";
                          for (std::size_t i = 0; i < a.terms.size(); ++i) s += (i ? ", " : "") + describe(a.terms[i]);
                          return s + ")";
                        },
                        [](const expr::Tilted& a) { return "tilted(" + describe(a.base) + ")"; },
                        [](const expr::Squared& a) { return "squared(" + describe(a.inner) + ")"; },
                        [](const expr::Precomposed& a) { return "precomposed(" + describe(a.outer) + ")"; },
                        [](const expr::Scaled& a) { return std::to_string(a.factor) + "*" + describe(a.base); },
                    },
                    f.node().v);
}

}  // namespace tiltlab
