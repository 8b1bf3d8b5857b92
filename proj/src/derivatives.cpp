#include "tiltlab/derivatives.hpp"

#include <algorithm>

#include "tiltlab/linalg.hpp"
#include "tiltlab/lp.hpp"

namespace tiltlab {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

namespace {

struct Jet {
  double val;
  Vec grad;
  Mat hess;
};

bool near_top(double val, double top, double atol) { return top - val <= atol * (1.0 + std::abs(top)); }

double dir_tol(const Vec& u) { return 1e-9 * (1.0 + u.norm()); }

std::vector<Jet> active_jets(const std::vector<Jet>& jets, double atol) {
  double top = -std::numeric_limits<double>::infinity();
  for (const auto& j : jets) top = std::max(top, j.val);
  std::vector<Jet> out;
  for (const auto& j : jets) {
    if (near_top(j.val, top, atol)) out.push_back(j);
  }
  return out;
}

double max_first(const std::vector<Jet>& act, const Vec& u) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& j : act) best = std::max(best, j.grad.dot(u));
  return best;
}

double max_second(const std::vector<Jet>& act, const Vec& u, const Vec& w) {
  const double d1 = max_first(act, u);
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& j : act) {
    if (d1 - j.grad.dot(u) <= 1e-9 * (1.0 + std::abs(d1) + u.norm() * j.grad.norm())) {
      best = std::max(best, u.dot(j.hess * u) + j.grad.dot(w));
    }
  }
  return best;
}

std::vector<Jet> linear_jets(const std::vector<Vec>& grads, const Vec& x) {
  std::vector<Jet> out;
  const Mat zero = Mat::Zero(x.size(), x.size());
  for (const auto& g : grads) out.push_back({g.dot(x), g, zero});
  return out;
}

std::vector<Vec> linf_grads(int n) {
  std::vector<Vec> out;
  for (int i = 0; i < n; ++i) {
    for (double s : {-1.0, 1.0}) {
      Vec e = Vec::Zero(n);
      e(i) = s;
      out.push_back(e);
    }
  }
  return out;
}

ExtReal d1(const FunctionExpr& f, const Vec& x, const Vec& u, double atol);

ExtReal d1(const FunctionExpr& f, const Vec& x, const Vec& u, double atol) {
  const int n = f.dim();
  return std::visit(
      overloaded{
          [&](const expr::Poly& a) { return ExtReal::finite(a.p.gradient(x).dot(u)); },
          [&](const expr::MaxOfSmooth& a) {
            std::vector<Jet> jets;
            for (const auto& p : a.pieces) jets.push_back({p(x), p.gradient(x), Mat()});
            return ExtReal::finite(max_first(active_jets(jets, atol), u));
          },
          [&](const expr::NormL1&) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += std::abs(x(i)) <= atol ? std::abs(u(i)) : (x(i) > 0 ? u(i) : -u(i));
            return ExtReal::finite(s);
          },
          [&](const expr::NormL2&) {
            const double r = x.norm();
            return ExtReal::finite(r > atol ? x.dot(u) / r : u.norm());
          },
          [&](const expr::NormLinf&) {
            return ExtReal::finite(max_first(active_jets(linear_jets(linf_grads(n), x), atol), u));
          },
          [&](const expr::Indicator& a) {
            for (int i : a.set.active_set(x, atol)) {
              if (a.set.a().row(i).dot(u) > dir_tol(u)) return ExtReal::plus_infinity();
            }
            return ExtReal::finite(0.0);
          },
          [&](const expr::Sum& a) {
            ExtReal acc = ExtReal::finite(0.0);
            for (const auto& t : a.terms) acc = acc + d1(t, x, u, atol);
            return acc;
          },
          [&](const expr::Tilted& a) { return d1(a.base, x, u, atol) - a.v.dot(u); },
          [&](const expr::Squared& a) {
            const double g = evaluate(a.inner, x).value();
            return d1(a.inner, x, u, atol).scaled(2.0 * g);
          },
          [&](const expr::Precomposed& a) {
            return d1(a.outer, a.map.value(x) + a.shift, a.map.jacobian(x) * u, atol);
          },
          [&](const expr::Scaled& a) {
            const ExtReal d = d1(a.base, x, u, atol);
            if (a.factor >= 0) return d.scaled(a.factor);
            return ExtReal::finite(a.factor * d.value());
          },
      },
      f.node().v);
}

ExtReal d2(const FunctionExpr& f, const Vec& x, const Vec& u, const Vec& w, double atol) {
  const int n = f.dim();
  return std::visit(
      overloaded{
          [&](const expr::Poly& a) { return ExtReal::finite(u.dot(a.p.hessian(x) * u) + a.p.gradient(x).dot(w)); },
          [&](const expr::MaxOfSmooth& a) {
            std::vector<Jet> jets;
            for (const auto& p : a.pieces) jets.push_back({p(x), p.gradient(x), p.hessian(x)});
            return ExtReal::finite(max_second(active_jets(jets, atol), u, w));
          },
          [&](const expr::NormL1&) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) {
              if (std::abs(x(i)) > atol) {
                s += x(i) > 0 ? w(i) : -w(i);
              } else if (std::abs(u(i)) > dir_tol(u)) {
                s += u(i) > 0 ? w(i) : -w(i);
              } else {
                s += std::abs(w(i));
              }
            }
            return ExtReal::finite(s);
          },
          [&](const expr::NormL2&) {
            const double r = x.norm();
            if (r > atol) {
              const Vec e = x / r;
              const double curv = (u.squaredNorm() - std::pow(e.dot(u), 2)) / r;
              return ExtReal::finite(curv + e.dot(w));
            }
            if (u.norm() > dir_tol(u)) return ExtReal::finite(u.dot(w) / u.norm());
            return ExtReal::finite(w.norm());
          },
          [&](const expr::NormLinf&) {
            return ExtReal::finite(max_second(active_jets(linear_jets(linf_grads(n), x), atol), u, w));
          },
          [&](const expr::Indicator& a) {
            for (int i : a.set.active_set(x, atol)) {
              const Vec row = a.set.a().row(i).transpose();
              if (std::abs(row.dot(u)) <= dir_tol(u) && row.dot(w) > 1e-9 * (1.0 + w.norm())) {
                return ExtReal::plus_infinity();
              }
            }
            return ExtReal::finite(0.0);
          },
          [&](const expr::Sum& a) {
            ExtReal acc = ExtReal::finite(0.0);
            for (const auto& t : a.terms) acc = acc + d2(t, x, u, w, atol);
            return acc;
          },
          [&](const expr::Tilted& a) { return d2(a.base, x, u, w, atol) - a.v.dot(w); },
          [&](const expr::Squared& a) {
            const double g = evaluate(a.inner, x).value();
            const double dg = d1(a.inner, x, u, atol).value();
            return ExtReal::finite(2.0 * dg * dg) + d2(a.inner, x, u, w, atol).scaled(2.0 * g);
          },
          [&](const expr::Precomposed& a) {
            const Mat j = a.map.jacobian(x);
            return d2(a.outer, a.map.value(x) + a.shift, j * u, a.map.hessian_form(x, u) + j * w, atol);
          },
          [&](const expr::Scaled& a) {
            const ExtReal d = d2(a.base, x, u, w, atol);
            if (a.factor >= 0) return d.scaled(a.factor);
            return ExtReal::finite(a.factor * d.value());
          },
      },
      f.node().v);
}

// Net of perturbations {p} and p +- rho e_i.
std::vector<Vec> net(const Vec& p, double rho) {
  std::vector<Vec> out{p};
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    for (double s : {-1.0, 1.0}) {
      Vec q = p;
      q(i) += s * rho;
      out.push_back(q);
    }
  }
  return out;
}

constexpr double kEps = std::numeric_limits<double>::epsilon();

// w -> d^2 f(x)(u|w) for fixed (x, u) is a finite min of LP-representable
// functions  w -> inf_s { cw.w + cs.s + d : aw w + as s <= b }.
struct WModel {
  int k = 0;
  Vec cw;
  Vec cs;
  double d = 0.0;
  Mat aw;
  Mat as;
  Vec b;
  // Set when the model is a plain max of affine functions (no other constraints).
  std::optional<std::vector<std::pair<Vec, double>>> maxform;
};
using WBranches = std::vector<WModel>;

constexpr std::size_t kMaxBranches = 256;

WModel w_max(int n, const std::vector<std::pair<Vec, double>>& pieces) {
  WModel m;
  m.maxform = pieces;
  if (pieces.size() == 1) {
    m.cw = pieces[0].first;
    m.cs = Vec(0);
    m.d = pieces[0].second;
    m.aw = Mat(0, n);
    m.as = Mat(0, 0);
    m.b = Vec(0);
    return m;
  }
  const auto r = static_cast<Eigen::Index>(pieces.size());
  m.k = 1;
  m.cw = Vec::Zero(n);
  m.cs = Vec::Ones(1);
  m.aw = Mat(r, n);
  m.as = Mat::Constant(r, 1, -1.0);
  m.b = Vec(r);
  for (Eigen::Index i = 0; i < r; ++i) {
    m.aw.row(i) = pieces[static_cast<std::size_t>(i)].first.transpose();
    m.b(i) = -pieces[static_cast<std::size_t>(i)].second;
  }
  return m;
}

WModel w_affine(const Vec& a, double q) { return w_max(static_cast<int>(a.size()), {{a, q}}); }

WModel w_add(const WModel& x, const WModel& y) {
  WModel m;
  const int n = static_cast<int>(x.cw.size());
  m.k = x.k + y.k;
  m.cw = x.cw + y.cw;
  m.cs = Vec(m.k);
  m.cs << x.cs, y.cs;
  m.d = x.d + y.d;
  m.aw = Mat(x.aw.rows() + y.aw.rows(), n);
  m.aw << x.aw, y.aw;
  m.as = Mat::Zero(m.aw.rows(), m.k);
  m.as.topLeftCorner(x.as.rows(), x.k) = x.as;
  m.as.bottomRightCorner(y.as.rows(), y.k) = y.as;
  m.b = Vec(m.aw.rows());
  m.b << x.b, y.b;
  if (x.maxform && y.maxform && x.maxform->size() * y.maxform->size() <= 64) {
    std::vector<std::pair<Vec, double>> pcs;
    for (const auto& [a, p] : *x.maxform) {
      for (const auto& [c, q] : *y.maxform) pcs.emplace_back(a + c, p + q);
    }
    m.maxform = pcs;
  }
  return m;
}

WModel w_scale(WModel m, double c) {
  m.cw *= c;
  m.cs *= c;
  m.d *= c;
  if (m.maxform) {
    for (auto& [a, q] : *m.maxform) {
      a *= c;
      q *= c;
    }
  }
  return m;
}

// w' = h + j w, outer model on R^m.
WModel w_compose(const WModel& o, const Mat& j, const Vec& h) {
  WModel m = o;
  m.cw = j.transpose() * o.cw;
  m.d = o.d + o.cw.dot(h);
  m.aw = o.aw * j;
  m.b = o.b - o.aw * h;
  if (o.maxform) {
    for (auto& [a, q] : *m.maxform) {
      q += a.dot(h);
      a = j.transpose() * a;
    }
  }
  return m;
}

WBranches w_sum(const WBranches& x, const WBranches& y) {
  if (x.size() * y.size() > kMaxBranches) fail(ErrorKind::Budget, "too many parabolic branches");
  WBranches out;
  for (const auto& a : x) {
    for (const auto& b : y) out.push_back(w_add(a, b));
  }
  return out;
}

std::vector<std::pair<Vec, double>> attaining(const std::vector<Jet>& act, const Vec& u) {
  const double top = max_first(act, u);
  std::vector<std::pair<Vec, double>> out;
  for (const auto& j : act) {
    if (top - j.grad.dot(u) <= 1e-9 * (1.0 + std::abs(top) + u.norm() * j.grad.norm())) {
      out.emplace_back(j.grad, u.dot(j.hess * u));
    }
  }
  return out;
}

WBranches w_model(const FunctionExpr& f, const Vec& x, const Vec& u, double atol) {
  const int n = f.dim();
  return std::visit(
      overloaded{
          [&](const expr::Poly& a) -> WBranches { return {w_affine(a.p.gradient(x), u.dot(a.p.hessian(x) * u))}; },
          [&](const expr::MaxOfSmooth& a) -> WBranches {
            std::vector<Jet> jets;
            for (const auto& p : a.pieces) jets.push_back({p(x), p.gradient(x), p.hessian(x)});
            return {w_max(n, attaining(active_jets(jets, atol), u))};
          },
          [&](const expr::NormL1&) -> WBranches {
            WModel acc = w_affine(Vec::Zero(n), 0.0);
            for (int i = 0; i < n; ++i) {
              Vec e = Vec::Zero(n);
              e(i) = 1.0;
              if (std::abs(x(i)) > atol) {
                acc = w_add(acc, w_affine(x(i) > 0 ? e : Vec(-e), 0.0));
              } else if (std::abs(u(i)) > dir_tol(u)) {
                acc = w_add(acc, w_affine(u(i) > 0 ? e : Vec(-e), 0.0));
              } else {
                acc = w_add(acc, w_max(n, {{e, 0.0}, {-e, 0.0}}));
              }
            }
            return {acc};
          },
          [&](const expr::NormL2&) -> WBranches {
            const double r = x.norm();
            if (r > atol) {
              const Vec e = x / r;
              return {w_affine(e, (u.squaredNorm() - std::pow(e.dot(u), 2)) / r)};
            }
            if (u.norm() > dir_tol(u)) return {w_affine(u / u.norm(), 0.0)};
            fail(ErrorKind::Unsupported, "w -> |w|_2 is not polyhedral");
          },
          [&](const expr::NormLinf&) -> WBranches {
            return {w_max(n, attaining(active_jets(linear_jets(linf_grads(n), x), atol), u))};
          },
          [&](const expr::Indicator& a) -> WBranches {
            std::vector<Vec> rows;
            for (int i : a.set.active_set(x, atol)) {
              const Vec row = a.set.a().row(i).transpose();
              if (std::abs(row.dot(u)) <= dir_tol(u)) rows.push_back(row);
            }
            WModel m = w_affine(Vec::Zero(n), 0.0);
            m.aw = stack_rows(rows, n);
            m.b = Vec::Zero(m.aw.rows());
            m.as = Mat(m.aw.rows(), 0);
            if (!rows.empty()) m.maxform.reset();
            return {m};
          },
          [&](const expr::Sum& a) -> WBranches {
            WBranches acc{w_affine(Vec::Zero(n), 0.0)};
            for (const auto& t : a.terms) acc = w_sum(acc, w_model(t, x, u, atol));
            return acc;
          },
          [&](const expr::Tilted& a) -> WBranches {
            return w_sum(w_model(a.base, x, u, atol), {w_affine(-a.v, 0.0)});
          },
          [&](const expr::Squared& a) -> WBranches {
            const double g = evaluate(a.inner, x).value();
            const double dg = d1(a.inner, x, u, atol).value();
            WBranches out;
            for (const auto& m : w_model(a.inner, x, u, atol)) {
              out.push_back(w_add(w_scale(m, 2.0 * g), w_affine(Vec::Zero(n), 2.0 * dg * dg)));
            }
            return out;
          },
          [&](const expr::Precomposed& a) -> WBranches {
            const Mat j = a.map.jacobian(x);
            const Vec h = a.map.hessian_form(x, u);
            WBranches out;
            for (const auto& m : w_model(a.outer, a.map.value(x) + a.shift, j * u, atol)) {
              out.push_back(w_compose(m, j, h));
            }
            return out;
          },
          [&](const expr::Scaled& a) -> WBranches {
            WBranches out;
            for (const auto& m : w_model(a.base, x, u, atol)) {
              if (a.factor >= 0) {
                out.push_back(w_scale(m, a.factor));
                continue;
              }
              if (!m.maxform) fail(ErrorKind::Unsupported, "negative multiple of a constrained parabolic model");
              for (const auto& [c, q] : *m.maxform) out.push_back(w_affine(a.factor * c, a.factor * q));
            }
            if (out.size() > kMaxBranches) fail(ErrorKind::Budget, "too many parabolic branches");
            return out;
          },
      },
      f.node().v);
}

}  // namespace

ExtReal subderivative(const FunctionExpr& f, const Vec& x, const Vec& u, double atol) {
  require_dim(u.size(), f.dim(), "subderivative");
  require_in_domain(f, x, "subderivative");
  return d1(f, x, u, atol);
}

ExtReal parabolic_subderivative(const FunctionExpr& f, const Vec& x, const Vec& u, const Vec& w, double atol) {
  require_dim(u.size(), f.dim(), "parabolic_subderivative");
  require_dim(w.size(), f.dim(), "parabolic_subderivative");
  require_in_domain(f, x, "parabolic_subderivative");
  if (d1(f, x, u, atol).is_infinite()) fail(ErrorKind::DomainViolation, "direction outside dom df(x)");
  return d2(f, x, u, w, atol);
}

double second_subderivative(const FunctionExpr& f, const Vec& x, const Vec& u, double atol) {
  require_dim(u.size(), f.dim(), "second_subderivative");
  require_in_domain(f, x, "second_subderivative");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  if (d1(f, x, u, atol).is_infinite()) return kInf;
  const int n = f.dim();
  double best = kInf;
  for (const auto& m : w_model(f, x, u, atol)) {
    LinearProgram lp(n + m.k);
    lp.c << m.cw, m.cs;
    lp.a_ub = Mat(m.aw.rows(), n + m.k);
    lp.a_ub << m.aw, m.as;
    lp.b_ub = m.b;
    const LpResult r = solve_lp(lp);
    if (r.status == LpStatus::Unbounded) return -kInf;
    if (r.status == LpStatus::Optimal) best = std::min(best, r.objective + m.d);
  }
  return best;
}

ExtReal subderivative_numeric(const FunctionExpr& f, const Vec& x, const Vec& u) {
  require_dim(u.size(), f.dim(), "subderivative_numeric");
  const double f0 = evaluate(f, x).value();
  // Two-point fit D(s) = A s + b s^2 at s = t, t/2 gives A with O(t^2) error.
  auto estimate = [&](double t, double rho) -> std::optional<double> {
    std::optional<double> best;
    for (const auto& d : net(u, rho)) {
      const ExtReal a = evaluate(f, x + t * d);
      const ExtReal b = evaluate(f, x + 0.5 * t * d);
      if (a.is_infinite() || b.is_infinite()) continue;
      const double val = (4.0 * (b.value() - f0) - (a.value() - f0)) / t;
      if (!best || val < *best) best = val;
    }
    return best;
  };
  const double scale = 1.0 + u.norm();
  for (double rho_factor : {1e-3, 0.0}) {
    // First pass: net radius proportional to t, so perturbations vanish in the
    // limit. Fallback: a fixed 1e-3 net for directions tangent to curved sets.
    bool have = false;
    double chosen = 0.0;
    for (double t : kLadder) {
      const double rho = rho_factor > 0 ? rho_factor * t * scale : 1e-3 * scale;
      const auto val = estimate(t, rho);
      if (!val) {
        have = false;
        continue;
      }
      const double round = 10.0 * kEps * (1.0 + std::abs(f0)) / t;
      if (!have || round <= 1e-9 * (1.0 + std::abs(*val))) {
        chosen = *val;
        have = true;
      }
    }
    if (have) return ExtReal::finite(chosen);
  }
  return ExtReal::plus_infinity();
}

ExtReal parabolic_numeric(const FunctionExpr& f, const Vec& x, const Vec& u, const Vec& w) {
  require_dim(u.size(), f.dim(), "parabolic_numeric");
  require_dim(w.size(), f.dim(), "parabolic_numeric");
  const double f0 = evaluate(f, x).value();
  // D(s) = A s + (B/2) s^2 + C s^3 fitted at s = t, t/2, t/4.
  Eigen::Matrix3d m;
  m << 1.0, 1.0, 1.0, 0.5, 0.25, 0.125, 0.25, 0.0625, 0.015625;
  const Eigen::Matrix3d minv = m.inverse();
  auto estimate = [&](double t, double rho) -> std::optional<double> {
    std::optional<double> best;
    for (const auto& d : net(w, rho)) {
      Eigen::Vector3d e;
      bool ok = true;
      for (int k = 0; k < 3; ++k) {
        const double s = t / std::pow(2.0, k);
        const ExtReal val = evaluate(f, x + s * u + 0.5 * s * s * d);
        if (val.is_infinite()) {
          ok = false;
          break;
        }
        e(k) = (val.value() - f0) / t;
      }
      if (!ok) continue;
      const double b = minv.row(1).dot(e);
      const double val = 2.0 * b / t;
      if (!best || val < *best) best = val;
    }
    return best;
  };
  const double scale = 1.0 + w.norm();
  for (double rho_factor : {1e-3, 0.0}) {
    bool have = false;
    double chosen = 0.0;
    for (double t : kLadder) {
      const double rho = rho_factor > 0 ? rho_factor * t * scale : 1e-3 * scale;
      const auto val = estimate(t, rho);
      if (!val) {
        have = false;
        continue;
      }
      const double round = 100.0 * kEps * (1.0 + std::abs(f0)) / (t * t);
      if (!have || round <= 1e-7 * (1.0 + std::abs(*val))) {
        chosen = *val;
        have = true;
      }
    }
    if (have) return ExtReal::finite(chosen);
  }
  return ExtReal::plus_infinity();
}

// ---- tangent sets -----------------------------------------------------------

double SmoothSet::violation(const Vec& x) const {
  require_dim(x.size(), n, "SmoothSet");
  double v = 0.0;
  if (eq) v = std::max(v, eq->value(x).cwiseAbs().maxCoeff());
  if (ineq) v = std::max(v, ineq->value(x).maxCoeff());
  return v;
}

bool SecondOrderTangentRep::arc_test(const Vec& w) const {
  constexpr double t = 1e-4;
  const Vec p = x + t * u + 0.5 * t * t * w;
  const double viol = std::visit(overloaded{
                                     [&](const Polyhedron& q) {
                                       return q.rows() ? std::max(0.0, (q.a() * p - q.b()).maxCoeff()) : 0.0;
                                     },
                                     [&](const SmoothSet& q) { return q.violation(p); },
                                 },
                                 base);
  return viol / (0.5 * t * t) <= 1e-3;
}

TangentSets tangent_sets(const TangentBase& q, const Vec& x, const Vec& u, double atol) {
  return std::visit(
      overloaded{
          [&](const Polyhedron& p) {
            const int n = p.dim();
            require_dim(x.size(), n, "tangent_sets");
            require_dim(u.size(), n, "tangent_sets");
            if (!p.contains(x, atol)) fail(ErrorKind::DomainViolation, "tangent_sets: point outside the set");
            std::vector<Vec> t_rows, t2_rows;
            for (int i : p.active_set(x, atol)) {
              const Vec row = p.a().row(i).transpose();
              t_rows.push_back(row);
              const double s = row.dot(u);
              if (s > dir_tol(u)) fail(ErrorKind::DomainViolation, "tangent_sets: direction is not tangent");
              if (std::abs(s) <= dir_tol(u)) t2_rows.push_back(row);
            }
            ConeRep tangent = ConeRep::from_constraints(stack_rows(t_rows, n));
            Polyhedron t2(stack_rows(t2_rows, n), Vec::Zero(static_cast<Eigen::Index>(t2_rows.size())));
            return TangentSets{tangent, SecondOrderTangentRep{p, x, u, t2}};
          },
          [&](const SmoothSet& s) {
            const int n = s.n;
            require_dim(x.size(), n, "tangent_sets");
            require_dim(u.size(), n, "tangent_sets");
            if (!s.contains(x, atol)) fail(ErrorKind::DomainViolation, "tangent_sets: point outside the set");
            std::vector<Vec> grads, t_rows, t2_rows;
            std::vector<double> t2_rhs;
            std::vector<Vec> eq_rows;
            std::vector<double> eq_rhs;
            if (s.eq) {
              const Mat j = s.eq->jacobian(x);
              const Vec hf = s.eq->hessian_form(x, u);
              for (int i = 0; i < s.eq->m(); ++i) {
                const Vec g = j.row(i).transpose();
                grads.push_back(g);
                if (std::abs(g.dot(u)) > dir_tol(u)) fail(ErrorKind::DomainViolation, "tangent_sets: direction is not tangent");
                t_rows.push_back(g);
                t_rows.push_back(-g);
                eq_rows.push_back(g);
                eq_rhs.push_back(-hf(i));
              }
            }
            if (s.ineq) {
              const Vec val = s.ineq->value(x);
              const Mat j = s.ineq->jacobian(x);
              const Vec hf = s.ineq->hessian_form(x, u);
              for (int i = 0; i < s.ineq->m(); ++i) {
                if (val(i) < -atol) continue;
                const Vec g = j.row(i).transpose();
                grads.push_back(g);
                t_rows.push_back(g);
                const double d = g.dot(u);
                if (d > dir_tol(u)) fail(ErrorKind::DomainViolation, "tangent_sets: direction is not tangent");
                if (std::abs(d) <= dir_tol(u)) {
                  t2_rows.push_back(g);
                  t2_rhs.push_back(-hf(i));
                }
              }
            }
            if (!grads.empty() && rank(stack_rows(grads, n)) < static_cast<int>(grads.size())) {
              fail(ErrorKind::Qualification, "tangent_sets: active gradients are linearly dependent");
            }
            ConeRep tangent = ConeRep::from_constraints(stack_rows(t_rows, n));
            // Equalities as two opposite inequalities.
            for (std::size_t k = 0; k < eq_rows.size(); ++k) {
              t2_rows.push_back(eq_rows[k]);
              t2_rhs.push_back(eq_rhs[k]);
              t2_rows.push_back(-eq_rows[k]);
              t2_rhs.push_back(-eq_rhs[k]);
            }
            Polyhedron t2(stack_rows(t2_rows, n),
                          Eigen::Map<Vec>(t2_rhs.data(), static_cast<Eigen::Index>(t2_rhs.size())));
            return TangentSets{tangent, SecondOrderTangentRep{s, x, u, t2}};
          },
      },
      q);
}

std::vector<Vec> attentive_subgradient_samples(const FunctionExpr& f, const Vec& x, double radius, int per_axis,
                                               double delta) {
  const int n = f.dim();
  if (per_axis < 2) fail(ErrorKind::DomainViolation, "attentive sampling needs at least 2 nodes per axis");
  std::size_t total = 1;
  for (int i = 0; i < n; ++i) {
    total *= static_cast<std::size_t>(per_axis);
    if (total > kFaceBudget) fail(ErrorKind::Budget, "attentive sampling grid too large");
  }
  const double f0 = evaluate(f, x).value();
  std::vector<Vec> out;
  for (std::size_t idx = 0; idx < total; ++idx) {
    Vec p = x;
    std::size_t rem = idx;
    for (int i = 0; i < n; ++i) {
      const auto k = static_cast<double>(rem % static_cast<std::size_t>(per_axis));
      rem /= static_cast<std::size_t>(per_axis);
      p(i) += -radius + 2.0 * radius * k / (per_axis - 1);
    }
    const ExtReal fp = evaluate(f, p);
    if (fp.is_infinite() || std::abs(fp.value() - f0) > delta) continue;
    const SubgradientSet s = proximal_subdiff(f, p);
    for (const auto& piece : s.pieces) {
      for (const auto& g : piece.vrep().vertices) push_unique(out, g, 1e-9);
    }
  }
  std::sort(out.begin(), out.end(), lex_less);
  return out;
}

}  // namespace tiltlab
