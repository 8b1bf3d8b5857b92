#include "tiltlab/duality.hpp"

#include <algorithm>
#include <array>
#include <iterator>
#include <limits>
#include <random>

#include "tiltlab/genericity.hpp"
#include "tiltlab/lp.hpp"
#include "tiltlab/subdiff.hpp"

namespace tiltlab {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr std::size_t kMaxPieces = 4096;

// max_i (a_i'x + b_i) + indicator(domain)
struct PolyhedralFn {
  std::vector<std::pair<Vec, double>> pieces;
  Polyhedron domain;
};

PolyhedralFn single_piece(const Vec& a, double b, Polyhedron dom) { return {{{a, b}}, std::move(dom)}; }

std::optional<PolyhedralFn> as_polyhedral(const FunctionExpr& f) {
  const int n = f.dim();
  return std::visit(
      overloaded{
          [&](const expr::Poly& a) -> std::optional<PolyhedralFn> {
            if (!a.p.is_affine()) return std::nullopt;
            const Vec zero = Vec::Zero(n);
            return single_piece(a.p.gradient(zero), a.p(zero), Polyhedron::whole(n));
          },
          [&](const expr::MaxOfSmooth& a) -> std::optional<PolyhedralFn> {
            PolyhedralFn out{{}, Polyhedron::whole(n)};
            const Vec zero = Vec::Zero(n);
            for (const auto& p : a.pieces) {
              if (!p.is_affine()) return std::nullopt;
              out.pieces.emplace_back(p.gradient(zero), p(zero));
            }
            return out;
          },
          [&](const expr::NormL1&) -> std::optional<PolyhedralFn> {
            PolyhedralFn out{{}, Polyhedron::whole(n)};
            for (unsigned mask = 0; mask < (1u << n); ++mask) {
              Vec a(n);
              for (int i = 0; i < n; ++i) a(i) = (mask >> i) & 1u ? -1.0 : 1.0;
              out.pieces.emplace_back(a, 0.0);
            }
            return out;
          },
          [&](const expr::NormL2&) -> std::optional<PolyhedralFn> {
            if (n != 1) return std::nullopt;
            return PolyhedralFn{{{Vec::Ones(1), 0.0}, {-Vec::Ones(1), 0.0}}, Polyhedron::whole(1)};
          },
          [&](const expr::NormLinf&) -> std::optional<PolyhedralFn> {
            PolyhedralFn out{{}, Polyhedron::whole(n)};
            for (int i = 0; i < n; ++i) {
              for (double s : {1.0, -1.0}) out.pieces.emplace_back(s * Vec::Unit(n, i), 0.0);
            }
            return out;
          },
          [&](const expr::Indicator& a) -> std::optional<PolyhedralFn> {
            return single_piece(Vec::Zero(n), 0.0, a.set);
          },
          [&](const expr::Sum& a) -> std::optional<PolyhedralFn> {
            PolyhedralFn acc = single_piece(Vec::Zero(n), 0.0, Polyhedron::whole(n));
            for (const auto& t : a.terms) {
              const auto term = as_polyhedral(t);
              if (!term) return std::nullopt;
              if (acc.pieces.size() * term->pieces.size() > kMaxPieces) {
                fail(ErrorKind::Budget, "too many affine pieces in polyhedral sum");
              }
              std::vector<std::pair<Vec, double>> next;
              for (const auto& [a1, b1] : acc.pieces) {
                for (const auto& [a2, b2] : term->pieces) next.emplace_back(a1 + a2, b1 + b2);
              }
              acc.pieces = std::move(next);
              acc.domain = acc.domain.intersect(term->domain);
            }
            return acc;
          },
          [&](const expr::Tilted& a) -> std::optional<PolyhedralFn> {
            auto base = as_polyhedral(a.base);
            if (!base) return std::nullopt;
            for (auto& pc : base->pieces) pc.first -= a.v;
            return base;
          },
          [&](const expr::Squared&) -> std::optional<PolyhedralFn> { return std::nullopt; },
          [&](const expr::Precomposed& a) -> std::optional<PolyhedralFn> {
            if (!a.map.is_affine()) return std::nullopt;
            auto outer = as_polyhedral(a.outer);
            if (!outer) return std::nullopt;
            const Vec zero = Vec::Zero(n);
            const Mat g = a.map.jacobian(zero);
            const Vec c = a.map.value(zero) + a.shift;
            PolyhedralFn out{{}, Polyhedron::whole(n)};
            for (const auto& [pa, pb] : outer->pieces) out.pieces.emplace_back(g.transpose() * pa, pa.dot(c) + pb);
            const Polyhedron& d = outer->domain;
            if (d.rows() > 0) out.domain = Polyhedron(d.a() * g, d.b() - d.a() * c);
            return out;
          },
          [&](const expr::Scaled& a) -> std::optional<PolyhedralFn> {
            if (a.factor <= 0.0) return std::nullopt;
            auto base = as_polyhedral(a.base);
            if (!base) return std::nullopt;
            for (auto& pc : base->pieces) {
              pc.first *= a.factor;
              pc.second *= a.factor;
            }
            return base;
          },
      },
      f.node().v);
}

FunctionExpr constant(int n, double c) { return polynomial(Polynomial::constant(n, c)); }

// Conjugate through the V-representation of the epigraph:
// f*(u) = max_j (<u, x_j> - t_j) + indicator{<u, r> <= s for rays (r, s), = for lineality}.
FunctionExpr polyhedral_conjugate(const PolyhedralFn& pf, int n) {
  const Polyhedron& d = pf.domain;
  const auto k = static_cast<Eigen::Index>(pf.pieces.size());
  Mat a(k + d.rows(), n + 1);
  Vec b(k + d.rows());
  for (Eigen::Index i = 0; i < k; ++i) {
    a.row(i) << pf.pieces[static_cast<std::size_t>(i)].first.transpose(), -1.0;
    b(i) = -pf.pieces[static_cast<std::size_t>(i)].second;
  }
  if (d.rows() > 0) {
    a.bottomLeftCorner(d.rows(), n) = d.a();
    a.bottomRightCorner(d.rows(), 1).setZero();
    b.tail(d.rows()) = d.b();
  }
  const Polyhedron epi(a, b);
  if (epi.is_empty()) fail(ErrorKind::Infeasible, "conjugate of a function with empty domain");
  const VRep& vr = epi.vrep();

  std::vector<Polynomial> pieces;
  for (const auto& p : vr.vertices) {
    const Polynomial lin = Polynomial::affine(p.head(n), -p(n));
    bool dup = false;
    for (const auto& q : pieces) dup = dup || (q - lin).is_zero();
    if (!dup) pieces.push_back(lin);
  }
  std::vector<Vec> rows;
  std::vector<double> rhs;
  for (const auto& r : vr.rays) {
    rows.push_back(r.head(n));
    rhs.push_back(r(n));
  }
  for (Eigen::Index j = 0; j < vr.lineality.cols(); ++j) {
    const Vec l = vr.lineality.col(j);
    rows.push_back(l.head(n));
    rhs.push_back(l(n));
    rows.push_back(-l.head(n));
    rhs.push_back(-l(n));
  }

  std::vector<FunctionExpr> terms;
  const bool trivial = pieces.size() == 1 && pieces.front().is_zero();
  if (pieces.size() == 1 && !trivial) terms.push_back(polynomial(pieces.front()));
  if (pieces.size() > 1) terms.push_back(max_of(pieces));
  if (!rows.empty()) {
    Mat da(static_cast<Eigen::Index>(rows.size()), n);
    Vec db(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      da.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
      db(static_cast<Eigen::Index>(i)) = rhs[i];
    }
    terms.push_back(indicator(Polyhedron(da, db)));
  }
  if (terms.empty()) return zero_function(n);
  return terms.size() == 1 ? terms.front() : sum(terms);
}

FunctionExpr quadratic_conjugate(const Polynomial& p) {
  const int n = p.nvars();
  const Vec zero = Vec::Zero(n);
  const Mat q = p.hessian(zero);
  const Vec c = p.gradient(zero);
  const double d = p(zero);
  Eigen::SelfAdjointEigenSolver<Mat> es(q);
  const Vec ev = es.eigenvalues();
  const double tol = 1e-12 * std::max(1.0, ev.cwiseAbs().maxCoeff());
  if (ev.minCoeff() < -tol) fail(ErrorKind::NonConvex, "conjugate: indefinite quadratic");
  Mat pinv = Mat::Zero(n, n);
  Mat null;
  std::vector<int> zero_idx;
  for (int i = 0; i < n; ++i) {
    if (ev(i) > tol) {
      pinv += es.eigenvectors().col(i) * es.eigenvectors().col(i).transpose() / ev(i);
    } else {
      zero_idx.push_back(i);
    }
  }
  // 0.5 (u - c)' Q^+ (u - c) - d on {u - c in range Q}
  const FunctionExpr quad = polynomial(Polynomial::quadratic(pinv, -pinv * c, 0.5 * c.dot(pinv * c) - d));
  if (zero_idx.empty()) return quad;
  Mat e(static_cast<Eigen::Index>(zero_idx.size()), n);
  for (std::size_t i = 0; i < zero_idx.size(); ++i) {
    e.row(static_cast<Eigen::Index>(i)) = es.eigenvectors().col(zero_idx[i]).transpose();
  }
  return sum({quad, indicator(Polyhedron::affine(e, e * c))});
}

FunctionExpr conjugate_rec(const FunctionExpr& f) {
  const int n = f.dim();
  if (const auto pf = as_polyhedral(f)) return polyhedral_conjugate(*pf, n);
  return std::visit(
      overloaded{
          [&](const expr::Poly& a) -> FunctionExpr {
            if (a.p.degree() > 2) fail(ErrorKind::Unsupported, "conjugate: polynomial of degree > 2");
            return quadratic_conjugate(a.p);
          },
          [&](const expr::Squared& a) -> FunctionExpr {
            // (|.|^2)* = |.|_*^2 / 4
            return std::visit(overloaded{
                                  [&](const expr::NormL1&) { return scaled(0.25, squared(norm_linf(n))); },
                                  [&](const expr::NormLinf&) { return scaled(0.25, squared(norm_l1(n))); },
                                  [&](const expr::NormL2&) { return scaled(0.25, squared(norm_l2(n))); },
                                  [&](const auto&) -> FunctionExpr {
                                    fail(ErrorKind::Unsupported, "conjugate: squared non-norm");
                                  },
                              },
                              a.inner.node().v);
          },
          [&](const expr::Tilted& a) -> FunctionExpr {
            return shift(conjugate_rec(a.base), SmoothMap::identity(n), a.v);
          },
          [&](const expr::Scaled& a) -> FunctionExpr {
            if (a.factor <= 0.0) fail(ErrorKind::Unsupported, "conjugate: nonpositive scaling");
            const Mat inv = Mat::Identity(n, n) / a.factor;
            return scaled(a.factor, shift(conjugate_rec(a.base), SmoothMap::linear(inv), Vec::Zero(n)));
          },
          [&](const expr::Precomposed& a) -> FunctionExpr {
            if (!a.map.is_affine() || a.map.m() != n) fail(ErrorKind::Unsupported, "conjugate: non-invertible map");
            const Vec zero = Vec::Zero(n);
            const Mat g = a.map.jacobian(zero);
            Eigen::FullPivLU<Mat> lu(g);
            if (!lu.isInvertible()) fail(ErrorKind::Unsupported, "conjugate: singular linear map");
            const Vec c = a.map.value(zero) + a.shift;
            const Mat g_inv_t = lu.inverse().transpose();
            return tilt(shift(conjugate_rec(a.outer), SmoothMap::linear(g_inv_t), zero), lu.solve(c));
          },
          [&](const expr::Sum& a) -> FunctionExpr {
            // g + <l, x> + d with exactly one non-affine term
            std::optional<FunctionExpr> g;
            Vec lin = Vec::Zero(n);
            double d = 0.0;
            const Vec zero = Vec::Zero(n);
            for (const auto& t : a.terms) {
              const auto* p = std::get_if<expr::Poly>(&t.node().v);
              if (p && p->p.is_affine()) {
                lin += p->p.gradient(zero);
                d += p->p(zero);
              } else if (!g) {
                g = t;
              } else {
                fail(ErrorKind::Unsupported, "conjugate: sum without an exact rule");
              }
            }
            const FunctionExpr gs = shift(conjugate_rec(*g), SmoothMap::identity(n), -lin);
            return d == 0.0 ? gs : sum({gs, constant(n, -d)});
          },
          [&](const auto&) -> FunctionExpr { fail(ErrorKind::Unsupported, "conjugate: no exact rule"); },
      },
      f.node().v);
}

// Largest s <= 1 with target + s d in {p + M q : p in P1, q in P2}; nullopt when
// even s = 0 is infeasible.
std::optional<double> reach(const Polyhedron& p1, const Mat& m, const Polyhedron& p2, const Vec& target,
                            const Vec& d) {
  const auto k = target.size();
  const auto n1 = p1.dim();
  const auto n2 = p2.dim();
  LinearProgram lp(static_cast<int>(n1 + n2 + 1));
  lp.c(n1 + n2) = -1.0;
  lp.a_ub = Mat::Zero(p1.rows() + p2.rows() + 1, n1 + n2 + 1);
  lp.b_ub = Vec::Zero(p1.rows() + p2.rows() + 1);
  lp.a_ub.block(0, 0, p1.rows(), n1) = p1.a();
  lp.b_ub.head(p1.rows()) = p1.b();
  lp.a_ub.block(p1.rows(), n1, p2.rows(), n2) = p2.a();
  lp.b_ub.segment(p1.rows(), p2.rows()) = p2.b();
  lp.a_ub(p1.rows() + p2.rows(), n1 + n2) = 1.0;
  lp.b_ub(p1.rows() + p2.rows()) = 1.0;
  lp.a_eq = Mat::Zero(k, n1 + n2 + 1);
  lp.a_eq.leftCols(n1) = Mat::Identity(k, n1);
  lp.a_eq.block(0, n1, k, n2) = m;
  lp.a_eq.col(n1 + n2) = -d;
  lp.b_eq = target;
  const LpResult r = solve_lp(lp);
  if (r.status != LpStatus::Optimal) return std::nullopt;
  return r.x(n1 + n2);
}

bool interior(const Polyhedron& p1, const Mat& m, const Polyhedron& p2, const Vec& target) {
  constexpr double kSlack = 1e-9;
  for (Eigen::Index i = 0; i < target.size(); ++i) {
    for (double s : {1.0, -1.0}) {
      const auto r = reach(p1, m, p2, target, s * Vec::Unit(target.size(), i));
      if (!r || *r < kSlack) return false;
    }
  }
  return true;
}

bool member(const Polyhedron& p1, const Mat& m, const Polyhedron& p2, const Vec& target) {
  const auto r = reach(p1, m, p2, target, Vec::Zero(target.size()));
  return r.has_value();
}

Polyhedron domain_of(const FunctionExpr& f) {
  const auto d = polyhedral_domain(f);
  if (!d) fail(ErrorKind::Unsupported, "domain is not polyhedral");
  return *d;
}

void check_problem(const PrimalDualProblem& p) {
  require_dim(p.a.cols(), p.f.dim(), "primal-dual A columns");
  require_dim(p.a.rows(), p.h.dim(), "primal-dual A rows");
  require_dim(p.v.size(), p.f.dim(), "primal-dual v");
  require_dim(p.y.size(), p.h.dim(), "primal-dual y");
  if (!is_convex(p.f) || !is_convex(p.h)) fail(ErrorKind::NonConvex, "primal-dual data must be convex");
}

struct Solved {
  CriticalPair pair;
  bool unique = false;
};

Solved solve_pair(const PrimalDualProblem& p, const Vec& x0, const Vec& u0) {
  const CompositeProblem cp{p.f, p.h, SmoothMap::linear(p.a), p.v, p.y};
  Solved s;
  s.pair = solve_composite_critical(cp, x0, u0);
  s.unique = s.pair.status == SolveStatus::Converged;
  return s;
}

}  // namespace

FunctionExpr conjugate(const FunctionExpr& f) {
  if (!is_convex(f)) fail(ErrorKind::NonConvex, "conjugate of a non-convex function");
  return conjugate_rec(f);
}

ConjugatePair conjugate_pair(const FunctionExpr& f) { return {f, conjugate(f)}; }

double fenchel_young_gap(const ConjugatePair& p, const Vec& x, const Vec& u) {
  const ExtReal a = evaluate(p.primal, x);
  const ExtReal b = evaluate(p.conjugate, u);
  if (a.is_infinite() || b.is_infinite()) return std::numeric_limits<double>::infinity();
  return a.value() + b.value() - u.dot(x);
}

ExtReal primal_objective(const PrimalDualProblem& p, const Vec& x) {
  const ExtReal a = evaluate(p.f, x);
  const ExtReal b = evaluate(p.h, p.a * x + p.y);
  if (a.is_infinite() || b.is_infinite()) return ExtReal::plus_infinity();
  return ExtReal::finite(a.value() + b.value() - p.v.dot(x));
}

ExtReal dual_objective(const PrimalDualProblem& p, const Vec& u) {
  // Reported as the value of the maximization; -inf is encoded as +inf of the negation.
  const ExtReal a = evaluate(conjugate(p.h), u);
  const ExtReal b = evaluate(conjugate(p.f), p.v - p.a.transpose() * u);
  if (a.is_infinite() || b.is_infinite()) return ExtReal::plus_infinity();
  return ExtReal::finite(-a.value() - b.value() + p.y.dot(u));
}

DualityCertificate::Feasibility feasibility_flags(const PrimalDualProblem& p) {
  check_problem(p);
  DualityCertificate::Feasibility out;
  out.y_interior = interior(domain_of(p.h), -p.a, domain_of(p.f), p.y);
  out.v_interior = interior(domain_of(conjugate(p.f)), p.a.transpose(), domain_of(conjugate(p.h)), p.v);
  return out;
}

DualityCertificate solve_primal_dual(const PrimalDualProblem& p) {
  check_problem(p);
  const Polyhedron dom_f = domain_of(p.f);
  const Polyhedron dom_h = domain_of(p.h);
  const Polyhedron dom_fs = domain_of(conjugate(p.f));
  const Polyhedron dom_hs = domain_of(conjugate(p.h));
  if (!member(dom_h, -p.a, dom_f, p.y)) fail(ErrorKind::Infeasible, "primal problem is infeasible");
  if (!member(dom_fs, p.a.transpose(), dom_hs, p.v)) fail(ErrorKind::Unbounded, "primal problem is unbounded");

  DualityCertificate out;
  out.feasibility = {interior(dom_h, -p.a, dom_f, p.y), interior(dom_fs, p.a.transpose(), dom_hs, p.v)};
  const int n = p.f.dim();
  const int m = p.h.dim();
  std::optional<Solved> best;
  for (const Vec& x0 : {Vec(Vec::Zero(n)), dom_f.project(Vec::Zero(n))}) {
    try {
      Solved s = solve_pair(p, x0, Vec::Zero(m));
      if (s.pair.status == SolveStatus::Converged || s.pair.status == SolveStatus::NonIsolated) {
        best = std::move(s);
        break;
      }
    } catch (const Error&) {
    }
  }
  if (!best) fail(ErrorKind::NotConverged, "no primal-dual pair found");
  out.x = best->pair.x;
  out.u = best->pair.lambda;
  out.primal_value = primal_objective(p, out.x);
  out.dual_value = dual_objective(p, out.u);
  out.gap = out.primal_value.is_infinite() || out.dual_value.is_infinite()
                ? std::numeric_limits<double>::infinity()
                : out.primal_value.value() - out.dual_value.value();
  return out;
}

bool inverse_subdiff_check(const FunctionExpr& f, int pairs, std::uint64_t seed) {
  const ConjugatePair cp = conjugate_pair(f);
  const int n = f.dim();
  const std::optional<Polyhedron> dom = polyhedral_domain(f);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  std::bernoulli_distribution snap(1.0 / 3.0);
  std::normal_distribution<double> normal(0.0, 2.0);
  int done = 0;
  for (int attempt = 0; attempt < 10 * pairs && done < pairs; ++attempt) {
    // Points on kinks and faces are drawn on purpose by snapping coordinates to 0.
    Vec x(n);
    for (int i = 0; i < n; ++i) x(i) = snap(rng) ? 0.0 : unif(rng);
    if (dom && !dom->contains(x)) x = dom->project(x);
    if (evaluate(f, x).is_infinite()) continue;
    const SubgradientSet s = limiting_subdiff(f, x);
    if (s.empty()) continue;
    Vec g(n);
    for (int i = 0; i < n; ++i) g(i) = normal(rng);
    const Vec u = s.nearest(g);
    ++done;
    if (!limiting_subdiff(cp.conjugate, u).contains(x, 1e-7)) return false;
  }
  return done == pairs;
}

SmoothDependence smooth_dependence_probe(const PrimalDualProblem& p, double radius) {
  check_problem(p);
  const int n = p.f.dim();
  const int m = p.h.dim();
  const DualityCertificate base_cert = solve_primal_dual(p);
  const Solved base = solve_pair(p, base_cert.x, base_cert.u);
  if (!base.unique) fail(ErrorKind::Qualification, "primal-dual pair is not unique at the base parameter");
  Vec s0(n + m);
  s0 << base.pair.x, base.pair.lambda;

  SmoothDependence out;
  constexpr std::size_t kScales = std::size(kProbeScales);
  std::array<double, kScales> quotient{};
  Vec fwd_finest;
  double mismatch = 0.0;
  double slope = 0.0;
  for (std::size_t k = 0; k < kScales; ++k) {
    const double s = kProbeScales[k] * radius / 1e-2;
    for (int i = 0; i < n + m; ++i) {
      Vec sol[2];
      for (int side = 0; side < 2; ++side) {
        PrimalDualProblem q = p;
        const double step = side == 0 ? s : -s;
        if (i < n) {
          q.v(i) += step;
        } else {
          q.y(i - n) += step;
        }
        Solved r;
        try {
          r = solve_pair(q, base.pair.x, base.pair.lambda);
        } catch (const Error& e) {
          out.diagnostic = std::string("perturbed solve failed: ") + e.what();
          return out;
        }
        if (!r.unique) {
          out.diagnostic = "non-unique solution under perturbation";
          return out;
        }
        sol[side].resize(n + m);
        sol[side] << r.pair.x, r.pair.lambda;
      }
      const Vec fwd = (sol[0] - s0) / s;
      const Vec bwd = (s0 - sol[1]) / s;
      quotient[k] = std::max({quotient[k], fwd.norm(), bwd.norm()});
      if (k + 1 == kScales) {
        mismatch = std::max(mismatch, (fwd - bwd).norm());
        slope = std::max({slope, fwd.norm(), bwd.norm()});
      }
    }
  }
  out.lipschitz_estimate = *std::max_element(quotient.begin(), quotient.end());
  for (std::size_t k = 0; k + 1 < kScales; ++k) {
    if (quotient[k + 1] > 2.0 * quotient[k] + 1e-6) {
      out.diagnostic = "difference quotients grow as the scale shrinks";
      return out;
    }
  }
  // One-sided quotients disagreeing at the finest scale indicate a kink.
  if (mismatch > 1e-2 * (1.0 + slope)) {
    out.diagnostic = "one-sided difference quotients disagree";
    return out;
  }
  out.smooth = true;
  return out;
}

}  // namespace tiltlab
