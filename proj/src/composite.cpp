#include <algorithm>
#include <exception>
#include <random>

#include "tiltlab/criticality.hpp"
#include "tiltlab/linalg.hpp"
#include "tiltlab/lp.hpp"
#include "tiltlab/prox.hpp"

namespace tiltlab {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged:
      return "converged";
    case SolveStatus::NonIsolated:
      return "non_isolated";
    case SolveStatus::MaxIterations:
      return "max_iterations";
    case SolveStatus::Diverged:
      return "diverged";
  }
  return "?";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMatchTol = 1e-9;

// lambda in cone(rows of a)?
bool in_row_cone(const Mat& a, const Vec& lambda) {
  if (a.rows() == 0) return lambda.norm() <= kMatchTol;
  // mu >= 0, a^T mu = lambda, minimizing nothing; relaxed by a slack box.
  const int k = static_cast<int>(a.rows());
  const int m = static_cast<int>(lambda.size());
  LinearProgram lp(k);
  lp.a_ub = -Mat::Identity(k, k);
  lp.b_ub = Vec::Zero(k);
  Mat eq(2 * m, k);
  eq << a.transpose(), -a.transpose();
  Vec rhs(2 * m);
  rhs << lambda + Vec::Constant(m, kMatchTol), -lambda + Vec::Constant(m, kMatchTol);
  lp.a_ub.conservativeResize(k + 2 * m, k);
  lp.a_ub.bottomRows(2 * m) = eq;
  lp.b_ub.conservativeResize(k + 2 * m);
  lp.b_ub.tail(2 * m) = rhs;
  return solve_lp(lp).status == LpStatus::Optimal;
}

double indicator_inverse_distance(const Polyhedron& p, const Vec& lambda, const Vec& z) {
  double best = kInf;
  const Mat& a = p.a();
  for (const auto& face : p.faces()) {
    Mat act(static_cast<Eigen::Index>(face.active.size()), p.dim());
    Vec rhs(act.rows());
    for (Eigen::Index i = 0; i < act.rows(); ++i) {
      act.row(i) = a.row(face.active[static_cast<std::size_t>(i)]);
      rhs(i) = p.b()(face.active[static_cast<std::size_t>(i)]);
    }
    if (!in_row_cone(act, lambda)) continue;
    const Vec q = project_polyhedral(z, a, p.b(), act, rhs);
    best = std::min(best, (q - z).norm());
  }
  return best;
}

double l1_inverse_distance(const Vec& lambda, const Vec& z) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double l = lambda(i);
    if (std::abs(l) > 1.0 + kMatchTol) return kInf;
    double d = std::abs(z(i));
    if (l >= 1.0 - kMatchTol) d = std::max(0.0, -z(i));
    if (l <= -1.0 + kMatchTol) d = std::max(0.0, z(i));
    s += d * d;
  }
  return std::sqrt(s);
}

double l2_inverse_distance(const Vec& lambda, const Vec& z) {
  const double r = lambda.norm();
  if (r > 1.0 + kMatchTol) return kInf;
  if (r < 1.0 - kMatchTol) return z.norm();
  const Vec e = lambda / r;
  return (z - std::max(0.0, z.dot(e)) * e).norm();
}

double linf_inverse_distance(const Vec& lambda, const Vec& z) {
  const int m = static_cast<int>(z.size());
  const double s1 = lambda.lpNorm<1>();
  if (s1 > 1.0 + kMatchTol) return kInf;
  if (s1 < 1.0 - kMatchTol) return z.norm();
  // z_i = t sign(l_i) on the support, |z_j| <= t elsewhere, t >= 0.
  std::vector<int> supp;
  for (int i = 0; i < m; ++i) {
    if (std::abs(lambda(i)) > kMatchTol) supp.push_back(i);
  }
  const int k = supp.front();
  const double sk = lambda(k) > 0 ? 1.0 : -1.0;
  std::vector<Vec> ub, eq;
  Vec row = Vec::Zero(m);
  row(k) = -sk;
  ub.push_back(row);
  for (int i : supp) {
    if (i == k) continue;
    Vec e = Vec::Zero(m);
    e(i) = lambda(i) > 0 ? 1.0 : -1.0;
    e(k) = -sk;
    eq.push_back(e);
  }
  for (int j = 0; j < m; ++j) {
    if (std::find(supp.begin(), supp.end(), j) != supp.end()) continue;
    for (double s : {-1.0, 1.0}) {
      Vec e = Vec::Zero(m);
      e(j) = s;
      e(k) -= sk;
      ub.push_back(e);
    }
  }
  const Mat a = stack_rows(ub, m);
  const Mat e = stack_rows(eq, m);
  return (project_polyhedral(z, a, Vec::Zero(a.rows()), e, Vec::Zero(e.rows())) - z).norm();
}

double generic_inverse_distance(const FunctionExpr& h, const Vec& lambda, const Vec& z) {
  const StationarySet s = stationary_points(h, lambda);
  if (s.continuum) fail(ErrorKind::Unsupported, "preimage of the subdifferential is not finite");
  double best = kInf;
  for (const auto& p : s.points) best = std::min(best, (p - z).norm());
  return best;
}

}  // namespace

double inverse_subdiff_distance(const FunctionExpr& h, const Vec& lambda, const Vec& z) {
  require_dim(lambda.size(), h.dim(), "inverse_subdiff_distance");
  require_dim(z.size(), h.dim(), "inverse_subdiff_distance");
  return std::visit(
      overloaded{
          [&](const expr::Indicator& a) { return indicator_inverse_distance(a.set, lambda, z); },
          [&](const expr::NormL1&) { return l1_inverse_distance(lambda, z); },
          [&](const expr::NormL2&) { return l2_inverse_distance(lambda, z); },
          [&](const expr::NormLinf&) { return linf_inverse_distance(lambda, z); },
          [&](const expr::Tilted& a) { return inverse_subdiff_distance(a.base, lambda + a.v, z); },
          [&](const auto&) { return generic_inverse_distance(h, lambda, z); },
      },
      h.node().v);
}

GeneralizedEquationResidual residual(const CompositeProblem& p, const Vec& x, const Vec& lambda) {
  require_dim(x.size(), p.f.dim(), "residual");
  require_dim(lambda.size(), p.h.dim(), "residual");
  GeneralizedEquationResidual r;
  const Mat j = p.g.jacobian(x);
  const Vec z = p.g.value(x) + p.y;
  r.r_v = evaluate(p.f, x).is_infinite() ? kInf : limiting_subdiff(p.f, x).distance(p.v - j.transpose() * lambda);
  r.r_y = inverse_subdiff_distance(p.h, lambda, z);
  r.no_multiplier_match = std::isinf(r.r_y);
  return r;
}

// ---- qualification conditions ------------------------------------------------

namespace {

// {a : basis a != 0, P_perp(target) jt basis a = 0} is empty?
bool trivial_preimage(const Mat& jt, const Mat& src, const Mat& target_basis) {
  if (src.cols() == 0) return true;
  const auto n = jt.rows();
  Mat proj = Mat::Identity(n, n);
  if (target_basis.cols() > 0) proj -= target_basis * target_basis.transpose();
  return rank(proj * jt * src, 1e-9) == src.cols();
}

}  // namespace

// Basis of the direction space of the affine hull of a union of polyhedra.
Mat parallel_basis(const SubgradientSet& s) {
  std::vector<Vec> dirs;
  std::optional<Vec> anchor;
  for (const auto& piece : s.pieces) {
    const VRep& v = piece.vrep();
    for (const auto& p : v.vertices) {
      if (!anchor) {
        anchor = p;
      } else {
        dirs.push_back(p - *anchor);
      }
    }
    for (const auto& r : v.rays) dirs.push_back(r);
    for (Eigen::Index c = 0; c < v.lineality.cols(); ++c) dirs.push_back(v.lineality.col(c));
  }
  if (dirs.empty()) return Mat(s.dim, 0);
  return column_basis(stack_rows(dirs, s.dim).transpose(), s.dim);
}

QualFlags check_qualifications(const FunctionExpr& f, const FunctionExpr& h, const SmoothMap& g, const Vec& x,
                               const Vec& y) {
  require_dim(x.size(), f.dim(), "check_qualifications");
  require_dim(y.size(), h.dim(), "check_qualifications");
  const Vec z = g.value(x) + y;
  require_in_domain(f, x, "check_qualifications");
  require_in_domain(h, z, "check_qualifications");
  const Mat jt = g.jacobian(x).transpose();
  QualFlags q;
  {
    // {l in hor h(z) : -J^T l in hor f(x)} = {0}
    const ConeRep hh = horizon_subdiff(h, z);
    const ConeRep hf = horizon_subdiff(f, x);
    const Mat& ah = hh.set().a();
    const Mat af = -hf.set().a() * jt;
    Mat a(ah.rows() + af.rows(), h.dim());
    a << ah, af;
    q.bcq = ConeRep(Polyhedron(a, Vec::Zero(a.rows()))).is_zero();
  }
  q.licq_analogue = trivial_preimage(jt, parallel_basis(limiting_subdiff(h, z)), parallel_basis(limiting_subdiff(f, x)));
  return q;
}

QualFlags check_qualifications(const FunctionExpr& f, const FunctionExpr& h, const SmoothMap& g, const Vec& x,
                               const Vec& y, const ManifoldSpec& k, const ManifoldSpec& m) {
  QualFlags q = check_qualifications(f, h, g, x, y);
  require_dim(k.ambient_dim(), h.dim(), "check_qualifications manifold K");
  require_dim(m.ambient_dim(), f.dim(), "check_qualifications manifold M");
  const Vec z = g.value(x) + y;
  const Mat jt = g.jacobian(x).transpose();
  const Mat nk = k.normal_basis(z);
  // N_M(x) = T_M(x)^perp, so projecting out N_M keeps the T_M component.
  q.nondegeneracy = trivial_preimage(jt, nk, m.normal_basis(x));
  return q;
}

bool multiplier_unique(const CompositeProblem& p, const Vec& x) {
  const Vec z = p.g.value(x) + p.y;
  const Mat jt = p.g.jacobian(x).transpose();
  const SubgradientSet sh = limiting_subdiff(p.h, z);
  const SubgradientSet sf = limiting_subdiff(p.f, x);
  const int m = p.h.dim();
  const double slack = 1e-9 * (1.0 + p.v.norm() + jt.norm());
  std::vector<Vec> centers;
  for (const auto& ph : sh.pieces) {
    for (const auto& pf : sf.pieces) {
      // ph: A l <= b;  pf: B (v - J^T l) <= c.
      Mat a(ph.rows() + pf.rows(), m);
      a << ph.a(), -pf.a() * jt;
      Vec b(a.rows());
      b << ph.b(), pf.b() - pf.a() * p.v;
      b.array() += slack;
      Vec lo(m), hi(m);
      bool feasible = true;
      for (int i = 0; i < m && feasible; ++i) {
        for (double s : {1.0, -1.0}) {
          LinearProgram lp(m);
          lp.c(i) = s;
          lp.a_ub = a;
          lp.b_ub = b;
          const LpResult r = solve_lp(lp);
          if (r.status == LpStatus::Infeasible) {
            feasible = false;
            break;
          }
          if (r.status == LpStatus::Unbounded) return false;
          (s > 0 ? lo : hi)(i) = s * r.objective;
        }
      }
      if (!feasible) continue;
      if ((hi - lo).maxCoeff() > 1e-6) return false;
      centers.push_back(0.5 * (lo + hi));
    }
  }
  if (centers.empty()) return false;
  for (const auto& c : centers) {
    if ((c - centers.front()).norm() > 1e-6) return false;
  }
  return true;
}

// ---- solver -------------------------------------------------------------------

namespace {

class NaturalMap {
 public:
  NaturalMap(const CompositeProblem& p, double gamma) : p_(p), gamma_(gamma), n_(p.f.dim()), m_(p.h.dim()) {}

  int size() const { return n_ + m_; }
  Vec x_of(const Vec& u) const { return u.head(n_); }
  Vec l_of(const Vec& u) const { return u.tail(m_); }

  Vec operator()(const Vec& u) const {
    const Vec x = x_of(u);
    const Vec l = l_of(u);
    const Vec z = p_.g.value(x) + p_.y;
    const Mat j = p_.g.jacobian(x);
    Vec out(size());
    out.head(n_) = x - nearest(prox(p_.f, x + gamma_ * (p_.v - j.transpose() * l), 1.0 / gamma_), x);
    out.tail(m_) = z - nearest(prox(p_.h, z + gamma_ * l, 1.0 / gamma_), z);
    return out;
  }

  Mat jacobian(const Vec& u, const Vec& fu) const {
    Mat jac(size(), size());
    for (int i = 0; i < size(); ++i) {
      const double h = 1e-7 * (1.0 + std::abs(u(i)));
      Vec up = u;
      up(i) += h;
      jac.col(i) = ((*this)(up) - fu) / h;
    }
    return jac;
  }

  double gamma() const { return gamma_; }

 private:
  static Vec nearest(const std::vector<Vec>& cands, const Vec& ref) {
    const Vec* best = &cands.front();
    for (const auto& c : cands) {
      if ((c - ref).norm() < (*best - ref).norm()) best = &c;
    }
    return *best;
  }

  const CompositeProblem& p_;
  double gamma_;
  int n_;
  int m_;
};

struct Iterate {
  Vec u;
  double fnorm = kInf;
  int iterations = 0;
  bool diverged = false;
};

constexpr double kDivergence = 1e8;

Iterate newton(const NaturalMap& map, Vec u, const CompositeOptions& opts) {
  Iterate it{u, map(u).norm(), 0, false};
  Vec fu = map(u);
  for (int k = 0; k < opts.newton_max; ++k) {
    it.iterations = k + 1;
    const double fn = fu.norm();
    if (fn <= 1e-14 * (1.0 + u.norm())) break;
    const Mat jac = map.jacobian(u, fu);
    const Vec step = -jac.completeOrthogonalDecomposition().solve(fu);
    if (!step.allFinite()) break;
    double t = 1.0;
    bool moved = false;
    for (int h = 0; h <= opts.max_halvings; ++h, t *= 0.5) {
      const Vec cand = u + t * step;
      const Vec fc = map(cand);
      if (fc.norm() < (1.0 - 1e-4 * t) * fn) {
        u = cand;
        fu = fc;
        moved = true;
        break;
      }
    }
    if (u.norm() > kDivergence) {
      it.diverged = true;
      break;
    }
    if (!moved) break;
  }
  it.u = u;
  it.fnorm = fu.norm();
  return it;
}

// Fixed-point iteration (x, l) <- (prox_f(...), prox_{h*}(...)).
Iterate splitting(const NaturalMap& map, Vec u, const CompositeOptions& opts) {
  const int n = static_cast<int>(map.x_of(u).size());
  Iterate best{u, map(u).norm(), 0, false};
  for (int k = 0; k < opts.splitting_max; ++k) {
    const Vec fu = map(u);
    const double fn = fu.norm();
    if (fn < best.fnorm) best = {u, fn, k, false};
    if (fn <= 1e-14 * (1.0 + u.norm())) break;
    u.head(n) -= fu.head(n);
    u.tail(u.size() - n) += fu.tail(u.size() - n) / map.gamma();
    if (!u.allFinite() || u.norm() > kDivergence) {
      best.diverged = true;
      break;
    }
  }
  best.iterations = opts.splitting_max;
  return best;
}

// Newton first, splitting from the best Newton iterate when Newton stalls.
Iterate solve_from(const CompositeProblem& p, const NaturalMap& map, const Vec& u0, const CompositeOptions& opts,
                   bool allow_fallback) {
  Iterate it = newton(map, u0, opts);
  auto ok = [&](const Iterate& r) {
    return !r.diverged && residual(p, map.x_of(r.u), map.l_of(r.u)).max() <= opts.tol;
  };
  if (ok(it) || !allow_fallback) return it;
  Iterate sp = splitting(map, it.u, opts);
  sp.iterations += it.iterations;
  if (ok(sp)) {
    // Polish.
    Iterate pol = newton(map, sp.u, opts);
    pol.iterations += sp.iterations;
    return ok(pol) ? pol : sp;
  }
  return sp.fnorm < it.fnorm ? sp : it;
}

// Retry with shorter prox steps when the prox subproblems are unbounded.
template <class Fn>
auto with_gamma(double gamma, Fn&& fn) {
  for (double g = gamma;; g *= 0.1) {
    try {
      return fn(g);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Unbounded || g < 1e-6) throw;
    }
  }
}

}  // namespace

CriticalPair solve_composite_critical(const CompositeProblem& p, const Vec& x0, const Vec& lambda0,
                                      const CompositeOptions& opts) {
  const int n = p.f.dim();
  const int m = p.h.dim();
  require_dim(p.g.n(), n, "solve_composite_critical G");
  require_dim(p.g.m(), m, "solve_composite_critical G");
  require_dim(x0.size(), n, "solve_composite_critical x0");
  require_dim(lambda0.size(), m, "solve_composite_critical lambda0");
  require_dim(p.v.size(), n, "solve_composite_critical v");
  require_dim(p.y.size(), m, "solve_composite_critical y");

  // Attempts over shorter prox steps and a smaller starting multiplier; the first
  // one meeting the tolerance wins, otherwise the smallest residual is kept.
  Iterate it;
  double gamma = opts.gamma;
  double best = kInf;
  std::exception_ptr last_error;
  for (const double lscale : {1.0, 0.1}) {
    for (const double gscale : {1.0, 0.1, 0.01}) {
      Vec u0(n + m);
      u0 << x0, lscale * lambda0;
      double g_used = opts.gamma * gscale;
      Iterate cand;
      try {
        cand = with_gamma(g_used, [&](double g) {
          g_used = g;
          return solve_from(p, NaturalMap(p, g), u0, opts, true);
        });
      } catch (const Error&) {
        last_error = std::current_exception();
        continue;
      }
      const NaturalMap trial(p, g_used);
      double r = kInf;
      try {
        if (!cand.diverged) r = residual(p, trial.x_of(cand.u), trial.l_of(cand.u)).max();
      } catch (const Error&) {
      }
      if (best == kInf && it.u.size() == 0) {
        it = cand;
        gamma = g_used;
      }
      if (r < best) {
        best = r;
        it = cand;
        gamma = g_used;
      }
      if (best <= opts.tol) break;
    }
    if (best <= opts.tol) break;
  }
  if (it.u.size() == 0) std::rethrow_exception(last_error);
  const NaturalMap map(p, gamma);

  CriticalPair out;
  out.x = map.x_of(it.u);
  out.lambda = map.l_of(it.u);
  out.w = -p.g.jacobian(out.x).transpose() * out.lambda;
  out.iterations = it.iterations;
  GeneralizedEquationResidual r;
  try {
    r = residual(p, out.x, out.lambda);
  } catch (const Error&) {
    r.r_v = r.r_y = kInf;
  }
  out.primal_residual = r.r_v;
  out.dual_residual = r.r_y;
  if (it.diverged) {
    out.status = SolveStatus::Diverged;
    return out;
  }
  if (r.max() > opts.tol) {
    out.status = SolveStatus::MaxIterations;
    return out;
  }
  out.status = SolveStatus::Converged;

  // Distinct converged pairs from nearby starts certify a continuum.
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int k = 0; k < opts.restarts; ++k) {
    Vec d(n + m);
    for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = normal(rng);
    const Vec start = it.u + opts.restart_radius * d / d.norm();
    Iterate other;
    try {
      other = newton(map, start, opts);
    } catch (const Error&) {
      continue;
    }
    if (other.diverged || (other.u - it.u).norm() <= opts.separation) continue;
    const GeneralizedEquationResidual ro = residual(p, map.x_of(other.u), map.l_of(other.u));
    if (ro.max() <= opts.tol) {
      out.status = SolveStatus::NonIsolated;
      break;
    }
  }

  try {
    out.qual_flags = check_qualifications(p.f, p.h, p.g, out.x, p.y);
  } catch (const Error&) {
    out.qual_flags.reset();
  }
  try {
    out.multiplier_unique = out.status == SolveStatus::Converged && multiplier_unique(p, out.x);
  } catch (const Error&) {
    out.multiplier_unique = false;
  }
  return out;
}

}  // namespace tiltlab
