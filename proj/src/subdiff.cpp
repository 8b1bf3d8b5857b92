#include "tiltlab/subdiff.hpp"

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

// ---- sets and cones ---------------------------------------------------------

bool SubgradientSet::contains(const Vec& g, double tol) const {
  return std::any_of(pieces.begin(), pieces.end(), [&](const Polyhedron& p) { return p.contains(g, tol); });
}

double SubgradientSet::distance(const Vec& g) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : pieces) best = std::min(best, (g - p.project(g)).norm());
  return best;
}

Vec SubgradientSet::nearest(const Vec& g) const {
  if (pieces.empty()) fail(ErrorKind::EmptySet, "nearest point of an empty subgradient set");
  Vec best = pieces.front().project(g);
  for (std::size_t i = 1; i < pieces.size(); ++i) {
    const Vec p = pieces[i].project(g);
    if ((p - g).norm() < (best - g).norm()) best = p;
  }
  return best;
}

ConeRep::ConeRep(Polyhedron set) : set_(std::move(set)) {
  if (!set_.contains(Vec::Zero(set_.dim()))) fail(ErrorKind::DomainViolation, "cone must contain the origin");
}

ConeRep ConeRep::zero(int n) { return ConeRep(Polyhedron::affine(Mat::Identity(n, n), Vec::Zero(n))); }

ConeRep ConeRep::whole(int n) { return ConeRep(Polyhedron::whole(n)); }

ConeRep ConeRep::from_constraints(const Mat& m) { return ConeRep(Polyhedron(m, Vec::Zero(m.rows()))); }

ConeRep ConeRep::from_generators(int n, const std::vector<Vec>& rays, const Mat& lineality) {
  return ConeRep(Polyhedron::from_generators(n, {Vec::Zero(n)}, rays, lineality));
}

bool ConeRep::is_zero() const { return set_.vrep().rays.empty() && set_.vrep().lineality.cols() == 0; }

bool ConeRep::is_subspace() const { return set_.vrep().rays.empty(); }

int ConeRep::linear_dim() const { return static_cast<int>(set_.vrep().lineality.cols()); }

bool ConeRep::equals(const ConeRep& other, double tol) const {
  auto inside = [tol](const ConeRep& a, const ConeRep& b) {
    for (const auto& r : a.rays()) {
      if (!b.contains(r, tol)) return false;
    }
    const Mat& l = a.lineality();
    for (Eigen::Index j = 0; j < l.cols(); ++j) {
      if (!b.contains(l.col(j), tol) || !b.contains(-l.col(j), tol)) return false;
    }
    return true;
  };
  return dim() == other.dim() && inside(*this, other) && inside(other, *this);
}

// ---- local model ------------------------------------------------------------

namespace {

void add_unique(std::vector<Vec>& pts, const Vec& p) { push_unique(pts, p, 1e-9 * (1.0 + p.norm())); }

std::vector<Vec> dedupe(const std::vector<Vec>& pts) {
  std::vector<Vec> out;
  for (const auto& p : pts) add_unique(out, p);
  return out;
}

LocalModel point_model(const Vec& g) {
  LocalModel m;
  m.points = {g};
  return m;
}

bool is_single_point(const LocalModel& m) {
  return m.regular && m.points.size() == 1 && m.rays.empty() && m.lines.empty();
}

LocalModel normalize(LocalModel m) {
  if (!m.regular) {
    m.points = essential_points(dedupe(m.points));
    if (m.points.size() == 1) m.regular = true;
  }
  return m;
}

LocalModel translate(LocalModel m, const Vec& g) {
  for (auto& p : m.points) p += g;
  if (m.hrep) m.hrep = Polyhedron(m.hrep->a(), m.hrep->b() + m.hrep->a() * g);
  return m;
}

LocalModel scale(LocalModel m, double c) {
  if (c == 0.0) {
    m.points = {Vec::Zero(m.points.front().size())};
    m.regular = true;
    m.hrep.reset();
    return m;
  }
  for (auto& p : m.points) p *= c;
  if (m.hrep && c > 0) {
    m.hrep = Polyhedron(m.hrep->a(), c * m.hrep->b());
  } else {
    m.hrep.reset();
  }
  return m;
}

LocalModel negate(const LocalModel& m) {
  if (!m.rays.empty() || !m.lines.empty()) {
    fail(ErrorKind::Unsupported, "negative multiple of a function with an unbounded subdifferential");
  }
  LocalModel out;
  out.regular = !m.regular;
  for (const auto& p : m.points) out.points.push_back(-p);
  return normalize(out);
}

LocalModel add(const LocalModel& a, const LocalModel& b) {
  if (is_single_point(a)) return translate(b, a.points.front());
  if (is_single_point(b)) return translate(a, b.points.front());
  if (a.regular != b.regular) {
    fail(ErrorKind::Unsupported, "sum of a nonregular term with a nonsmooth term");
  }
  LocalModel out;
  out.regular = a.regular;
  for (const auto& p : a.points) {
    for (const auto& q : b.points) add_unique(out.points, p + q);
  }
  out.rays = a.rays;
  out.rays.insert(out.rays.end(), b.rays.begin(), b.rays.end());
  out.lines = a.lines;
  out.lines.insert(out.lines.end(), b.lines.begin(), b.lines.end());
  return normalize(out);
}

LocalModel pull_back(const LocalModel& m, const Mat& j) {
  LocalModel out;
  out.regular = m.regular;
  for (const auto& p : m.points) add_unique(out.points, j.transpose() * p);
  for (const auto& r : m.rays) {
    const Vec q = j.transpose() * r;
    if (q.norm() > 1e-12) out.rays.push_back(q);
  }
  for (const auto& l : m.lines) {
    const Vec q = j.transpose() * l;
    if (q.norm() > 1e-12) out.lines.push_back(q);
  }
  return normalize(out);
}

bool is_active(double val, double top, double atol) { return top - val <= atol * (1.0 + std::abs(top)); }

LocalModel model(const FunctionExpr& f, const Vec& x, double atol) {
  const int n = f.dim();
  return std::visit(
      overloaded{
          [&](const expr::Poly& a) { return point_model(a.p.gradient(x)); },
          [&](const expr::MaxOfSmooth& a) {
            double top = -std::numeric_limits<double>::infinity();
            for (const auto& p : a.pieces) top = std::max(top, p(x));
            LocalModel m;
            for (const auto& p : a.pieces) {
              if (is_active(p(x), top, atol)) add_unique(m.points, p.gradient(x));
            }
            return m;
          },
          [&](const expr::NormL1&) {
            LocalModel m;
            Vec lo(n), hi(n);
            std::vector<int> zeros;
            Vec base(n);
            for (int i = 0; i < n; ++i) {
              if (std::abs(x(i)) <= atol) {
                lo(i) = -1.0;
                hi(i) = 1.0;
                base(i) = -1.0;
                zeros.push_back(i);
              } else {
                lo(i) = hi(i) = base(i) = x(i) > 0 ? 1.0 : -1.0;
              }
            }
            const std::size_t count = std::size_t{1} << zeros.size();
            for (std::size_t mask = 0; mask < count; ++mask) {
              Vec p = base;
              for (std::size_t k = 0; k < zeros.size(); ++k) {
                if (mask & (std::size_t{1} << k)) p(zeros[k]) = 1.0;
              }
              m.points.push_back(p);
            }
            m.hrep = Polyhedron::box(lo, hi);
            return m;
          },
          [&](const expr::NormL2&) {
            const double r = x.norm();
            if (r > atol) return point_model(x / r);
            if (n > 1) fail(ErrorKind::Unsupported, "subdifferential of the Euclidean norm at 0 is not polyhedral");
            LocalModel m;
            m.points = {vec({-1.0}), vec({1.0})};
            return m;
          },
          [&](const expr::NormLinf&) {
            const double top = x.lpNorm<Eigen::Infinity>();
            LocalModel m;
            for (int i = 0; i < n; ++i) {
              for (double s : {-1.0, 1.0}) {
                if (is_active(s * x(i), top, atol)) {
                  Vec e = Vec::Zero(n);
                  e(i) = s;
                  m.points.push_back(e);
                }
              }
            }
            return m;
          },
          [&](const expr::Indicator& a) {
            LocalModel m;
            m.points = {Vec::Zero(n)};
            for (int i : a.set.active_set(x, atol)) {
              const Vec row = a.set.a().row(i).transpose();
              if (row.norm() > 0) m.rays.push_back(row);
            }
            return m;
          },
          [&](const expr::Sum& a) {
            LocalModel acc = model(a.terms.front(), x, atol);
            for (std::size_t k = 1; k < a.terms.size(); ++k) acc = add(acc, model(a.terms[k], x, atol));
            return acc;
          },
          [&](const expr::Tilted& a) { return translate(model(a.base, x, atol), -a.v); },
          [&](const expr::Squared& a) {
            const double g = evaluate(a.inner, x).value();
            LocalModel m = model(a.inner, x, atol);
            if (g <= atol) {
              LocalModel z;
              z.points = {Vec::Zero(n)};
              z.rays = m.rays;
              z.lines = m.lines;
              return z;
            }
            return scale(m, 2.0 * g);
          },
          [&](const expr::Precomposed& a) {
            const Vec z = a.map.value(x) + a.shift;
            return pull_back(model(a.outer, z, atol), a.map.jacobian(x));
          },
          [&](const expr::Scaled& a) {
            LocalModel m = model(a.base, x, atol);
            if (a.factor >= 0) return scale(m, a.factor);
            return scale(negate(m), -a.factor);
          },
      },
      f.node().v);
}

Mat lines_matrix(const std::vector<Vec>& lines, int n) {
  if (lines.empty()) return Mat(n, 0);
  Mat l(n, static_cast<Eigen::Index>(lines.size()));
  for (std::size_t k = 0; k < lines.size(); ++k) l.col(static_cast<Eigen::Index>(k)) = lines[k];
  return column_basis(l, n);
}

Polyhedron regular_set(const LocalModel& m, int n) {
  if (m.hrep) return *m.hrep;
  return Polyhedron::from_generators(n, m.points, m.rays, lines_matrix(m.lines, n));
}

Polyhedron singleton(const Vec& p) { return Polyhedron::box(p, p); }

}  // namespace

std::vector<Vec> essential_points(const std::vector<Vec>& pts, double tol) {
  if (pts.size() <= 1) return pts;
  const int n = static_cast<int>(pts.front().size());
  std::vector<Vec> out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    LinearProgram lp(n + 1);
    lp.c(n) = -1.0;
    std::vector<Vec> rows;
    std::vector<double> rhs;
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (j == i) continue;
      Vec r(n + 1);
      r << pts[i] - pts[j], 1.0;
      rows.push_back(r);
      rhs.push_back(0.0);
    }
    for (int k = 0; k <= n; ++k) {
      Vec r = Vec::Zero(n + 1);
      r(k) = 1.0;
      rows.push_back(r);
      rhs.push_back(1.0);
      if (k < n) {
        rows.push_back(-r);
        rhs.push_back(1.0);
      }
    }
    lp.a_ub = stack_rows(rows, n + 1);
    lp.b_ub = Eigen::Map<Vec>(rhs.data(), static_cast<Eigen::Index>(rhs.size()));
    const LpResult res = solve_lp(lp);
    if (res.status == LpStatus::Optimal && -res.objective > tol) out.push_back(pts[i]);
  }
  return out;
}

void require_in_domain(const FunctionExpr& f, const Vec& x, const char* where) {
  require_dim(x.size(), f.dim(), where);
  if (evaluate(f, x).is_infinite()) fail(ErrorKind::DomainViolation, std::string(where) + ": point outside the domain");
}

LocalModel local_model(const FunctionExpr& f, const Vec& x, double atol) {
  require_in_domain(f, x, "local_model");
  return model(f, x, atol);
}

SubgradientSet limiting_subdiff(const FunctionExpr& f, const Vec& x, double atol) {
  const LocalModel m = local_model(f, x, atol);
  SubgradientSet s;
  s.dim = f.dim();
  if (m.regular) {
    s.pieces = {regular_set(m, f.dim())};
    s.convex_hint = true;
  } else {
    for (const auto& p : m.points) s.pieces.push_back(singleton(p));
  }
  return s;
}

SubgradientSet proximal_subdiff(const FunctionExpr& f, const Vec& x, double atol) {
  const LocalModel m = local_model(f, x, atol);
  SubgradientSet s;
  s.dim = f.dim();
  s.convex_hint = true;
  // A nonregular point has at least two distinct limiting subgradients and no
  // quadratic minorant.
  if (m.regular) s.pieces = {regular_set(m, f.dim())};
  return s;
}

ConeRep horizon_subdiff(const FunctionExpr& f, const Vec& x, double atol) {
  const LocalModel m = local_model(f, x, atol);
  const int n = f.dim();
  if (!m.regular || (m.rays.empty() && m.lines.empty())) return ConeRep::zero(n);
  return ConeRep::from_generators(n, m.rays, lines_matrix(m.lines, n));
}

ConeRep critical_cone(const FunctionExpr& f, const Vec& x, const Vec& v, double atol) {
  require_dim(v.size(), f.dim(), "critical_cone");
  const LocalModel m = local_model(f, x, atol);
  const int n = f.dim();
  std::vector<Vec> pts = m.points;
  if (m.hrep) pts = m.hrep->vrep().vertices;
  // Rows shared by every piece: u must keep df finite.
  std::vector<Vec> base;
  for (const auto& r : m.rays) base.push_back(r);
  for (const auto& l : m.lines) {
    base.push_back(l);
    base.push_back(-l);
  }
  // df(u) - <v,u> = max_k <g_k - v, u> (regular) or min_k (nonregular); the cone
  // is the union over k of the pieces where the k-th term attains 0.
  const double sense = m.regular ? 1.0 : -1.0;
  auto piece = [&](std::size_t k) {
    std::vector<Vec> rows = base;
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (j == k) continue;
      rows.push_back(sense * (pts[j] - v));
    }
    rows.push_back(pts[k] - v);
    rows.push_back(v - pts[k]);
    return ConeRep::from_constraints(stack_rows(rows, n));
  };
  if (m.regular && regular_set(m, n).contains(v, 1e-8)) {
    std::vector<Vec> rows = base;
    for (const auto& g : pts) rows.push_back(g - v);
    return ConeRep::from_constraints(stack_rows(rows, n));
  }
  std::vector<ConeRep> parts;
  for (std::size_t k = 0; k < pts.size(); ++k) parts.push_back(piece(k));
  auto contained = [](const ConeRep& a, const ConeRep& b) {
    for (const auto& r : a.rays()) {
      if (!b.contains(r)) return false;
    }
    for (Eigen::Index j = 0; j < a.lineality().cols(); ++j) {
      if (!b.contains(a.lineality().col(j)) || !b.contains(-a.lineality().col(j))) return false;
    }
    return true;
  };
  for (const auto& cand : parts) {
    if (std::all_of(parts.begin(), parts.end(), [&](const ConeRep& p) { return contained(p, cand); })) return cand;
  }
  fail(ErrorKind::Unsupported, "critical cone is a nonconvex union of cones");
}

double criticality_residual(const FunctionExpr& f, const Vec& v, const Vec& x, double atol) {
  if (evaluate(f, x).is_infinite()) return std::numeric_limits<double>::infinity();
  return limiting_subdiff(tilt(f, v), x, atol).distance(Vec::Zero(f.dim()));
}

}  // namespace tiltlab
