#include "tiltlab/polyhedron.hpp"

#include <algorithm>
#include <deque>
#include <set>

#include "tiltlab/linalg.hpp"
#include "tiltlab/lp.hpp"

namespace tiltlab {
namespace {

struct DdRay {
  Vec w;
  std::vector<char> zero;  // tightness per processed row
};

bool subset_of(const std::vector<char>& common, const std::vector<char>& z) {
  for (std::size_t i = 0; i < common.size(); ++i) {
    if (common[i] && !z[i]) return false;
  }
  return true;
}

// Extreme rays of the pointed cone {w : M w <= 0}, M of full column rank.
std::vector<Vec> pointed_dd(const Mat& m, double tol) {
  const Eigen::Index k = m.cols();
  const Eigen::Index rows = m.rows();
  // Initial simplicial cone from k independent rows.
  std::vector<int> chosen;
  Mat basis(0, k);
  for (Eigen::Index i = 0; i < rows && static_cast<Eigen::Index>(chosen.size()) < k; ++i) {
    Mat trial(basis.rows() + 1, k);
    trial << basis, m.row(i);
    if (rank(trial, 1e-10) > basis.rows()) {
      basis = trial;
      chosen.push_back(static_cast<int>(i));
    }
  }
  if (static_cast<Eigen::Index>(chosen.size()) < k) {
    fail(ErrorKind::Unsupported, "double description: cone is not pointed");
  }
  const Mat inv = basis.inverse();
  std::vector<char> processed(static_cast<std::size_t>(rows), 0);
  for (int c : chosen) processed[c] = 1;

  auto zero_set = [&](const Vec& w) {
    std::vector<char> z(static_cast<std::size_t>(rows), 0);
    for (Eigen::Index i = 0; i < rows; ++i) {
      if (processed[i] && std::abs(m.row(i).dot(w)) <= tol) z[i] = 1;
    }
    return z;
  };

  std::vector<DdRay> rays;
  for (Eigen::Index j = 0; j < k; ++j) {
    Vec w = -inv.col(j);
    w.normalize();
    rays.push_back({w, {}});
  }
  for (auto& r : rays) r.zero = zero_set(r.w);

  for (Eigen::Index i = 0; i < rows; ++i) {
    if (processed[i]) continue;
    const Vec a = m.row(i).transpose();
    std::vector<double> s(rays.size());
    std::vector<int> pos, neg;
    for (std::size_t r = 0; r < rays.size(); ++r) {
      s[r] = a.dot(rays[r].w);
      if (s[r] > tol) pos.push_back(static_cast<int>(r));
      if (s[r] < -tol) neg.push_back(static_cast<int>(r));
    }
    std::vector<DdRay> next;
    for (std::size_t r = 0; r < rays.size(); ++r) {
      if (s[r] <= tol) next.push_back(rays[r]);
    }
    for (int p : pos) {
      for (int q : neg) {
        std::vector<char> common(static_cast<std::size_t>(rows), 0);
        int count = 0;
        for (Eigen::Index t = 0; t < rows; ++t) {
          common[t] = rays[p].zero[t] && rays[q].zero[t];
          count += common[t];
        }
        if (count < k - 2) continue;
        bool adjacent = true;
        for (std::size_t r = 0; r < rays.size() && adjacent; ++r) {
          if (static_cast<int>(r) == p || static_cast<int>(r) == q) continue;
          if (subset_of(common, rays[r].zero)) adjacent = false;
        }
        if (!adjacent) continue;
        Vec w = s[p] * rays[q].w - s[q] * rays[p].w;
        const double nrm = w.norm();
        if (nrm <= tol) continue;
        next.push_back({w / nrm, {}});
      }
    }
    processed[i] = 1;
    for (auto& r : next) r.zero = zero_set(r.w);
    rays = std::move(next);
  }
  std::vector<Vec> out;
  for (const auto& r : rays) push_unique(out, r.w, 1e-9);
  return out;
}

}  // namespace

VRep cone_generators(const Mat& m_in, int dim, double tol) {
  Mat m(0, dim);
  for (Eigen::Index i = 0; i < m_in.rows(); ++i) {
    const double nrm = m_in.row(i).norm();
    if (nrm <= tol) continue;
    m.conservativeResize(m.rows() + 1, Eigen::NoChange);
    m.row(m.rows() - 1) = m_in.row(i) / nrm;
  }
  VRep out;
  out.lineality = null_space(m, dim, 1e-10);
  const int l = static_cast<int>(out.lineality.cols());
  if (l == dim) return out;
  const Mat q = l > 0 ? null_space(out.lineality.transpose(), dim, 1e-10) : Mat::Identity(dim, dim);
  const Mat mq = m * q;
  for (const Vec& w : pointed_dd(mq, tol)) {
    Vec r = q * w;
    r.normalize();
    out.rays.push_back(r);
  }
  return out;
}

Polyhedron::Polyhedron(Mat a, Vec b) : a_(std::move(a)), b_(std::move(b)), cache_(std::make_shared<Cache>()) {
  require_dim(b_.size(), a_.rows(), "Polyhedron rows");
  if (a_.cols() < 1 || a_.cols() > kMaxDim) {
    fail(ErrorKind::Budget, "polyhedron dimension must be in [1, 8]");
  }
  if (!a_.allFinite() || !b_.allFinite()) fail(ErrorKind::DomainViolation, "non-finite polyhedron data");
}

Polyhedron Polyhedron::whole(int n) { return Polyhedron(Mat(0, n), Vec(0)); }

Polyhedron Polyhedron::box(const Vec& lo, const Vec& hi) {
  const auto n = lo.size();
  require_dim(hi.size(), n, "box");
  Mat a(2 * n, n);
  a << Mat::Identity(n, n), -Mat::Identity(n, n);
  Vec b(2 * n);
  b << hi, -lo;
  return Polyhedron(a, b);
}

Polyhedron Polyhedron::affine(const Mat& e, const Vec& f) {
  Mat a(2 * e.rows(), e.cols());
  a << e, -e;
  Vec b(2 * f.size());
  b << f, -f;
  return Polyhedron(a, b);
}

Polyhedron Polyhedron::from_generators(int n, const std::vector<Vec>& vertices,
                                       const std::vector<Vec>& rays, const Mat& lineality) {
  const Mat lin = lineality.size() ? lineality : Mat(n, 0);
  if (vertices.empty()) {
    Mat a = Mat::Zero(1, n);
    Vec b(1);
    b << -1.0;
    return Polyhedron(a, b);
  }
  // Polar of the homogenized cone: rows (v,1), (r,0), +-(l,0).
  const auto rows = static_cast<Eigen::Index>(vertices.size() + rays.size()) + 2 * lin.cols();
  Mat m(rows, n + 1);
  Eigen::Index k = 0;
  for (const auto& v : vertices) {
    require_dim(v.size(), n, "from_generators vertex");
    m.row(k).head(n) = v.transpose();
    m(k++, n) = 1.0;
  }
  for (const auto& r : rays) {
    require_dim(r.size(), n, "from_generators ray");
    m.row(k).head(n) = r.transpose();
    m(k++, n) = 0.0;
  }
  for (Eigen::Index j = 0; j < lin.cols(); ++j) {
    m.row(k).head(n) = lin.col(j).transpose();
    m(k++, n) = 0.0;
    m.row(k).head(n) = -lin.col(j).transpose();
    m(k++, n) = 0.0;
  }
  const VRep polar = cone_generators(m, n + 1);
  std::vector<Vec> arows;
  std::vector<double> brows;
  auto add = [&](const Vec& g) {
    const Vec a = g.head(n);
    const double nrm = a.norm();
    if (nrm <= 1e-12) return;
    arows.push_back(a / nrm);
    brows.push_back(-g(n) / nrm);
  };
  for (const auto& g : polar.rays) add(g);
  for (Eigen::Index j = 0; j < polar.lineality.cols(); ++j) {
    add(polar.lineality.col(j));
    add(-polar.lineality.col(j));
  }
  Mat a = stack_rows(arows, n);
  Vec b(static_cast<Eigen::Index>(brows.size()));
  for (std::size_t i = 0; i < brows.size(); ++i) b(static_cast<Eigen::Index>(i)) = brows[i];
  Polyhedron p(a, b);
  // Cache the given generators; the H-rep above describes the same set by construction.
  std::call_once(p.cache_->once, [&] {
    p.cache_->vrep.vertices = vertices;
    p.cache_->vrep.rays = rays;
    p.cache_->vrep.lineality = lin.cols() ? column_basis(lin, n, 1e-10) : Mat(n, 0);
  });
  return p;
}

const VRep& Polyhedron::vrep() const {
  std::call_once(cache_->once, [this] {
    const int n = dim();
    Mat m(a_.rows() + 1, n + 1);
    m.topLeftCorner(a_.rows(), n) = a_;
    m.topRightCorner(a_.rows(), 1) = -b_;
    m.row(a_.rows()).setZero();
    m(a_.rows(), n) = -1.0;
    const VRep cone = cone_generators(m, n + 1);
    VRep out;
    out.lineality = Mat(n, 0);
    std::vector<Vec> lin;
    for (Eigen::Index j = 0; j < cone.lineality.cols(); ++j) lin.push_back(cone.lineality.col(j).head(n));
    if (!lin.empty()) {
      Mat l(n, static_cast<Eigen::Index>(lin.size()));
      for (std::size_t j = 0; j < lin.size(); ++j) l.col(static_cast<Eigen::Index>(j)) = lin[j];
      out.lineality = column_basis(l, n, 1e-10);
    }
    for (const auto& g : cone.rays) {
      if (g(n) > 1e-10) {
        out.vertices.push_back(g.head(n) / g(n));
      } else {
        Vec r = g.head(n);
        if (r.norm() > 1e-12) out.rays.push_back(r.normalized());
      }
    }
    std::sort(out.vertices.begin(), out.vertices.end(), lex_less);
    std::sort(out.rays.begin(), out.rays.end(), lex_less);
    cache_->vrep = std::move(out);
  });
  return cache_->vrep;
}

bool Polyhedron::is_empty() const {
  return !feasible_point(a_, b_, Mat(0, dim()), Vec(0)).has_value();
}

bool Polyhedron::contains(const Vec& x, double tol) const {
  require_dim(x.size(), dim(), "Polyhedron::contains");
  for (Eigen::Index i = 0; i < a_.rows(); ++i) {
    if (a_.row(i).dot(x) > b_(i) + tol) return false;
  }
  return true;
}

std::vector<int> Polyhedron::implicit_equalities(double tol) const {
  std::vector<int> out;
  if (is_empty()) fail(ErrorKind::EmptySet, "implicit equalities of an empty polyhedron");
  for (Eigen::Index i = 0; i < a_.rows(); ++i) {
    LinearProgram lp(dim());
    lp.c = a_.row(i).transpose();  // minimize a_i x; implicit iff min is b_i
    lp.a_ub = a_;
    lp.b_ub = b_;
    const auto r = solve_lp(lp);
    if (r.status == LpStatus::Optimal && r.objective >= b_(i) - tol) out.push_back(static_cast<int>(i));
  }
  return out;
}

int Polyhedron::affine_dim(double tol) const {
  const auto& v = vrep();
  if (v.vertices.empty()) return -1;
  const int n = dim();
  std::vector<Vec> dirs;
  for (std::size_t i = 1; i < v.vertices.size(); ++i) dirs.push_back(v.vertices[i] - v.vertices[0]);
  for (const auto& r : v.rays) dirs.push_back(r);
  Mat d(n, static_cast<Eigen::Index>(dirs.size()) + v.lineality.cols());
  for (std::size_t i = 0; i < dirs.size(); ++i) d.col(static_cast<Eigen::Index>(i)) = dirs[i];
  if (v.lineality.cols()) d.rightCols(v.lineality.cols()) = v.lineality;
  return rank(d, tol * 100);
}

bool Polyhedron::is_bounded() const {
  const auto& v = vrep();
  return v.rays.empty() && v.lineality.cols() == 0;
}

std::vector<int> Polyhedron::active_set(const Vec& x, double tol) const {
  require_dim(x.size(), dim(), "Polyhedron::active_set");
  std::vector<int> out;
  for (Eigen::Index i = 0; i < a_.rows(); ++i) {
    if (std::abs(a_.row(i).dot(x) - b_(i)) <= tol) out.push_back(static_cast<int>(i));
  }
  return out;
}

Vec Polyhedron::project(const Vec& x) const {
  require_dim(x.size(), dim(), "Polyhedron::project");
  return project_polyhedral(x, a_, b_, Mat(0, dim()), Vec(0));
}

Polyhedron Polyhedron::intersect(const Polyhedron& other) const {
  require_dim(other.dim(), dim(), "Polyhedron::intersect");
  Mat a(a_.rows() + other.a_.rows(), dim());
  a << a_, other.a_;
  Vec b(b_.size() + other.b_.size());
  b << b_, other.b_;
  return Polyhedron(a, b);
}

std::vector<Polyhedron::Face> Polyhedron::faces(std::size_t max_faces, double tol) const {
  const auto& v = vrep();
  if (v.vertices.empty()) fail(ErrorKind::EmptySet, "face lattice of an empty polyhedron");
  const int n = dim();
  auto tight_vertex = [&](const Vec& x, int i) { return std::abs(a_.row(i).dot(x) - b_(i)) <= tol * 10; };
  auto tight_ray = [&](const Vec& r, int i) { return std::abs(a_.row(i).dot(r)) <= tol * 10; };
  auto closure = [&](const std::vector<Vec>& verts, const std::vector<Vec>& rays) {
    std::vector<int> act;
    for (int i = 0; i < rows(); ++i) {
      bool all = true;
      for (const auto& x : verts) all = all && tight_vertex(x, i);
      for (const auto& r : rays) all = all && tight_ray(r, i);
      if (all) act.push_back(i);
    }
    return act;
  };
  auto face_dim = [&](const std::vector<Vec>& verts, const std::vector<Vec>& rays) {
    Mat d(n, static_cast<Eigen::Index>(verts.size() + rays.size()) - 1 + v.lineality.cols());
    Eigen::Index k = 0;
    for (std::size_t i = 1; i < verts.size(); ++i) d.col(k++) = verts[i] - verts[0];
    for (const auto& r : rays) d.col(k++) = r;
    for (Eigen::Index j = 0; j < v.lineality.cols(); ++j) d.col(k++) = v.lineality.col(j);
    return rank(d, 1e-8);
  };

  std::vector<Face> out;
  std::set<std::vector<int>> seen;
  std::deque<Face> queue;
  Face top{closure(v.vertices, v.rays), 0, v.vertices, v.rays};
  top.dim = face_dim(top.vertices, top.rays);
  seen.insert(top.active);
  queue.push_back(top);
  while (!queue.empty()) {
    Face f = std::move(queue.front());
    queue.pop_front();
    for (int i = 0; i < rows(); ++i) {
      if (std::binary_search(f.active.begin(), f.active.end(), i)) continue;
      Face g;
      for (const auto& x : f.vertices) {
        if (tight_vertex(x, i)) g.vertices.push_back(x);
      }
      if (g.vertices.empty()) continue;
      for (const auto& r : f.rays) {
        if (tight_ray(r, i)) g.rays.push_back(r);
      }
      g.active = closure(g.vertices, g.rays);
      if (!seen.insert(g.active).second) continue;
      g.dim = face_dim(g.vertices, g.rays);
      queue.push_back(std::move(g));
    }
    out.push_back(std::move(f));
    if (out.size() > max_faces) fail(ErrorKind::Budget, "face budget exceeded");
  }
  std::sort(out.begin(), out.end(), [](const Face& x, const Face& y) {
    if (x.dim != y.dim) return x.dim > y.dim;
    return x.active < y.active;
  });
  return out;
}

bool relative_interior_contains(const Polyhedron& s, const Vec& p, double tol) {
  require_dim(p.size(), s.dim(), "relative_interior_contains");
  if (s.is_empty()) fail(ErrorKind::EmptySet, "relative interior of an empty set");
  const auto implicit = s.implicit_equalities(tol);
  for (int i = 0; i < s.rows(); ++i) {
    const double slack = s.b()(i) - s.a().row(i).dot(p);
    if (std::binary_search(implicit.begin(), implicit.end(), i)) {
      if (std::abs(slack) > tol) return false;
    } else if (slack < tol) {
      return false;
    }
  }
  return true;
}

}  // namespace tiltlab
