#include "tiltlab/manifold.hpp"

#include <algorithm>
#include <sstream>

#include "tiltlab/linalg.hpp"

namespace tiltlab {

ManifoldSpec ManifoldSpec::affine_face(const Polyhedron& p, std::vector<int> active) {
  ManifoldSpec m;
  m.kind_ = Kind::AffineFace;
  m.n_ = p.dim();
  std::sort(active.begin(), active.end());
  for (int i : active) {
    if (i < 0 || i >= p.rows()) fail(ErrorKind::DimensionMismatch, "face active index out of range");
  }
  Mat rows(static_cast<Eigen::Index>(active.size()), p.dim());
  for (std::size_t k = 0; k < active.size(); ++k) rows.row(static_cast<Eigen::Index>(k)) = p.a().row(active[k]);
  m.dim_ = m.n_ - rank(rows);
  m.poly_ = p;
  m.active_ = std::move(active);
  return m;
}

ManifoldSpec ManifoldSpec::zero_set(const SmoothMap& f, const Vec& base) {
  require_dim(base.size(), f.n(), "zero_set base");
  const Vec val = f.value(base);
  if (val.lpNorm<Eigen::Infinity>() > 1e-8) fail(ErrorKind::DomainViolation, "zero_set base is not on the zero set");
  const Mat j = f.jacobian(base);
  if (rank(j) < f.m()) fail(ErrorKind::Qualification, "zero_set Jacobian is rank deficient at base");
  ManifoldSpec m;
  m.kind_ = Kind::SmoothZeroSet;
  m.n_ = f.n();
  m.dim_ = f.n() - f.m();
  m.map_ = f;
  m.base_ = base;
  return m;
}

ManifoldSpec ManifoldSpec::affine(const Mat& e, const Vec& f) {
  if (e.rows() == 0) return whole(static_cast<int>(e.cols()));
  const Polyhedron p = Polyhedron::affine(e, f);
  std::vector<int> all(static_cast<std::size_t>(p.rows()));
  for (int i = 0; i < p.rows(); ++i) all[i] = i;
  return affine_face(p, all);
}

ManifoldSpec ManifoldSpec::whole(int n) { return affine_face(Polyhedron::whole(n), {}); }

bool ManifoldSpec::contains(const Vec& x, double tol) const {
  require_dim(x.size(), n_, "ManifoldSpec::contains");
  if (kind_ == Kind::AffineFace) {
    for (int i : active_) {
      if (std::abs(poly_->a().row(i).dot(x) - poly_->b()(i)) > tol) return false;
    }
    return true;
  }
  return map_->value(x).lpNorm<Eigen::Infinity>() <= tol;
}

Mat ManifoldSpec::normal_basis(const Vec& x) const {
  if (kind_ == Kind::AffineFace) {
    Mat rows(static_cast<Eigen::Index>(active_.size()), n_);
    for (std::size_t k = 0; k < active_.size(); ++k) rows.row(static_cast<Eigen::Index>(k)) = poly_->a().row(active_[k]);
    return column_basis(rows.transpose(), n_);
  }
  return column_basis(map_->jacobian(x).transpose(), n_);
}

Mat ManifoldSpec::tangent_basis(const Vec& x) const {
  const Mat nb = normal_basis(x);
  return null_space(nb.transpose(), n_);
}

std::vector<Polynomial> ManifoldSpec::equations() const {
  std::vector<Polynomial> out;
  if (kind_ == Kind::AffineFace) {
    // One equation per independent active row.
    std::vector<Vec> kept;
    for (int i : active_) {
      const Vec a = poly_->a().row(i).transpose();
      Mat trial(n_, static_cast<Eigen::Index>(kept.size()) + 1);
      for (std::size_t k = 0; k < kept.size(); ++k) trial.col(static_cast<Eigen::Index>(k)) = kept[k];
      trial.col(trial.cols() - 1) = a;
      if (rank(trial) > static_cast<int>(kept.size())) {
        kept.push_back(a);
        out.push_back(Polynomial::affine(a, -poly_->b()(i)));
      }
    }
    return out;
  }
  return map_->components();
}

Vec ManifoldSpec::project(const Vec& p) const {
  require_dim(p.size(), n_, "ManifoldSpec::project");
  if (kind_ == Kind::AffineFace) {
    const auto eqs = equations();
    if (eqs.empty()) return p;
    Mat e(static_cast<Eigen::Index>(eqs.size()), n_);
    Vec f(static_cast<Eigen::Index>(eqs.size()));
    const Vec zero = Vec::Zero(n_);
    for (std::size_t k = 0; k < eqs.size(); ++k) {
      e.row(static_cast<Eigen::Index>(k)) = eqs[k].gradient(zero).transpose();
      f(static_cast<Eigen::Index>(k)) = -eqs[k](zero);
    }
    // x = p - E'(EE')^{-1}(Ep - f)
    const Vec r = e * p - f;
    return p - e.transpose() * (e * e.transpose()).ldlt().solve(r);
  }
  // Lagrange-Newton on min |x - p|^2 s.t. F(x) = 0, started from the base point's side.
  Vec x = p;
  const int m = map_->m();
  Vec lam = Vec::Zero(m);
  for (int it = 0; it < 100; ++it) {
    const Vec fx = map_->value(x);
    const Mat j = map_->jacobian(x);
    Vec g(n_ + m);
    g << (x - p) + j.transpose() * lam, fx;
    if (g.norm() <= 1e-13 * (1.0 + p.norm())) break;
    Mat k = Mat::Zero(n_ + m, n_ + m);
    Mat h = Mat::Identity(n_, n_);
    const auto& comps = map_->components();
    for (int i = 0; i < m; ++i) h += lam(i) * comps[i].hessian(x);
    k.topLeftCorner(n_, n_) = h;
    k.topRightCorner(n_, m) = j.transpose();
    k.bottomLeftCorner(m, n_) = j;
    const Vec step = k.fullPivLu().solve(-g);
    x += step.head(n_);
    lam += step.tail(m);
  }
  return x;
}

std::string ManifoldSpec::describe() const {
  std::ostringstream os;
  if (kind_ == Kind::AffineFace) {
    os << "affine_face(dim=" << dim_ << ", active=[";
    for (std::size_t k = 0; k < active_.size(); ++k) os << (k ? "," : "") << active_[k];
    os << "])";
  } else {
    os << "zero_set(dim=" << dim_ << ", equations=" << map_->m() << ")";
  }
  return os.str();
}

std::vector<FaceEntry> face_lattice(const Polyhedron& p, std::size_t max_faces) {
  std::vector<FaceEntry> out;
  for (auto& f : p.faces(max_faces)) {
    out.push_back({f.active, ManifoldSpec::affine_face(p, f.active), f.dim});
  }
  return out;
}

}  // namespace tiltlab
