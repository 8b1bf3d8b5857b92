#include "tiltlab/lp.hpp"

#include <algorithm>

#include "tiltlab/linalg.hpp"

namespace tiltlab {
namespace {

// Tableau simplex on: minimize cost'z, T z = rhs, z >= 0, with an initial basis.
class Tableau {
 public:
  Tableau(Mat rows, Vec rhs, std::vector<int> basis, double tol)
      : t_(std::move(rows)), rhs_(std::move(rhs)), basis_(std::move(basis)), tol_(tol) {}

  // Returns false when unbounded.
  bool minimize(const Vec& cost, const std::vector<bool>& allowed) {
    const Eigen::Index m = t_.rows();
    const Eigen::Index nc = t_.cols();
    for (int iter = 0; iter < 50000; ++iter) {
      // reduced costs r = c - c_B' T (T is kept in canonical form)
      int enter = -1;
      for (Eigen::Index j = 0; j < nc; ++j) {
        if (!allowed[j] || is_basic(static_cast<int>(j))) continue;
        double r = cost(j);
        for (Eigen::Index i = 0; i < m; ++i) r -= cost(basis_[i]) * t_(i, j);
        if (r < -tol_) {
          enter = static_cast<int>(j);
          break;
        }
      }
      if (enter < 0) return true;
      int leave = -1;
      double best = 0.0;
      for (Eigen::Index i = 0; i < m; ++i) {
        if (t_(i, enter) > tol_) {
          const double ratio = rhs_(i) / t_(i, enter);
          if (leave < 0 || ratio < best - 1e-14 ||
              (std::abs(ratio - best) <= 1e-14 && basis_[i] < basis_[leave])) {
            leave = static_cast<int>(i);
            best = ratio;
          }
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
    }
    fail(ErrorKind::NotConverged, "simplex iteration limit");
  }

  void pivot(int row, int col) {
    const double p = t_(row, col);
    t_.row(row) /= p;
    rhs_(row) /= p;
    for (Eigen::Index i = 0; i < t_.rows(); ++i) {
      if (i == row) continue;
      const double f = t_(i, col);
      if (f != 0.0) {
        t_.row(i) -= f * t_.row(row);
        rhs_(i) -= f * rhs_(row);
      }
    }
    basis_[row] = col;
  }

  bool is_basic(int j) const { return std::find(basis_.begin(), basis_.end(), j) != basis_.end(); }

  void drop_row(int row) {
    const Eigen::Index m = t_.rows();
    Mat nt(m - 1, t_.cols());
    Vec nr(m - 1);
    std::vector<int> nb;
    for (Eigen::Index i = 0, k = 0; i < m; ++i) {
      if (i == row) continue;
      nt.row(k) = t_.row(i);
      nr(k) = rhs_(i);
      nb.push_back(basis_[i]);
      ++k;
    }
    t_ = std::move(nt);
    rhs_ = std::move(nr);
    basis_ = std::move(nb);
  }

  Vec solution(Eigen::Index ncols) const {
    Vec z = Vec::Zero(ncols);
    for (std::size_t i = 0; i < basis_.size(); ++i) {
      if (basis_[i] < ncols) z(basis_[i]) = rhs_(static_cast<Eigen::Index>(i));
    }
    return z;
  }

  Mat& table() { return t_; }
  std::vector<int>& basis() { return basis_; }
  const Vec& rhs() const { return rhs_; }

 private:
  Mat t_;
  Vec rhs_;
  std::vector<int> basis_;
  double tol_;
};

}  // namespace

LpResult solve_lp(const LinearProgram& lp, double tol) {
  const int n = lp.dim();
  const auto mu = lp.a_ub.rows();
  const auto me = lp.a_eq.rows();
  require_dim(lp.a_ub.cols(), n, "solve_lp A_ub");
  require_dim(lp.a_eq.cols(), n, "solve_lp A_eq");
  require_dim(lp.b_ub.size(), mu, "solve_lp b_ub");
  require_dim(lp.b_eq.size(), me, "solve_lp b_eq");

  const Eigen::Index m = mu + me;
  const Eigen::Index nstruct = 2 * n + mu;  // p, q, slacks
  const Eigen::Index ncols = nstruct + m;   // + artificials
  Mat rows = Mat::Zero(m, ncols);
  Vec rhs(m);
  if (mu > 0) {
    rows.block(0, 0, mu, n) = lp.a_ub;
    rows.block(0, n, mu, n) = -lp.a_ub;
    rows.block(0, 2 * n, mu, mu) = Mat::Identity(mu, mu);
    rhs.head(mu) = lp.b_ub;
  }
  if (me > 0) {
    rows.block(mu, 0, me, n) = lp.a_eq;
    rows.block(mu, n, me, n) = -lp.a_eq;
    rhs.tail(me) = lp.b_eq;
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    if (rhs(i) < 0) {
      rows.row(i) *= -1.0;
      rhs(i) *= -1.0;
    }
    rows(i, nstruct + i) = 1.0;
  }
  std::vector<int> basis(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) basis[i] = static_cast<int>(nstruct + i);

  Tableau tab(rows, rhs, basis, tol);
  Vec phase1 = Vec::Zero(ncols);
  phase1.tail(m).setOnes();
  std::vector<bool> all(static_cast<std::size_t>(ncols), true);
  tab.minimize(phase1, all);
  double infeas = 0.0;
  for (std::size_t i = 0; i < tab.basis().size(); ++i) {
    if (tab.basis()[i] >= nstruct) infeas += tab.rhs()(static_cast<Eigen::Index>(i));
  }
  const double scale = 1.0 + (m > 0 ? rhs.cwiseAbs().maxCoeff() : 0.0);
  LpResult res;
  if (infeas > 1e-8 * scale) {
    res.status = LpStatus::Infeasible;
    return res;
  }
  // Drive remaining artificials out of the basis, or drop redundant rows.
  for (int i = static_cast<int>(tab.basis().size()) - 1; i >= 0; --i) {
    if (tab.basis()[i] < nstruct) continue;
    int col = -1;
    for (Eigen::Index j = 0; j < nstruct; ++j) {
      if (std::abs(tab.table()(i, j)) > 1e-9 && !tab.is_basic(static_cast<int>(j))) {
        col = static_cast<int>(j);
        break;
      }
    }
    if (col >= 0) {
      tab.pivot(i, col);
    } else {
      tab.drop_row(i);
    }
  }
  Vec phase2 = Vec::Zero(ncols);
  phase2.head(n) = lp.c;
  phase2.segment(n, n) = -lp.c;
  std::vector<bool> structural(static_cast<std::size_t>(ncols), false);
  std::fill(structural.begin(), structural.begin() + nstruct, true);
  if (!tab.minimize(phase2, structural)) {
    res.status = LpStatus::Unbounded;
    return res;
  }
  const Vec z = tab.solution(ncols);
  res.x = z.head(n) - z.segment(n, n);
  res.objective = lp.c.dot(res.x);
  res.status = LpStatus::Optimal;
  return res;
}

std::optional<Vec> feasible_point(const Mat& a, const Vec& b, const Mat& e, const Vec& f,
                                  double tol) {
  const int n = static_cast<int>(std::max(a.cols(), e.cols()));
  LinearProgram lp(n);
  lp.a_ub = a.rows() ? a : Mat(0, n);
  lp.b_ub = b;
  lp.a_eq = e.rows() ? e : Mat(0, n);
  lp.b_eq = f;
  const auto r = solve_lp(lp, tol);
  if (r.status != LpStatus::Optimal) return std::nullopt;
  return r.x;
}

Vec project_polyhedral(const Vec& p, const Mat& a, const Vec& b, const Mat& e, const Vec& f,
                       double tol) {
  const Eigen::Index n = p.size();
  if (a.rows() == 0 && e.rows() == 0) return p;
  const Mat A = a.rows() ? a : Mat(0, n);
  const Mat E = e.rows() ? e : Mat(0, n);
  require_dim(A.cols(), n, "project_polyhedral");
  require_dim(E.cols(), n, "project_polyhedral");
  auto start = feasible_point(A, b, E, f);
  if (!start) fail(ErrorKind::Infeasible, "projection onto empty polyhedron");
  Vec x = *start;
  const double scale = 1.0 + (n ? p.cwiseAbs().maxCoeff() : 0.0) + (b.size() ? b.cwiseAbs().maxCoeff() : 0.0);
  const double ftol = 1e-10 * scale;

  std::vector<int> working;
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    if (A.row(i).dot(x) >= b(i) - ftol) working.push_back(static_cast<int>(i));
  }
  for (int iter = 0; iter < 2000; ++iter) {
    const Eigen::Index k = E.rows() + static_cast<Eigen::Index>(working.size());
    Mat w(k, n);
    if (E.rows()) w.topRows(E.rows()) = E;
    for (std::size_t j = 0; j < working.size(); ++j) w.row(E.rows() + j) = A.row(working[j]);
    // Step d minimizing |x + d - p|^2 subject to W d = 0.
    const Mat z = null_space(w, static_cast<int>(n), 1e-12);
    const Vec g = x - p;
    const Vec d = -(z * (z.transpose() * g));
    if (d.norm() <= tol * scale) {
      // Multipliers: (x - p) + W' mu = 0, mu_ineq >= 0 required.
      Vec mu = Vec::Zero(k);
      if (k > 0) mu = w.transpose().completeOrthogonalDecomposition().solve(-g);
      int drop = -1;
      double most = -1e-10 * scale;
      for (std::size_t j = 0; j < working.size(); ++j) {
        const double m = mu(E.rows() + static_cast<Eigen::Index>(j));
        if (m < most) {
          most = m;
          drop = static_cast<int>(j);
        }
      }
      if (drop < 0) return x;
      working.erase(working.begin() + drop);
      continue;
    }
    double alpha = 1.0;
    int block = -1;
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      if (std::find(working.begin(), working.end(), static_cast<int>(i)) != working.end()) continue;
      const double ad = A.row(i).dot(d);
      if (ad > 1e-14) {
        const double step = (b(i) - A.row(i).dot(x)) / ad;
        if (step < alpha) {
          alpha = std::max(0.0, step);
          block = static_cast<int>(i);
        }
      }
    }
    x += alpha * d;
    if (block >= 0) working.push_back(block);
  }
  fail(ErrorKind::NotConverged, "projection active-set iteration limit");
}

}  // namespace tiltlab
