#include "tiltlab/linalg.hpp"

#include <algorithm>

namespace tiltlab {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "dimension mismatch";
    case ErrorKind::DomainViolation: return "domain violation";
    case ErrorKind::EmptySet: return "empty set";
    case ErrorKind::Budget: return "budget exceeded";
    case ErrorKind::Unsupported: return "unsupported";
    case ErrorKind::NonConvex: return "non-convex input";
    case ErrorKind::Unbounded: return "unbounded";
    case ErrorKind::Infeasible: return "infeasible";
    case ErrorKind::NotConverged: return "not converged";
    case ErrorKind::Qualification: return "qualification failure";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Schema: return "schema violation";
    case ErrorKind::Io: return "i/o error";
  }
  return "error";
}

bool lex_less(const Vec& a, const Vec& b) {
  const auto n = std::min(a.size(), b.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (a(i) < b(i)) return true;
    if (a(i) > b(i)) return false;
  }
  return a.size() < b.size();
}

void push_unique(std::vector<Vec>& pts, const Vec& p, double tol) {
  for (const auto& q : pts) {
    if ((q - p).norm() <= tol) return;
  }
  pts.push_back(p);
}

int rank(const Mat& m, double tol) {
  if (m.rows() == 0 || m.cols() == 0) return 0;
  Eigen::JacobiSVD<Mat> svd(m);
  const auto& s = svd.singularValues();
  const double cut = tol * std::max(1.0, s.size() > 0 ? s(0) : 0.0);
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cut) ++r;
  }
  return r;
}

Mat null_space(const Mat& m, int cols, double tol) {
  if (m.rows() == 0) return Mat::Identity(cols, cols);
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double cut = tol * std::max(1.0, s.size() > 0 ? s(0) : 0.0);
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cut) ++r;
  }
  return svd.matrixV().rightCols(cols - r);
}

Mat column_basis(const Mat& m, int rows, double tol) {
  if (m.cols() == 0) return Mat(rows, 0);
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullU);
  const auto& s = svd.singularValues();
  const double cut = tol * std::max(1.0, s.size() > 0 ? s(0) : 0.0);
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cut) ++r;
  }
  return svd.matrixU().leftCols(r);
}

Mat stack_rows(const std::vector<Vec>& rows, int cols) {
  Mat m(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require_dim(rows[i].size(), cols, "stack_rows");
    m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  }
  return m;
}

bool same_subspace(const Mat& a, const Mat& b, int dim, double tol) {
  const int ra = rank(a, tol);
  const int rb = rank(b, tol);
  if (ra != rb) return false;
  Mat both(dim, a.cols() + b.cols());
  both << a, b;
  return rank(both, tol) == ra;
}

std::vector<Vec> halton(const Vec& lo, const Vec& hi, int count) {
  static constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19};
  std::vector<Vec> out;
  for (int k = 1; k <= count; ++k) {
    Vec p(lo.size());
    for (Eigen::Index d = 0; d < lo.size(); ++d) {
      const int b = kPrimes[d];
      double f = 1.0, r = 0.0;
      for (int i = k; i > 0; i /= b) {
        f /= b;
        r += f * (i % b);
      }
      p(d) = lo(d) + r * (hi(d) - lo(d));
    }
    out.push_back(p);
  }
  return out;
}

std::vector<Vec> ball_points(const Vec& c, double r, int count) {
  const auto n = c.size();
  std::vector<Vec> out;
  if (n == 1) {
    for (int k = 0; k < count; ++k) {
      const double t = count == 1 ? 0.0 : -r + 2.0 * r * k / (count - 1);
      out.push_back(c + Vec::Constant(1, t));
    }
    return out;
  }
  const Vec lo = Vec::Constant(n, -r);
  const Vec hi = Vec::Constant(n, r);
  for (int drawn = 2 * count;; drawn *= 2) {
    out.clear();
    for (const auto& d : halton(lo, hi, drawn)) {
      if (d.norm() <= r) out.push_back(c + d);
      if (static_cast<int>(out.size()) == count) return out;
    }
  }
}

}  // namespace tiltlab
