#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tiltlab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Default tolerance for comparisons adjacent to exact arithmetic.
inline constexpr double kDefaultTol = 1e-9;

/// Desk-scale limits; operations beyond these fail fast.
inline constexpr int kMaxDim = 8;
inline constexpr std::size_t kFaceBudget = 100000;

enum class ErrorKind {
  DimensionMismatch,
  DomainViolation,
  EmptySet,
  Budget,
  Unsupported,
  NonConvex,
  Unbounded,
  Infeasible,
  NotConverged,
  Qualification,
  Parse,
  Schema,
  Io,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require_dim(Eigen::Index got, Eigen::Index want, const char* where) {
  if (got != want) {
    fail(ErrorKind::DimensionMismatch, std::string(where) + ": expected dimension " +
                                           std::to_string(want) + ", got " + std::to_string(got));
  }
}

/// Extended real value: a finite double or +infinity. Infinity is never a large float.
class ExtReal {
 public:
  ExtReal() = default;
  static ExtReal finite(double v) { return ExtReal(v, false); }
  static ExtReal plus_infinity() { return ExtReal(0.0, true); }

  bool is_finite() const { return !inf_; }
  bool is_infinite() const { return inf_; }
  /// Payload; throws when infinite.
  double value() const {
    if (inf_) fail(ErrorKind::DomainViolation, "value() on +infinity");
    return v_;
  }
  /// Payload, or +inf as an IEEE value for arithmetic-free comparisons.
  double as_double() const { return inf_ ? std::numeric_limits<double>::infinity() : v_; }

  friend ExtReal operator+(ExtReal a, ExtReal b) {
    if (a.inf_ || b.inf_) return plus_infinity();
    return finite(a.v_ + b.v_);
  }
  friend ExtReal operator+(ExtReal a, double b) { return a + finite(b); }
  friend ExtReal operator-(ExtReal a, double b) { return a + finite(-b); }
  /// Multiplication by a nonnegative scalar; 0 * inf stays inf (indicator semantics).
  ExtReal scaled(double c) const {
    if (inf_) {
      if (c < 0) fail(ErrorKind::Unsupported, "negative multiple of +infinity");
      return plus_infinity();
    }
    return finite(c * v_);
  }
  friend bool operator==(const ExtReal& a, const ExtReal& b) {
    return a.inf_ == b.inf_ && (a.inf_ || a.v_ == b.v_);
  }

 private:
  ExtReal(double v, bool inf) : v_(v), inf_(inf) {}
  double v_ = 0.0;
  bool inf_ = false;
};

inline bool all_finite(const Vec& x) { return x.allFinite(); }

inline Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

/// Lexicographic strict ordering used wherever point lists must be canonical.
bool lex_less(const Vec& a, const Vec& b);

/// Append p to pts unless a point within `tol` (Euclidean) is already present.
void push_unique(std::vector<Vec>& pts, const Vec& p, double tol);

}  // namespace tiltlab
