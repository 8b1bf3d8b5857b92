#include "tiltlab/criticality.hpp"

#include <algorithm>
#include <random>

#include "tiltlab/derivatives.hpp"
#include "tiltlab/linalg.hpp"

namespace tiltlab {

const char* to_string(Classification c) {
  switch (c) {
    case Classification::LocalMin:
      return "local_min";
    case Classification::NotLocalMin:
      return "not_local_min";
    case Classification::Unknown:
      return "unknown";
  }
  return "?";
}

namespace {

constexpr double kBallRadius = 1e-2;
constexpr int kBallSamples = 10000;

// Deterministic samples of the closed ball B_r(x).
std::vector<Vec> ball_samples(const Vec& x, double r) {
  const int n = static_cast<int>(x.size());
  std::vector<Vec> out;
  if (n == 1) {
    for (int k = 0; k < kBallSamples; ++k) {
      const double t = -r + 2.0 * r * k / (kBallSamples - 1);
      out.push_back(x + Vec::Constant(1, t));
    }
    return out;
  }
  if (n == 2) {
    // 113^2 * pi/4 is just over 10^4 nodes inside the disc.
    constexpr int m = 113;
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) {
        Vec d(2);
        d << -r + 2.0 * r * i / (m - 1), -r + 2.0 * r * j / (m - 1);
        if (d.norm() <= r) out.push_back(x + d);
      }
    }
    return out;
  }
  const Vec lo = Vec::Constant(n, -r);
  const Vec hi = Vec::Constant(n, r);
  int drawn = 0;
  while (static_cast<int>(out.size()) < kBallSamples) {
    drawn += kBallSamples;
    out.clear();
    for (const auto& d : halton(lo, hi, drawn)) {
      if (d.norm() <= r) out.push_back(x + d);
    }
  }
  out.resize(kBallSamples);
  return out;
}

// Unit directions covering a polyhedral cone: normalized generators and
// deterministic random combinations.
std::vector<Vec> cone_directions(const ConeRep& c) {
  const int n = c.dim();
  std::vector<Vec> gens = c.rays();
  const Mat& lin = c.lineality();
  for (Eigen::Index j = 0; j < lin.cols(); ++j) {
    gens.push_back(lin.col(j));
    gens.push_back(-lin.col(j));
  }
  std::vector<Vec> out;
  for (const auto& g : gens) {
    if (g.norm() > 0) out.push_back(g / g.norm());
  }
  // Rays and lines are covered exactly by their generators.
  if (c.rays().size() + static_cast<std::size_t>(lin.cols()) <= 1) return out;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int s = 0; s < 256; ++s) {
    Vec d = Vec::Zero(n);
    for (const auto& r : c.rays()) d += unif(rng) * r / r.norm();
    for (Eigen::Index j = 0; j < lin.cols(); ++j) d += (2.0 * unif(rng) - 1.0) * lin.col(j);
    if (d.norm() > 1e-12) out.push_back(d / d.norm());
  }
  return out;
}

}  // namespace

double second_order_min_on(const FunctionExpr& g, const Vec& x, const ConeRep& cone) {
  double best = std::numeric_limits<double>::infinity();
  if (cone.is_zero()) return best;
  for (const auto& u : cone_directions(cone)) best = std::min(best, second_subderivative(g, x, u));
  return best;
}

double second_order_min(const FunctionExpr& f, const Vec& v, const Vec& x) {
  return second_order_min_on(tilt(f, v), x, critical_cone(f, x, v));
}

Classification classify_critical_point(const FunctionExpr& f, const Vec& v, const Vec& x) {
  require_dim(x.size(), f.dim(), "classify_critical_point");
  const FunctionExpr fv = tilt(f, v);
  const ExtReal f0 = evaluate(fv, x);
  if (f0.is_infinite()) return Classification::Unknown;
  const double bar = f0.value() - 1e-12 * (1.0 + std::abs(f0.value()));
  for (const auto& p : ball_samples(x, kBallRadius)) {
    const ExtReal fp = evaluate(fv, p);
    if (fp.is_finite() && fp.value() < bar) return Classification::NotLocalMin;
  }
  // Necessary condition: inf_w d^2 f_v(x)(u|w) >= 0 on the critical cone.
  try {
    if (second_order_min(f, v, x) >= -1e-9) return Classification::LocalMin;
  } catch (const Error&) {
  }
  return Classification::Unknown;
}

CriticalEnumeration enumerate_critical_points(const FunctionExpr& f, const Vec& v, const StationaryOptions& opts,
                                              bool classify) {
  require_dim(v.size(), f.dim(), "enumerate_critical_points");
  const StationarySet s = stationary_points(f, v, opts);
  CriticalEnumeration out;
  out.continuum = s.continuum;
  out.exact = s.exact;
  const FunctionExpr fv = tilt(f, v);
  std::vector<Vec> merged;
  for (const auto& x : s.points) push_unique(merged, x, 1e-8);
  std::sort(merged.begin(), merged.end(), lex_less);
  for (const auto& x : merged) {
    CriticalPoint cp;
    cp.x = x;
    cp.value = evaluate(fv, x);
    cp.residual = criticality_residual(f, v, x);
    if (classify) cp.classification = classify_critical_point(f, v, x);
    out.points.push_back(std::move(cp));
  }
  return out;
}

}  // namespace tiltlab
