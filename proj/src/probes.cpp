#include <algorithm>
#include <array>
#include <random>

#include "tiltlab/genericity.hpp"
#include "tiltlab/linalg.hpp"

namespace tiltlab {

// ---- sampling ---------------------------------------------------------------

std::uint64_t sample_seed(std::uint64_t master_seed, int index) {
  // splitmix64 of (master, index)
  std::uint64_t z = master_seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(index) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<PerturbationSample> sample_perturbations(const SamplingConfig& cfg, std::uint64_t master_seed) {
  const auto n = cfg.v_lo.size();
  require_dim(cfg.v_hi.size(), n, "sample_perturbations");
  if (n == 0) fail(ErrorKind::DomainViolation, "sampling box has dimension 0");
  if (cfg.y_lo.has_value() != cfg.y_hi.has_value()) fail(ErrorKind::DomainViolation, "y box needs both bounds");
  Vec lo = cfg.v_lo;
  Vec hi = cfg.v_hi;
  if (cfg.y_lo) {
    require_dim(cfg.y_hi->size(), cfg.y_lo->size(), "sample_perturbations y");
    lo.conservativeResize(n + cfg.y_lo->size());
    hi.conservativeResize(n + cfg.y_lo->size());
    lo.tail(cfg.y_lo->size()) = *cfg.y_lo;
    hi.tail(cfg.y_lo->size()) = *cfg.y_hi;
  }
  if ((hi - lo).minCoeff() < 0 || !lo.allFinite() || !hi.allFinite()) fail(ErrorKind::DomainViolation, "empty box");
  if (cfg.count < 1) fail(ErrorKind::DomainViolation, "sample count must be positive");
  if (cfg.exclude_v_radius > 0 && (cfg.v_hi.array().abs().maxCoeff() <= cfg.exclude_v_radius &&
                                   cfg.v_lo.array().abs().maxCoeff() <= cfg.exclude_v_radius)) {
    fail(ErrorKind::DomainViolation, "exclusion radius covers the box");
  }

  auto split = [&](const Vec& p, int index, std::uint64_t seed) {
    PerturbationSample s;
    s.v = p.head(n);
    if (cfg.y_lo) s.y = p.tail(p.size() - n);
    s.seed = seed;
    s.index = index;
    return s;
  };

  std::vector<PerturbationSample> out;
  if (cfg.grid) {
    std::size_t total = 1;
    for (Eigen::Index d = 0; d < lo.size(); ++d) {
      total *= static_cast<std::size_t>(cfg.count);
      if (total > 10'000'000) fail(ErrorKind::Budget, "sampling grid too large");
    }
    for (std::size_t idx = 0; idx < total; ++idx) {
      Vec p(lo.size());
      std::size_t rem = idx;
      for (Eigen::Index d = 0; d < lo.size(); ++d) {
        const auto k = static_cast<double>(rem % static_cast<std::size_t>(cfg.count));
        rem /= static_cast<std::size_t>(cfg.count);
        p(d) = cfg.count == 1 ? lo(d) : lo(d) + (hi(d) - lo(d)) * k / (cfg.count - 1);
        if (cfg.count > 1 && k == cfg.count - 1) p(d) = hi(d);
      }
      if (p.head(n).norm() < cfg.exclude_v_radius) continue;
      const int index = static_cast<int>(out.size());
      out.push_back(split(p, index, sample_seed(master_seed, index)));
    }
    return out;
  }
  for (int i = 0; i < cfg.count; ++i) {
    const std::uint64_t seed = sample_seed(master_seed, i);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Vec p(lo.size());
    do {
      for (Eigen::Index d = 0; d < lo.size(); ++d) p(d) = lo(d) + (hi(d) - lo(d)) * unif(rng);
    } while (p.head(n).norm() < cfg.exclude_v_radius);
    out.push_back(split(p, i, seed));
  }
  return out;
}

// ---- strict complementarity and prox-regularity --------------------------------

bool strict_complementarity_check(const FunctionExpr& f, const Vec& x, const Vec& v, double tol) {
  const SubgradientSet s = proximal_subdiff(tilt(f, v), x);
  const Vec zero = Vec::Zero(f.dim());
  return std::any_of(s.pieces.begin(), s.pieces.end(),
                     [&](const Polyhedron& p) { return relative_interior_contains(p, zero, tol); });
}

ProxRegularity prox_regularity_check(const FunctionExpr& f, const Vec& v, const Vec& x) {
  constexpr double eps = 1e-2;
  const int n = f.dim();
  const FunctionExpr fv = tilt(f, v);
  const double f0 = evaluate(fv, x).value();
  std::vector<Vec> pts = ball_points(x, eps, n == 1 ? 41 : 100);
  pts.push_back(x);
  std::vector<Vec> targets{Vec::Zero(n)};
  for (int i = 0; i < n; ++i) {
    for (double s : {-0.5, 0.5}) {
      Vec t = Vec::Zero(n);
      t(i) = s * eps;
      targets.push_back(t);
    }
  }
  // Localized graph of subdiff f_v near (x, 0), f-attentive.
  std::vector<std::pair<Vec, Vec>> graph;
  for (const auto& p : pts) {
    const ExtReal fp = evaluate(fv, p);
    if (fp.is_infinite() || std::abs(fp.value() - f0) > eps) continue;
    SubgradientSet s;
    try {
      s = proximal_subdiff(fv, p);
    } catch (const Error&) {
      continue;
    }
    if (s.empty()) continue;
    for (const auto& t : targets) {
      const Vec g = s.nearest(t);
      if (g.norm() <= eps) graph.emplace_back(p, g);
    }
  }
  ProxRegularity out;
  for (double r : {1.0, 10.0, 100.0}) {
    bool monotone = true;
    for (std::size_t i = 0; i < graph.size() && monotone; ++i) {
      for (std::size_t j = i + 1; j < graph.size(); ++j) {
        const Vec dx = graph[i].first - graph[j].first;
        const Vec dg = graph[i].second - graph[j].second;
        if ((dg + r * dx).dot(dx) < -1e-12) {
          monotone = false;
          break;
        }
      }
    }
    if (monotone) {
      out.prox_regular = true;
      out.r = r;
      return out;
    }
  }
  return out;
}

// ---- strong regularity probe ---------------------------------------------------

namespace {

std::vector<Vec> probe_directions(int n) {
  std::vector<Vec> out;
  for (int i = 0; i < n; ++i) {
    for (double s : {-1.0, 1.0}) {
      Vec d = Vec::Zero(n);
      d(i) = s;
      out.push_back(d);
    }
  }
  return out;
}

}  // namespace

WeakCriticalProbe weak_critical_value_probe(const FunctionExpr& f, const Vec& v, const StationaryOptions& opts) {
  const int n = f.dim();
  constexpr std::size_t kScales = std::size(kProbeScales);
  WeakCriticalProbe out;
  const CriticalEnumeration base = enumerate_critical_points(f, v, opts, false);
  out.branch_count = static_cast<int>(base.points.size());
  if (base.continuum) {
    out.lipschitz_estimate = std::numeric_limits<double>::infinity();
    return out;
  }
  const std::vector<Vec> dirs = probe_directions(n);
  // valid[k]: the localization is single-valued for every branch at scale k.
  std::array<bool, kScales> valid{};
  std::array<std::vector<std::vector<CriticalPoint>>, kScales> nearby;
  for (std::size_t k = 0; k < kScales; ++k) {
    valid[k] = true;
    for (const auto& d : dirs) {
      const CriticalEnumeration e = enumerate_critical_points(f, v + kProbeScales[k] * d, opts, false);
      if (e.continuum) valid[k] = false;
      nearby[k].push_back(e.points);
    }
  }
  std::array<double, kScales> quotient{};
  for (std::size_t b = 0; b < base.points.size(); ++b) {
    const Vec& xb = base.points[b].x;
    double rho = 1.0;
    for (std::size_t c = 0; c < base.points.size(); ++c) {
      if (c != b) rho = std::min(rho, 0.5 * (base.points[c].x - xb).norm());
    }
    for (std::size_t k = 0; k < kScales; ++k) {
      for (std::size_t j = 0; j < dirs.size() && valid[k]; ++j) {
        int count = 0;
        Vec xw;
        for (const auto& cp : nearby[k][j]) {
          if ((cp.x - xb).norm() <= rho) {
            ++count;
            xw = cp.x;
          }
        }
        if (count != 1) {
          valid[k] = false;
          break;
        }
        quotient[k] = std::max(quotient[k], (xw - xb).norm() / kProbeScales[k]);
      }
    }
  }
  // A coarse scale may straddle a nearby transition; the finest scale and every
  // scale below a valid one must be single-valued, and quotients between
  // consecutive valid scales may at most double.
  out.strongly_regular = valid[kScales - 1];
  for (std::size_t k = 0; k + 1 < kScales; ++k) {
    if (valid[k] && !valid[k + 1]) out.strongly_regular = false;
    if (valid[k] && valid[k + 1] && quotient[k + 1] > 2.0 * quotient[k] + 1e-6) out.strongly_regular = false;
  }
  for (std::size_t k = 0; k < kScales; ++k) {
    if (valid[k]) out.lipschitz_estimate = std::max(out.lipschitz_estimate, quotient[k]);
  }
  if (!valid[kScales - 1]) out.lipschitz_estimate = std::numeric_limits<double>::infinity();
  return out;
}

// ---- stable quadratic growth -----------------------------------------------------

namespace {

// Smallest value of 2 (f_w(p) - f_w(x_w)) / |p - x_w|^2 over tilts w near v and
// points p near x_w; nullopt (with a diagnostic) when some tilt loses x_w.
std::optional<double> growth_quotient(const FunctionExpr& f, const Vec& v, const Vec& x, double radius,
                                      const StationaryOptions& opts, std::string& diagnostic) {
  constexpr int kTilts = 25;
  constexpr double kNeighborhood = 1e-2;
  constexpr int kPoints = 1000;
  double a = std::numeric_limits<double>::infinity();
  for (const auto& w : ball_points(v, radius, kTilts)) {
    const CriticalEnumeration e = enumerate_critical_points(f, w, opts, false);
    if (e.continuum) {
      diagnostic = "non-isolated critical points for a nearby tilt";
      return std::nullopt;
    }
    const CriticalPoint* best = nullptr;
    for (const auto& cp : e.points) {
      if (!best || (cp.x - x).norm() < (best->x - x).norm()) best = &cp;
    }
    if (!best || (best->x - x).norm() > 0.5) {
      diagnostic = "no critical point near x for a nearby tilt";
      return std::nullopt;
    }
    const FunctionExpr fw = tilt(f, w);
    const double fw0 = evaluate(fw, best->x).value();
    for (const auto& p : ball_points(best->x, kNeighborhood, kPoints)) {
      const double d2 = (p - best->x).squaredNorm();
      if (d2 == 0.0) continue;
      const ExtReal fp = evaluate(fw, p);
      if (fp.is_infinite()) continue;
      a = std::min(a, 2.0 * (fp.value() - fw0) / d2);
    }
  }
  return a;
}

}  // namespace

GrowthResult stable_quadratic_growth_check(const FunctionExpr& f, const Vec& v, const Vec& x,
                                           const StationaryOptions& opts) {
  constexpr double kMinRadius = 1e-6;
  GrowthResult out;
  // The tilt ball starts at radius 0.1 and is halved until the certificate holds,
  // so the check asks for some neighbourhood of v rather than a fixed one.
  for (double radius = 0.1; radius >= kMinRadius; radius /= 2) {
    const std::optional<double> a = growth_quotient(f, v, x, radius, opts, out.diagnostic);
    if (a && *a <= 0.0) {
      out.diagnostic = "a nearby tilt has no strict local minimizer near x";
      out.decided = true;
      return out;
    }
    if (!a) continue;
    for (int k = 10; k >= -10; --k) {
      const double alpha = std::ldexp(1.0, k);
      if (alpha <= *a * (1.0 + 1e-6)) {
        out.ok = true;
        out.alpha = alpha;
        out.tilt_radius = radius;
        out.diagnostic.clear();
        return out;
      }
    }
    out.diagnostic = "growth constant below 2^-10";
  }
  out.decided = false;
  return out;
}

// ---- second-order equivalence ------------------------------------------------------

FunctionExpr restrict_to(const FunctionExpr& f, const ManifoldSpec& m) {
  require_dim(m.ambient_dim(), f.dim(), "restrict_to");
  const auto eqs = m.equations();
  if (eqs.empty()) return f;
  const int n = f.dim();
  const auto k = static_cast<Eigen::Index>(eqs.size());
  const bool affine = std::all_of(eqs.begin(), eqs.end(), [](const Polynomial& p) { return p.is_affine(); });
  if (affine) {
    Mat e(k, n);
    Vec rhs(k);
    const Vec zero = Vec::Zero(n);
    for (Eigen::Index i = 0; i < k; ++i) {
      e.row(i) = eqs[static_cast<std::size_t>(i)].gradient(zero).transpose();
      rhs(i) = -eqs[static_cast<std::size_t>(i)](zero);
    }
    return sum({f, indicator(Polyhedron::affine(e, rhs))});
  }
  const FunctionExpr origin = indicator(Polyhedron::affine(Mat::Identity(k, k), Vec::Zero(k)));
  return sum({f, shift(origin, SmoothMap(eqs), Vec::Zero(k))});
}

bool EquivalenceTable::inconclusive() const {
  return !local_min || !stable_strong_min || !positive_on_critical_cone || !positive_on_tangent_space;
}

bool EquivalenceTable::consistent() const {
  if (inconclusive()) return false;
  return *local_min == *stable_strong_min && *local_min == *positive_on_critical_cone &&
         *local_min == *positive_on_tangent_space;
}

std::string EquivalenceTable::str() const {
  std::string s;
  for (const auto& b : {local_min, stable_strong_min, positive_on_critical_cone, positive_on_tangent_space}) {
    s += b ? (*b ? 'T' : 'F') : '?';
  }
  return s;
}

EquivalenceTable second_order_equivalence_check(const FunctionExpr& f, const Vec& v, const Vec& x,
                                                const ManifoldSpec& m, const StationaryOptions& opts) {
  constexpr double kPositive = 1e-9;
  EquivalenceTable t;
  switch (classify_critical_point(f, v, x)) {
    case Classification::LocalMin:
      t.local_min = true;
      break;
    case Classification::NotLocalMin:
      t.local_min = false;
      break;
    case Classification::Unknown:
      break;
  }
  try {
    const GrowthResult g = stable_quadratic_growth_check(f, v, x, opts);
    if (g.ok || g.decided) t.stable_strong_min = g.ok;
  } catch (const Error&) {
  }
  try {
    t.positive_on_critical_cone = second_order_min(f, v, x) > kPositive;
  } catch (const Error&) {
  }
  try {
    const ConeRep tangent = ConeRep::from_generators(f.dim(), {}, m.tangent_basis(x));
    t.positive_on_tangent_space = second_order_min_on(tilt(restrict_to(f, m), v), x, tangent) > kPositive;
  } catch (const Error&) {
  }
  return t;
}

// ---- projections ------------------------------------------------------------------

bool projection_identifiability_check(const Polyhedron& q, const Vec& x, const Vec& v, const ManifoldSpec& m) {
  require_dim(x.size(), q.dim(), "projection_identifiability_check");
  require_dim(v.size(), q.dim(), "projection_identifiability_check");
  require_dim(m.ambient_dim(), q.dim(), "projection_identifiability_check");
  for (double lam : {1e-1, 1e-2}) {
    const Vec c = x + lam * v;
    for (const auto& p : ball_points(c, 0.5 * lam * v.norm(), 100)) {
      if ((q.project(p) - m.project(p)).norm() > 1e-9 * (1.0 + p.norm())) return false;
    }
  }
  return true;
}

}  // namespace tiltlab
