#include <algorithm>
#include <cmath>
#include <numbers>

#include "tiltlab/genericity.hpp"
#include "tiltlab/linalg.hpp"
#include "tiltlab/prox.hpp"
#include "tiltlab/subdiff.hpp"

namespace tiltlab {

const char* to_string(IdentificationVerdict v) {
  switch (v) {
    case IdentificationVerdict::Identified:
      return "identified";
    case IdentificationVerdict::NoIdentifiableManifold:
      return "no_identifiable_manifold";
    case IdentificationVerdict::Inconclusive:
      return "inconclusive";
  }
  return "?";
}

std::vector<ManifoldSpec> default_candidates(const FunctionExpr& f, const Vec& x) {
  const int n = f.dim();
  std::vector<Polynomial> vanishing;
  for (const auto& s : switching_polys(f)) {
    if (std::abs(s(x)) <= 1e-9 * (1.0 + s.gradient(x).norm())) vanishing.push_back(s);
  }
  if (vanishing.size() > 12) fail(ErrorKind::Budget, "too many switching sets through the point");
  std::vector<ManifoldSpec> out;
  std::vector<Mat> normals;
  const std::size_t subsets = std::size_t{1} << vanishing.size();
  for (std::size_t mask = 0; mask < subsets; ++mask) {
    std::vector<Polynomial> eqs;
    for (std::size_t i = 0; i < vanishing.size(); ++i) {
      if (mask & (std::size_t{1} << i)) eqs.push_back(vanishing[i]);
    }
    if (static_cast<int>(eqs.size()) > n) continue;
    std::optional<ManifoldSpec> m;
    if (eqs.empty()) {
      m = ManifoldSpec::whole(n);
    } else if (std::all_of(eqs.begin(), eqs.end(), [](const Polynomial& p) { return p.is_affine(); })) {
      const auto k = static_cast<Eigen::Index>(eqs.size());
      Mat e(k, n);
      Vec rhs(k);
      for (Eigen::Index i = 0; i < k; ++i) {
        e.row(i) = eqs[static_cast<std::size_t>(i)].gradient(x).transpose();
        rhs(i) = e.row(i).dot(x) - eqs[static_cast<std::size_t>(i)](x);
      }
      if (rank(e) < k) continue;
      m = ManifoldSpec::affine(e, rhs);
    } else {
      try {
        m = ManifoldSpec::zero_set(SmoothMap(eqs), x);
      } catch (const Error&) {
        continue;
      }
    }
    // Drop repeats of the same linearization.
    const Mat nb = m->normal_basis(x);
    bool dup = false;
    for (std::size_t j = 0; j < out.size() && !dup; ++j) {
      dup = out[j].kind() == m->kind() && out[j].dim() == m->dim() && same_subspace(normals[j], nb, n);
    }
    if (dup) continue;
    normals.push_back(nb);
    out.push_back(*m);
  }
  std::stable_sort(out.begin(), out.end(), [](const ManifoldSpec& a, const ManifoldSpec& b) { return a.dim() < b.dim(); });
  return out;
}

bool smooth_on_manifold(const FunctionExpr& f, const ManifoldSpec& m, const Vec& x) {
  constexpr double r = 1e-2;
  std::vector<Vec> pts;
  std::vector<double> vals;
  for (const auto& p : ball_points(x, r, 200)) {
    const Vec q = m.project(p);
    if ((q - x).norm() > 2 * r || (q - x).norm() == 0.0) continue;
    const ExtReal fq = evaluate(f, q);
    if (fq.is_infinite()) return false;
    pts.push_back(q);
    vals.push_back(fq.value());
  }
  if (pts.empty()) return true;
  for (const auto& sel : selection_polys(f)) {
    bool all = true;
    for (std::size_t i = 0; i < pts.size() && all; ++i) {
      all = std::abs(sel(pts[i]) - vals[i]) <= 1e-10 * (1.0 + std::abs(vals[i]));
    }
    if (all) return true;
  }
  return false;
}

bool sharpness_check(const FunctionExpr& f, const Vec& v, const Vec& x, const ManifoldSpec& m) {
  const Mat par = parallel_basis(proximal_subdiff(tilt(f, v), x));
  return same_subspace(par, m.normal_basis(x), f.dim());
}

namespace {

std::vector<Vec> ring(const Vec& x, double r, int count) {
  const auto n = x.size();
  std::vector<Vec> out;
  if (n == 1) {
    for (int k = 0; k < count; ++k) {
      const double s = (k % 2 == 0 ? 1.0 : -1.0) * r * (1.0 - static_cast<double>(k / 2) / ((count + 1) / 2));
      out.push_back(x + Vec::Constant(1, s));
    }
    return out;
  }
  for (int k = 0; k < count; ++k) {
    // Offset by half a sector so no start sits on a coordinate plane.
    const double th = 2.0 * std::numbers::pi * (k + 0.5) / count;
    Vec d = Vec::Zero(n);
    d(0) = std::cos(th);
    d(1) = std::sin(th);
    for (Eigen::Index i = 2; i < n; ++i) d(i) = 0.5 * std::sin(th * static_cast<double>(i + 1));
    out.push_back(x + r * d / d.norm());
  }
  return out;
}

bool on_manifold(const ManifoldSpec& m, const Vec& p, const Vec& x) { return m.contains(p, 1e-9 * (p - x).norm()); }

// Proximal-point runs from the ring; empty when some run leaves x.
std::vector<std::vector<Vec>> prox_runs(const FunctionExpr& fv, const Vec& x, double r,
                                        const IdentificationOptions& opts) {
  std::vector<std::vector<Vec>> runs;
  for (const auto& start : ring(x, opts.radius, opts.starts)) {
    std::vector<Vec> it{start};
    Vec cur = start;
    for (int k = 0; k < opts.iterations; ++k) {
      const auto cands = prox(fv, cur, r);
      const Vec* next = &cands.front();
      for (const auto& c : cands) {
        if ((c - cur).norm() < (*next - cur).norm()) next = &c;
      }
      cur = *next;
      it.push_back(cur);
    }
    if ((cur - x).norm() > 1e-6) return {};
    runs.push_back(std::move(it));
  }
  return runs;
}

// f-attentive points with subgradients converging to v: ring points at radii
// 1e-2 ... 1e-10 kept when dist(v, subdiff f(p)) <= sqrt(|p - x|).
std::vector<std::vector<Vec>> attentive_runs(const FunctionExpr& f, const Vec& v, const Vec& x,
                                             const IdentificationOptions& opts) {
  const double fx = evaluate(f, x).value();
  std::vector<std::vector<Vec>> runs(static_cast<std::size_t>(opts.starts));
  for (int e = 2; e <= 10; ++e) {
    const double rad = std::pow(10.0, -e);
    const auto pts = ring(x, rad, opts.starts);
    for (std::size_t k = 0; k < pts.size(); ++k) {
      const ExtReal fp = evaluate(f, pts[k]);
      if (fp.is_infinite() || std::abs(fp.value() - fx) > std::sqrt(rad)) continue;
      if (limiting_subdiff(f, pts[k]).distance(v) <= std::sqrt(rad)) runs[k].push_back(pts[k]);
    }
  }
  for (auto& r : runs) r.push_back(x);
  return runs;
}

}  // namespace

IdentificationTrace finite_identification_test(const FunctionExpr& f, const Vec& v, const Vec& x,
                                               const std::vector<ManifoldSpec>& candidates,
                                               const IdentificationOptions& opts) {
  require_dim(x.size(), f.dim(), "finite_identification_test");
  const FunctionExpr fv = tilt(f, v);
  IdentificationTrace out;
  std::vector<std::vector<Vec>> runs;
  int tail = opts.tail;
  // A long prox step can jump to a distant, lower basin (or be unbounded);
  // shorter steps localize.
  for (double r = opts.prox_r; r >= 1e-3 * opts.prox_r && runs.empty(); r /= 10) {
    try {
      runs = prox_runs(fv, x, r, opts);
    } catch (const Error&) {
      runs.clear();
    }
  }
  if (runs.empty()) {
    // x is not a proximal-point attractor (e.g. not a local minimizer of f_v):
    // sample attentive sequences directly, with the smallest radii as tails.
    try {
      runs = attentive_runs(f, v, x, opts);
    } catch (const Error&) {
      return out;
    }
    tail = 5;
  }
  out.iterates = runs.front();

  // Stratum of an iterate: the first (lowest-dimensional) candidate containing it.
  auto stratum = [&](const Vec& p) -> int {
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (on_manifold(candidates[c], p, x)) return static_cast<int>(c);
    }
    return -1;
  };
  std::vector<int> tail_strata;
  for (const auto& r : runs) {
    const int from = std::max(0, static_cast<int>(r.size()) - tail);
    for (int k = from; k < static_cast<int>(r.size()); ++k) {
      if (r[static_cast<std::size_t>(k)] != x) tail_strata.push_back(stratum(r[static_cast<std::size_t>(k)]));
    }
  }

  for (const auto& m : candidates) {
    bool all = true;
    for (const auto& r : runs) {
      const int from = std::max(0, static_cast<int>(r.size()) - tail);
      for (int k = from; k < static_cast<int>(r.size()) && all; ++k) all = on_manifold(m, r[static_cast<std::size_t>(k)], x);
    }
    if (!all || !smooth_on_manifold(fv, m, x)) continue;
    int hit = 0;
    for (const auto& r : runs) {
      int first = static_cast<int>(r.size());
      while (first > 0 && on_manifold(m, r[static_cast<std::size_t>(first - 1)], x)) --first;
      hit = std::max(hit, first);
    }
    out.manifold = m;
    out.hit_index = hit;
    out.verdict = IdentificationVerdict::Identified;
    return out;
  }
  std::sort(tail_strata.begin(), tail_strata.end());
  tail_strata.erase(std::unique(tail_strata.begin(), tail_strata.end()), tail_strata.end());
  out.verdict =
      tail_strata.size() > 1 ? IdentificationVerdict::NoIdentifiableManifold : IdentificationVerdict::Inconclusive;
  return out;
}

}  // namespace tiltlab
