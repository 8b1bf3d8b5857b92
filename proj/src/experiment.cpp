#include <algorithm>
#include <chrono>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "tiltlab/genericity.hpp"
#include "tiltlab/subdiff.hpp"

namespace tiltlab {

namespace {

bool ri_contains(const SubgradientSet& s, const Vec& g) {
  return std::any_of(s.pieces.begin(), s.pieces.end(),
                     [&](const Polyhedron& p) { return relative_interior_contains(p, g); });
}

void evaluate_tilt(const TiltProblem& tp, const Vec& v, bool equivalence, SampleRecord& rec) {
  const CriticalEnumeration e = enumerate_critical_points(tp.f, v, tp.stationary, true);
  if (e.continuum) {
    rec.non_isolated = true;
    rec.failed = true;
    return;
  }
  rec.critical_count = static_cast<int>(e.points.size());
  const WeakCriticalProbe probe = weak_critical_value_probe(tp.f, v, tp.stationary);
  for (const auto& cp : e.points) {
    PointRecord pr;
    pr.x = cp.x;
    pr.classification = to_string(cp.classification);
    pr.strict_complementarity = strict_complementarity_check(tp.f, cp.x, v);
    const ProxRegularity reg = prox_regularity_check(tp.f, v, cp.x);
    pr.prox_regular = reg.prox_regular;
    pr.prox_r = reg.r;
    const IdentificationTrace id = finite_identification_test(tp.f, v, cp.x);
    pr.identified_manifold = id.verdict == IdentificationVerdict::Identified;
    if (id.manifold) pr.manifold = id.manifold->describe();
    pr.strongly_regular = probe.strongly_regular;
    if (cp.classification == Classification::LocalMin) {
      const GrowthResult g = stable_quadratic_growth_check(tp.f, v, cp.x, tp.stationary);
      pr.stable_growth = g.ok;
      pr.alpha = g.alpha;
    }
    if (equivalence && id.manifold) {
      pr.equivalence = second_order_equivalence_check(tp.f, v, cp.x, *id.manifold, tp.stationary);
    }
    // Growth is only expected at local minimizers.
    const bool growth_ok = cp.classification != Classification::LocalMin || pr.stable_growth;
    const bool eq_ok = !pr.equivalence || pr.equivalence->consistent();
    if (!(pr.strict_complementarity && pr.prox_regular && pr.identified_manifold && pr.strongly_regular &&
          growth_ok && eq_ok)) {
      rec.failed = true;
    }
    rec.points.push_back(std::move(pr));
  }
}

void evaluate_composite(const CompositeFamily& cf, const PerturbationSample& s, SampleRecord& rec) {
  CompositeProblem p{cf.f, cf.h, cf.g, s.v, s.y ? *s.y : Vec(Vec::Zero(cf.g.m()))};
  CompositeOptions opts;
  opts.seed = s.seed;
  std::vector<CriticalPair> pairs;
  for (const auto& x0 : cf.x_starts) {
    CriticalPair cp;
    try {
      cp = solve_composite_critical(p, x0, cf.lambda0, opts);
    } catch (const Error&) {
      continue;
    }
    if (cp.status == SolveStatus::NonIsolated) rec.non_isolated = true;
    if (cp.status != SolveStatus::Converged && cp.status != SolveStatus::NonIsolated) continue;
    const bool dup = std::any_of(pairs.begin(), pairs.end(), [&](const CriticalPair& q) {
      return (q.x - cp.x).norm() <= 1e-6 && (q.lambda - cp.lambda).norm() <= 1e-6;
    });
    if (!dup) pairs.push_back(std::move(cp));
  }
  std::sort(pairs.begin(), pairs.end(), [](const CriticalPair& a, const CriticalPair& b) { return lex_less(a.x, b.x); });
  rec.critical_count = static_cast<int>(pairs.size());
  if (rec.non_isolated) rec.failed = true;
  for (const auto& cp : pairs) {
    PointRecord pr;
    pr.x = cp.x;
    pr.lambda = cp.lambda;
    pr.qual = cp.qual_flags;
    pr.multiplier_unique = cp.multiplier_unique;
    pr.classification = to_string(cp.status);
    const Vec z = p.g.value(cp.x) + p.y;
    const Vec w = p.v - p.g.jacobian(cp.x).transpose() * cp.lambda;
    pr.strict_complementarity =
        ri_contains(proximal_subdiff(p.h, z), cp.lambda) && ri_contains(proximal_subdiff(p.f, cp.x), w);
    const bool qual_ok = pr.qual && pr.qual->bcq && pr.qual->licq_analogue;
    if (!(qual_ok && pr.multiplier_unique && pr.strict_complementarity)) rec.failed = true;
    rec.points.push_back(std::move(pr));
  }
}

}  // namespace

SampleRecord evaluate_sample(const Problem& problem, const PerturbationSample& s, bool equivalence) {
  SampleRecord rec;
  rec.sample = s;
  try {
    if (const auto* tp = std::get_if<TiltProblem>(&problem)) {
      evaluate_tilt(*tp, s.v, equivalence, rec);
    } else {
      evaluate_composite(std::get<CompositeFamily>(problem), s, rec);
    }
  } catch (const std::exception& ex) {
    rec.error = ex.what();
    rec.failed = true;
  }
  return rec;
}

GenericityReport run_genericity_experiment(const Problem& problem, const ExperimentOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  GenericityReport rep;
  rep.sampling_mode = opts.sampling.grid ? "grid" : "random";
  const std::vector<PerturbationSample> samples = sample_perturbations(opts.sampling, opts.seed);
  rep.samples.resize(samples.size());
  const auto count = static_cast<std::ptrdiff_t>(samples.size());
  if (opts.execution == Execution::Parallel) {
#ifdef _OPENMP
    const int threads = opts.jobs > 0 ? opts.jobs : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
#endif
    for (std::ptrdiff_t i = 0; i < count; ++i) {
      rep.samples[static_cast<std::size_t>(i)] =
          evaluate_sample(problem, samples[static_cast<std::size_t>(i)], opts.equivalence);
    }
  } else {
    for (std::ptrdiff_t i = 0; i < count; ++i) {
      rep.samples[static_cast<std::size_t>(i)] =
          evaluate_sample(problem, samples[static_cast<std::size_t>(i)], opts.equivalence);
    }
  }
  for (const auto& r : rep.samples) {
    rep.n_max = std::max(rep.n_max, r.critical_count);
    if (r.failed) rep.failure_set.push_back(r.sample);
  }
  rep.failure_fraction =
      rep.samples.empty() ? 0.0 : static_cast<double>(rep.failure_set.size()) / static_cast<double>(rep.samples.size());
  rep.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

}  // namespace tiltlab
