#include <chrono>
#include <ctime>
#include <fstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "tiltlab/reporting.hpp"
#include "tiltlab/subdiff.hpp"

#ifndef TILTLAB_VERSION
#define TILTLAB_VERSION "unknown"
#endif

namespace tiltlab {

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string where(const PerturbationSample& s) {
  std::string out = "sample " + std::to_string(s.index) + " (v = " + fmt_vec(s.v);
  if (s.y) out += ", y = " + fmt_vec(*s.y);
  return out + ")";
}

void check_tilt_points(const FunctionExpr& f, const SampleRecord& s, double tol, RunRecord& rec) {
  for (const auto& p : s.points) {
    const double d = limiting_subdiff(f, p.x).distance(s.sample.v);
    if (!(d <= tol * (1.0 + s.sample.v.norm()))) {
      rec.invariant_violations.push_back(where(s.sample) + ": accepted critical point x = " + fmt_vec(p.x) +
                                         " has dist(v, subdiff f(x)) = " + fmt_num(d));
    }
  }
}

void check_composite_points(const CompositeProblem& base, const SampleRecord& s, double residual_tol,
                            RunRecord& rec) {
  CompositeProblem p = base;
  p.v = s.sample.v;
  p.y = s.sample.y ? *s.sample.y : Vec::Zero(base.g.m());
  for (const auto& pt : s.points) {
    if (!pt.lambda) continue;
    const double r = residual(p, pt.x, *pt.lambda).max();
    if (!(r <= residual_tol)) {
      rec.invariant_violations.push_back(where(s.sample) + ": accepted critical pair x = " + fmt_vec(pt.x) +
                                         " has residual " + fmt_num(r));
    }
  }
}

void log_errors(const GenericityReport& r, RunRecord& rec) {
  for (const auto& s : r.samples) {
    if (s.error) rec.errors.push_back(where(s.sample) + ": " + *s.error);
  }
}

Report run_sweep(const ExperimentConfig& c, const RunOptions& opts, const std::string& hash, RunRecord& rec) {
  const FunctionExpr f = function_from_json(c.problem["f"]);
  GenericityReport r;
  std::optional<CompositeProblem> composite;
  if (c.mode == Mode::SinglePoint) {
    PerturbationSample s{vec_from_json(c.problem["v"]), std::nullopt, sample_seed(c.master_seed, 0), 0};
    r.samples.push_back(evaluate_sample(TiltProblem{f, {}}, s, c.equivalence));
    const auto& rec0 = r.samples.front();
    r.n_max = rec0.critical_count;
    if (rec0.failed) r.failure_set.push_back(s);
    r.failure_fraction = rec0.failed ? 1.0 : 0.0;
    r.sampling_mode = "single";
  } else {
    ExperimentOptions eo;
    eo.sampling = c.sampling;
    eo.seed = c.master_seed;
    eo.jobs = opts.jobs;
    eo.equivalence = c.equivalence;
    Problem prob = TiltProblem{f, {}};
    if (c.mode == Mode::CompositeSweep) {
      CompositeFamily fam{f, function_from_json(c.problem["h"]), smooth_map_from_json(c.problem["g"]), {},
                          vec_from_json(c.problem["lambda0"])};
      for (const auto& x : c.problem["x_starts"]) fam.x_starts.push_back(vec_from_json(x));
      composite = CompositeProblem{fam.f, fam.h, fam.g, Vec::Zero(f.dim()), Vec::Zero(fam.g.m())};
      prob = std::move(fam);
    }
    r = run_genericity_experiment(prob, eo);
  }
  log_errors(r, rec);
  for (const auto& s : r.samples) {
    if (composite) {
      check_composite_points(*composite, s, c.residual, rec);
    } else {
      check_tilt_points(f, s, c.tol, rec);
    }
  }
  return genericity_report(r, hash);
}

Report run_atlas(const ExperimentConfig& c, const RunOptions& opts, const std::string& hash, RunRecord& rec) {
  const FunctionExpr f = function_from_json(c.problem["f"]);
#ifdef _OPENMP
  if (opts.jobs > 0) omp_set_num_threads(opts.jobs);
#else
  (void)opts;
#endif
  const SelectionAtlas a = build_selection_atlas(f, GridSpec{c.sampling.v_lo, c.sampling.v_hi, c.sampling.count},
                                                 c.branch_gap);
  for (const auto& reg : a.regions) {
    for (std::size_t k = 0; k < reg.nodes.size(); ++k) {
      const Vec v = a.grid.node(reg.nodes[k]);
      for (const auto& x : reg.branches[k]) {
        const double d = limiting_subdiff(f, x).distance(v);
        if (!(d <= c.tol * (1.0 + v.norm()))) {
          rec.invariant_violations.push_back("atlas node " + std::to_string(reg.nodes[k]) + ": branch point x = " +
                                             fmt_vec(x) + " has dist(v, subdiff f(x)) = " + fmt_num(d));
        }
      }
    }
  }
  for (std::size_t i = 0; i < a.cardinality.size(); ++i) {
    if (a.cardinality[i] < 0) rec.errors.push_back("atlas node " + std::to_string(i) + ": preimage not resolved");
  }
  return atlas_report(a, hash);
}

Report run_duality(const ExperimentConfig& c, const std::string& hash, RunRecord& rec) {
  const PrimalDualProblem base{function_from_json(c.problem["f"]), function_from_json(c.problem["h"]),
                               mat_from_json(c.problem["A"]), vec_from_json(c.problem["v"]),
                               vec_from_json(c.problem["y"])};
  std::vector<PerturbationSample> samples;
  if (c.sampling_given) {
    samples = sample_perturbations(c.sampling, c.master_seed);
  } else {
    samples.push_back({base.v, base.y, sample_seed(c.master_seed, 0), 0});
  }
  std::vector<DualityRecord> records;
  for (const auto& s : samples) {
    DualityRecord r{s, std::nullopt, std::nullopt, std::nullopt};
    PrimalDualProblem p = base;
    p.v = s.v;
    if (s.y) p.y = *s.y;
    try {
      const DualityCertificate cert = solve_primal_dual(p);
      r.certificate = cert;
      if (!(cert.gap >= -1e-9)) rec.invariant_violations.push_back(where(s) + ": negative duality gap " + fmt_num(cert.gap));
      if (cert.feasibility.y_interior && cert.feasibility.v_interior && !(cert.gap <= 1e-8)) {
        rec.invariant_violations.push_back(where(s) + ": duality gap " + fmt_num(cert.gap) + " at an interior parameter");
      }
      const double dh = limiting_subdiff(p.h, p.a * cert.x + p.y).distance(cert.u);
      const double df = limiting_subdiff(p.f, cert.x).distance(p.v - p.a.transpose() * cert.u);
      if (!(std::max(dh, df) <= c.residual)) {
        rec.invariant_violations.push_back(where(s) + ": certificate complementarity residual " +
                                           fmt_num(std::max(dh, df)));
      }
      try {
        r.smooth = smooth_dependence_probe(p);
      } catch (const Error& e) {
        r.smooth = SmoothDependence{false, 0.0, e.what()};
      }
    } catch (const std::exception& e) {
      r.error = e.what();
      rec.errors.push_back(where(s) + ": " + e.what());
    }
    records.push_back(std::move(r));
  }
  return duality_report(records, hash);
}

}  // namespace

RunRecord run_experiment(const ExperimentConfig& c, const RunOptions& opts) {
  RunRecord rec;
  rec.config_hash = config_hash(c);
  rec.code_version = TILTLAB_VERSION;
  rec.started = utc_now();
  Report report;
  switch (c.mode) {
    case Mode::TiltSweep:
    case Mode::CompositeSweep:
    case Mode::SinglePoint: report = run_sweep(c, opts, rec.config_hash, rec); break;
    case Mode::Atlas: report = run_atlas(c, opts, rec.config_hash, rec); break;
    case Mode::Duality: report = run_duality(c, rec.config_hash, rec); break;
  }
  rec.reports = emit_report(report, c.formats, c.output_dir);
  rec.finished = utc_now();
  const auto path = c.output_dir / "run.json";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << run_record_to_json(rec).dump(2) << "\n";
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  return rec;
}

}  // namespace tiltlab
