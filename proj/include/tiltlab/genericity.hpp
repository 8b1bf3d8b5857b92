#pragma once

#include <cstdint>

#include "tiltlab/criticality.hpp"

namespace tiltlab {

// ---- sampling -----------------------------------------------------------------

struct PerturbationSample {
  Vec v;
  std::optional<Vec> y;
  std::uint64_t seed = 0;
  int index = 0;
};

struct SamplingConfig {
  Vec v_lo;
  Vec v_hi;
  /// Composite runs also sample y from [y_lo, y_hi].
  std::optional<Vec> y_lo;
  std::optional<Vec> y_hi;
  /// Number of samples, or nodes per axis in grid mode.
  int count = 100;
  bool grid = false;
  /// Samples with |v| below this are redrawn (random mode) or dropped (grid mode).
  double exclude_v_radius = 0.0;
};

/// Per-sample stream seed derived from (master seed, index).
std::uint64_t sample_seed(std::uint64_t master_seed, int index);

/// Uniform samples on the box, reproducible from (master seed, index); grid
/// mode gives equally spaced nodes including the endpoints.
std::vector<PerturbationSample> sample_perturbations(const SamplingConfig& cfg, std::uint64_t master_seed);

// ---- per-point probes -----------------------------------------------------------

/// 0 in ri of the proximal subdifferential of f_v at x.
bool strict_complementarity_check(const FunctionExpr& f, const Vec& x, const Vec& v, double tol = kDefaultTol);

struct ProxRegularity {
  bool prox_regular = false;
  /// Smallest r in {1, 10, 100} for which the localized graph of subdiff f_v + rI is monotone.
  std::optional<double> r;
};
ProxRegularity prox_regularity_check(const FunctionExpr& f, const Vec& v, const Vec& x);

enum class IdentificationVerdict { Identified, NoIdentifiableManifold, Inconclusive };
const char* to_string(IdentificationVerdict v);

struct IdentificationTrace {
  /// Proximal-point iterates from the first start.
  std::vector<Vec> iterates;
  std::optional<ManifoldSpec> manifold;
  std::optional<int> hit_index;
  IdentificationVerdict verdict = IdentificationVerdict::Inconclusive;
};

struct IdentificationOptions {
  int iterations = 500;
  int starts = 8;
  double radius = 1e-2;
  int tail = 100;
  /// Prox parameter of the iteration x <- prox(f_v, x, r).
  double prox_r = 1.0;
};

/// Manifolds {s_i = 0, i in S} for subsets S of the switching polynomials
/// vanishing at x whose gradients are independent there, plus the whole space.
std::vector<ManifoldSpec> default_candidates(const FunctionExpr& f, const Vec& x);

IdentificationTrace finite_identification_test(const FunctionExpr& f, const Vec& v, const Vec& x,
                                               const std::vector<ManifoldSpec>& candidates,
                                               const IdentificationOptions& opts = {});
inline IdentificationTrace finite_identification_test(const FunctionExpr& f, const Vec& v, const Vec& x) {
  return finite_identification_test(f, v, x, default_candidates(f, x));
}

/// Whether f is a single polynomial on M near x (sign patterns of the switching
/// polynomials are constant on sampled points of M).
bool smooth_on_manifold(const FunctionExpr& f, const ManifoldSpec& m, const Vec& x);

/// para of the proximal subdifferential of f_v at x equals N_M(x).
bool sharpness_check(const FunctionExpr& f, const Vec& v, const Vec& x, const ManifoldSpec& m);

struct WeakCriticalProbe {
  bool strongly_regular = false;
  double lipschitz_estimate = 0.0;
  int branch_count = 0;
};
inline constexpr double kProbeScales[] = {1e-2, 1e-3, 1e-4};
WeakCriticalProbe weak_critical_value_probe(const FunctionExpr& f, const Vec& v, const StationaryOptions& opts = {});

struct GrowthResult {
  bool ok = false;
  double alpha = 0.0;
  /// Radius of the tilt ball the certificate holds on.
  double tilt_radius = 0.0;
  /// False when every sampled tilt kept a strict minimizer but no dyadic alpha
  /// down to 2^-10 (or no tilt radius down to 1e-6) certified the growth.
  bool decided = true;
  std::string diagnostic;
};
GrowthResult stable_quadratic_growth_check(const FunctionExpr& f, const Vec& v, const Vec& x,
                                           const StationaryOptions& opts = {});

/// f + indicator of M, expressed in the function class.
FunctionExpr restrict_to(const FunctionExpr& f, const ManifoldSpec& m);

/// Items (i)-(iv); an empty entry means the oracle was inconclusive.
struct EquivalenceTable {
  std::optional<bool> local_min;
  std::optional<bool> stable_strong_min;
  std::optional<bool> positive_on_critical_cone;
  std::optional<bool> positive_on_tangent_space;
  bool inconclusive() const;
  /// All four decided and equal.
  bool consistent() const;
  std::string str() const;
};
EquivalenceTable second_order_equivalence_check(const FunctionExpr& f, const Vec& v, const Vec& x,
                                                const ManifoldSpec& m, const StationaryOptions& opts = {});

/// P_Q = P_M on balls around x + l v for l in {1e-1, 1e-2} (100 points each).
bool projection_identifiability_check(const Polyhedron& q, const Vec& x, const Vec& v, const ManifoldSpec& m);

// ---- selection atlas --------------------------------------------------------------

struct GridSpec {
  Vec lo;
  Vec hi;
  /// Nodes per axis.
  int nodes = 101;
  int dim() const { return static_cast<int>(lo.size()); }
  std::size_t size() const;
  Vec node(std::size_t index) const;
  double step(int axis) const { return (hi(axis) - lo(axis)) / (nodes - 1); }
};

struct AtlasRegion {
  int cardinality = 0;
  std::vector<std::size_t> nodes;
  /// branches[k][j]: value of branch j at nodes[k] (branches sorted lexicographically).
  std::vector<std::vector<Vec>> branches;
};

struct SelectionAtlas {
  GridSpec grid;
  /// Per node; -1 when the preimage could not be resolved as a finite set.
  std::vector<int> cardinality;
  /// Estimated negligible set: unresolved nodes, branch collisions, transitions.
  std::vector<bool> flagged;
  std::vector<AtlasRegion> regions;
  /// Parameter values where the cardinality changes, localized by bisection.
  std::vector<Vec> transitions;
  int n_max = 0;
  double branch_gap = 1e-6;
  double coverage() const;
};

SelectionAtlas build_selection_atlas(const FunctionExpr& f, const GridSpec& grid, double branch_gap = 1e-6,
                                     const StationaryOptions& opts = {});

// ---- experiments ---------------------------------------------------------------

struct TiltProblem {
  FunctionExpr f;
  StationaryOptions stationary;
};

struct CompositeFamily {
  FunctionExpr f;
  FunctionExpr h;
  SmoothMap g;
  /// Starting points for the pair solver; multipliers start at lambda0.
  std::vector<Vec> x_starts;
  Vec lambda0;
};

using Problem = std::variant<TiltProblem, CompositeFamily>;

struct PointRecord {
  Vec x;
  std::optional<Vec> lambda;
  bool strict_complementarity = false;
  bool prox_regular = false;
  std::optional<double> prox_r;
  bool identified_manifold = false;
  std::optional<std::string> manifold;
  bool strongly_regular = false;
  bool stable_growth = false;
  double alpha = 0.0;
  std::optional<EquivalenceTable> equivalence;
  // composite only
  std::optional<QualFlags> qual;
  bool multiplier_unique = false;
  std::string classification;
};

struct SampleRecord {
  PerturbationSample sample;
  int critical_count = 0;
  bool non_isolated = false;
  std::vector<PointRecord> points;
  std::optional<std::string> error;
  /// Any flag false, an error, or a non-isolated solution set.
  bool failed = false;
};

struct GenericityReport {
  std::vector<SampleRecord> samples;
  int n_max = 0;
  std::vector<PerturbationSample> failure_set;
  double failure_fraction = 0.0;
  double runtime_seconds = 0.0;
  std::string sampling_mode;
  /// Surjectivity of the critical-point map onto M is not tested.
  std::string untested = "surjectivity onto the identified manifold";
};

enum class Execution { Serial, Parallel };

struct ExperimentOptions {
  SamplingConfig sampling;
  std::uint64_t seed = 0;
  Execution execution = Execution::Parallel;
  /// OpenMP threads; 0 keeps the runtime default.
  int jobs = 0;
  /// Skip the expensive equivalence table (still computes every other flag).
  bool equivalence = true;
};

/// Evaluate one sample; never throws (errors are recorded).
SampleRecord evaluate_sample(const Problem& problem, const PerturbationSample& s, bool equivalence = true);

GenericityReport run_genericity_experiment(const Problem& problem, const ExperimentOptions& opts);

}  // namespace tiltlab
