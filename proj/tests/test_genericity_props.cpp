#include <cmath>
#include <random>

#include "test_support.hpp"
#include "tiltlab/genericity.hpp"
#include "tiltlab/library.hpp"

using namespace tiltlab;
using namespace tiltlab::testing;

namespace {

struct Instance {
  const char* name;
  FunctionExpr f;
  double box;
};

std::vector<Instance> library() {
  const Polynomial x = Polynomial::variable(2, 0);
  const Polynomial y = Polynomial::variable(2, 1);
  return {
      {"square", lib::square(), 2.0},
      {"abs", lib::abs_value(), 2.0},
      {"double_well", lib::double_well(), 3.0},
      {"neg_square", lib::neg_square(), 2.0},
      {"quartic", lib::quartic(), 2.0},
      {"halfline", lib::halfline(), 2.0},
      {"abs_plus_square", sum({lib::abs_value(), lib::square()}), 2.0},
      {"saddle", polynomial(x * x - y * y), 1.0},
      {"l1", norm_l1(2), 1.5},
  };
}

std::vector<Vec> tilts(const Instance& inst, int count, std::uint64_t seed) {
  SamplingConfig c;
  c.v_lo = Vec::Constant(inst.f.dim(), -inst.box);
  c.v_hi = Vec::Constant(inst.f.dim(), inst.box);
  c.count = count;
  std::vector<Vec> out;
  std::vector<Vec> transitions;
  if (inst.f.dim() == 1) {
    transitions = build_selection_atlas(inst.f, GridSpec{c.v_lo, c.v_hi, 201}).transitions;
  }
  for (const auto& s : sample_perturbations(c, seed)) {
    bool near = false;
    for (const auto& t : transitions) near = near || (t - s.v).norm() < 1e-6;
    if (!near) out.push_back(s.v);
  }
  return out;
}

bool same_report(const GenericityReport& a, const GenericityReport& b) {
  if (a.samples.size() != b.samples.size() || a.n_max != b.n_max || a.failure_set.size() != b.failure_set.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    const auto& s = a.samples[i];
    const auto& t = b.samples[i];
    if (s.sample.v != t.sample.v || s.sample.seed != t.sample.seed || s.critical_count != t.critical_count ||
        s.failed != t.failed || s.points.size() != t.points.size() || s.error != t.error) {
      return false;
    }
    for (std::size_t k = 0; k < s.points.size(); ++k) {
      const auto& p = s.points[k];
      const auto& q = t.points[k];
      if (p.x != q.x || p.strict_complementarity != q.strict_complementarity || p.prox_regular != q.prox_regular ||
          p.prox_r != q.prox_r || p.identified_manifold != q.identified_manifold || p.manifold != q.manifold ||
          p.strongly_regular != q.strongly_regular || p.stable_growth != q.stable_growth || p.alpha != q.alpha ||
          p.classification != q.classification ||
          (p.equivalence ? p.equivalence->str() : "") != (q.equivalence ? q.equivalence->str() : "")) {
        return false;
      }
    }
  }
  return true;
}

}  // namespace

TEST_CASE("experiment reports are deterministic and independent of execution mode") {
  ExperimentOptions o;
  o.sampling.v_lo = v1(-3);
  o.sampling.v_hi = v1(3);
  o.sampling.count = 40;
  o.seed = 2024;
  o.execution = Execution::Serial;
  const Problem prob = TiltProblem{lib::double_well(), {}};
  const auto serial = run_genericity_experiment(prob, o);
  const auto serial2 = run_genericity_experiment(prob, o);
  o.execution = Execution::Parallel;
  o.jobs = 4;
  const auto parallel = run_genericity_experiment(prob, o);
  CHECK(same_report(serial, serial2));
  CHECK(same_report(serial, parallel));
  CHECK(serial.n_max == 3);
  o.seed = 2025;
  CHECK_FALSE(same_report(serial, run_genericity_experiment(prob, o)));
}

TEST_CASE("equivalence table is constant at generic tilts") {
  for (const auto& inst : library()) {
    CAPTURE(std::string(inst.name));
    for (const auto& v : tilts(inst, 12, 99)) {
      CAPTURE(v.transpose());
      const auto crit = enumerate_critical_points(inst.f, v, {}, true);
      REQUIRE_FALSE(crit.continuum);
      for (const auto& cp : crit.points) {
        CAPTURE(cp.x.transpose());
        const auto id = finite_identification_test(inst.f, v, cp.x);
        REQUIRE(id.verdict == IdentificationVerdict::Identified);
        const auto table = second_order_equivalence_check(inst.f, v, cp.x, *id.manifold);
        CAPTURE(table.str());
        CHECK(table.consistent());
        // The manifold captures the minimizing behaviour: f_v and f_v + indicator(M)
        // agree on strict local minimality.
        const auto on_m = classify_critical_point(restrict_to(inst.f, *id.manifold), v, cp.x);
        if (cp.classification != Classification::Unknown && on_m != Classification::Unknown) {
          CHECK((cp.classification == Classification::LocalMin) == (on_m == Classification::LocalMin));
        }
        // Strict complementarity plus identification gives the sharpness equality.
        if (strict_complementarity_check(inst.f, cp.x, v)) CHECK(sharpness_check(inst.f, v, cp.x, *id.manifold));
      }
    }
  }
}

TEST_CASE("atlas flags agree with the weak critical value probe") {
  struct Case {
    FunctionExpr f;
    GridSpec grid;
  };
  for (const auto& c : {Case{lib::abs_value(), GridSpec{v1(-2), v1(2), 201}},
                        Case{lib::double_well(), GridSpec{v1(-3), v1(3), 601}},
                        Case{lib::square(), GridSpec{v1(-1), v1(1), 101}}}) {
    const auto at = build_selection_atlas(c.f, c.grid);
    for (std::size_t i = 0; i < c.grid.size(); ++i) {
      CAPTURE(c.grid.node(i)(0));
      CHECK(weak_critical_value_probe(c.f, c.grid.node(i)).strongly_regular == !at.flagged[i]);
    }
    CHECK(at.coverage() >= 0.99);
  }
}

TEST_CASE("atlas branches on regions match enumeration and are separated") {
  const GridSpec g{v1(-3), v1(3), 121};
  const auto at = build_selection_atlas(lib::double_well(), g);
  for (const auto& r : at.regions) {
    for (std::size_t k = 0; k < r.nodes.size(); ++k) {
      const auto& br = r.branches[k];
      REQUIRE(static_cast<int>(br.size()) == r.cardinality);
      for (std::size_t j = 0; j < br.size(); ++j) {
        // Each branch value solves 4x^3 - 4x = v.
        const double x = br[j](0);
        CHECK(4 * x * x * x - 4 * x == doctest::Approx(g.node(r.nodes[k])(0)).epsilon(1e-9));
        if (j > 0) CHECK((br[j] - br[j - 1]).norm() >= at.branch_gap);
      }
    }
  }
}

TEST_CASE("strict complementarity flags come from the polytope oracle alone") {
  // |x| + x^2 at tilts sampled on both sides of the kinks: the flag must match
  // the closed form 0 in (-1 - v, 1 - v) regardless of what identification reports.
  const auto f = sum({lib::abs_value(), lib::square()});
  std::mt19937_64 rng(31);
  for (int k = 0; k < 200; ++k) {
    const Vec v = random_vec(rng, 1, -1.5, 1.5);
    if (std::abs(v(0)) > 1.0) continue;
    CHECK(strict_complementarity_check(f, v1(0), v) == (std::abs(std::abs(v(0)) - 1.0) > 1e-9));
  }
}
