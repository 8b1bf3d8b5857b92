#include <cmath>

#include "test_support.hpp"
#include "tiltlab/genericity.hpp"
#include "tiltlab/library.hpp"
#include "tiltlab/prox.hpp"

using namespace tiltlab;
using namespace tiltlab::testing;

namespace {

SamplingConfig box1(double lo, double hi, int count, bool grid = false) {
  SamplingConfig c;
  c.v_lo = v1(lo);
  c.v_hi = v1(hi);
  c.count = count;
  c.grid = grid;
  return c;
}

ManifoldSpec origin(int n) { return ManifoldSpec::affine(Mat::Identity(n, n), Vec::Zero(n)); }

// Closed-form soft threshold of |x| - v x with parameter r: prox of the tilt.
double tilted_soft_threshold(double z, double v, double r) {
  const double s = z + r * v;
  return std::abs(s) <= r ? 0.0 : s - r * (s > 0 ? 1.0 : -1.0);
}

// Closed-form real roots of 4x^3 - 4x - v.
int double_well_count(double v) {
  const double disc = 8.0 / (3.0 * std::sqrt(3.0));
  if (std::abs(v) < disc) return 3;
  return std::abs(v) == disc ? 2 : 1;
}

}  // namespace

TEST_CASE("sampling is deterministic and stays in the box") {
  const auto a = sample_perturbations(box1(-2, 2, 5), 42);
  const auto b = sample_perturbations(box1(-2, 2, 5), 42);
  REQUIRE(a.size() == 5);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].v(0) == b[i].v(0));
    CHECK(a[i].seed == b[i].seed);
    CHECK(a[i].index == static_cast<int>(i));
  }
  CHECK(sample_perturbations(box1(-2, 2, 5), 43)[0].v(0) != a[0].v(0));

  const auto g = sample_perturbations(box1(-2, 2, 2001, true), 0);
  REQUIRE(g.size() == 2001);
  CHECK(g.front().v(0) == -2.0);
  CHECK(g.back().v(0) == 2.0);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i].v(0) == doctest::Approx(-2.0 + 0.002 * i).epsilon(1e-12));

  SamplingConfig c2;
  c2.v_lo = v2(-1, 0);
  c2.v_hi = v2(1, 3);
  c2.count = 100;
  for (const auto& s : sample_perturbations(c2, 7)) {
    CHECK((s.v.array() >= c2.v_lo.array()).all());
    CHECK((s.v.array() <= c2.v_hi.array()).all());
  }
  CHECK_THROWS_AS(sample_perturbations(box1(1, -1, 3), 0), Error);
}

TEST_CASE("strict complementarity of |x| at the origin") {
  const auto f = lib::abs_value();
  CHECK(strict_complementarity_check(f, v1(0), v1(0.5)));
  CHECK_FALSE(strict_complementarity_check(f, v1(0), v1(1.0)));
  // d f_v(0) = [-1-v, 1-v]; 0 is interior iff |v| < 1.
  for (const auto& s : sample_perturbations(box1(-2, 2, 2001, true), 0)) {
    const double v = s.v(0);
    if (std::abs(v) > 1.0) continue;  // 0 is not critical there
    const bool expected = std::abs(std::abs(v) - 1.0) > 1e-9;
    CHECK(strict_complementarity_check(f, v1(0), s.v) == expected);
  }
}

TEST_CASE("prox-regularity") {
  const auto r1 = prox_regularity_check(lib::abs_value(), v1(0.3), v1(0));
  CHECK(r1.prox_regular);
  REQUIRE(r1.r);
  CHECK(*r1.r == 1.0);
  const auto r2 = prox_regularity_check(lib::neg_square(), v1(0), v1(0));
  CHECK(r2.prox_regular);
  REQUIRE(r2.r);
  CHECK(*r2.r == 10.0);
}

TEST_CASE("finite identification") {
  SUBCASE("|x| at v = 0.3 reaches the origin") {
    const auto f = lib::abs_value();
    const auto tr = finite_identification_test(f, v1(0.3), v1(0), {origin(1), ManifoldSpec::whole(1)});
    REQUIRE(tr.verdict == IdentificationVerdict::Identified);
    CHECK(tr.manifold->dim() == 0);
    REQUIRE(tr.hit_index);
    // Independent replay of the first run by the closed-form soft threshold.
    double z = tr.iterates.front()(0);
    int hit = 0;
    while (z != 0.0) {
      z = tilted_soft_threshold(z, 0.3, 1.0);
      ++hit;
    }
    CHECK(tr.iterates[static_cast<std::size_t>(hit)](0) == 0.0);
    CHECK(*tr.hit_index >= hit);
    CHECK(*tr.hit_index <= 2);
    // Default candidates find the same manifold.
    const auto td = finite_identification_test(f, v1(0.3), v1(0));
    CHECK(td.verdict == IdentificationVerdict::Identified);
    CHECK(td.manifold->dim() == 0);
  }
  SUBCASE("squared l1 norm has no identifiable manifold at the origin") {
    const auto tr = finite_identification_test(lib::l1_squared(2), v2(0, 0), v2(0, 0));
    CHECK(tr.verdict == IdentificationVerdict::NoIdentifiableManifold);
    CHECK_FALSE(tr.manifold);
  }
  SUBCASE("smooth function: the whole space at iteration 0") {
    const auto tr = finite_identification_test(lib::square(), v1(0), v1(0), {ManifoldSpec::whole(1)});
    REQUIRE(tr.verdict == IdentificationVerdict::Identified);
    CHECK(tr.hit_index == 0);
    CHECK(tr.manifold->dim() == 1);
  }
  SUBCASE("identified tails lie on the manifold") {
    const auto f = lib::abs_value();
    const auto tr = finite_identification_test(f, v1(-0.6), v1(0));
    REQUIRE(tr.verdict == IdentificationVerdict::Identified);
    for (std::size_t k = static_cast<std::size_t>(*tr.hit_index); k < tr.iterates.size(); ++k) {
      CHECK(tr.manifold->contains(tr.iterates[k], 1e-8));
    }
  }
}

TEST_CASE("weak critical value probe") {
  const auto q = weak_critical_value_probe(lib::quartic(), v1(0));
  CHECK_FALSE(q.strongly_regular);
  for (double v : {-1.3, 0.0, 0.4, 2.0}) {
    const auto s = weak_critical_value_probe(lib::square(), v1(v));
    CHECK(s.strongly_regular);
    CHECK(s.branch_count == 1);
    CHECK(s.lipschitz_estimate == doctest::Approx(0.5).epsilon(1e-6));
  }
  CHECK_FALSE(weak_critical_value_probe(lib::abs_value(), v1(1.0)).strongly_regular);
  CHECK(weak_critical_value_probe(lib::abs_value(), v1(0.5)).strongly_regular);
  CHECK_FALSE(weak_critical_value_probe(lib::double_well(), v1(8.0 / (3.0 * std::sqrt(3.0)))).strongly_regular);
  const auto dw = weak_critical_value_probe(lib::double_well(), v1(0.3));
  CHECK(dw.strongly_regular);
  CHECK(dw.branch_count == 3);
}

TEST_CASE("stable quadratic growth") {
  const auto sq = stable_quadratic_growth_check(lib::square(), v1(0), v1(0));
  CHECK(sq.ok);
  CHECK(sq.alpha == 2.0);
  const auto ab = stable_quadratic_growth_check(lib::abs_value(), v1(0), v1(0));
  CHECK(ab.ok);
  CHECK(ab.alpha == 128.0);
  // Oracle: 2 (1 - 0.1) / 0.01 = 180 bounds the largest admissible dyadic value.
  CHECK(ab.alpha <= 180.0);
  const auto neg = stable_quadratic_growth_check(lib::neg_square(), v1(0), v1(0));
  CHECK_FALSE(neg.ok);
  CHECK_FALSE(neg.diagnostic.empty());
}

TEST_CASE("second-order equivalence table") {
  const auto t1 = second_order_equivalence_check(lib::square(), v1(0), v1(0), ManifoldSpec::whole(1));
  CHECK(t1.str() == "TTTT");
  CHECK(t1.consistent());
  const auto t2 = second_order_equivalence_check(lib::abs_value(), v1(0.5), v1(0), origin(1));
  CHECK(t2.str() == "TTTT");
  const auto t3 = second_order_equivalence_check(lib::quartic(), v1(0), v1(0), ManifoldSpec::whole(1));
  CHECK(t3.str() == "T?FF");
  CHECK_FALSE(t3.consistent());
  CHECK_FALSE(weak_critical_value_probe(lib::quartic(), v1(0)).strongly_regular);
  const auto t4 = second_order_equivalence_check(lib::neg_square(), v1(0), v1(0), ManifoldSpec::whole(1));
  CHECK(t4.str() == "FFFF");
}

TEST_CASE("projection identifiability") {
  const Polyhedron quad = lib::orthant_set(2);
  const ManifoldSpec face = ManifoldSpec::affine(Mat{{1.0, 0.0}}, v1(0));
  CHECK(projection_identifiability_check(quad, v2(0, 1), v2(-1, 0), face));
  CHECK(projection_identifiability_check(lib::halfline_set(), v1(0), v1(-1), origin(1)));
  CHECK(projection_identifiability_check(quad, v2(0, 0), v2(-1, -1), origin(2)));
  // A normal on the boundary of the normal cone: the face is not identified.
  CHECK_FALSE(projection_identifiability_check(quad, v2(0, 0), v2(-1, 0), origin(2)));
}

TEST_CASE("selection atlas") {
  SUBCASE("double well") {
    GridSpec g{v1(-3), v1(3), 601};
    const auto at = build_selection_atlas(lib::double_well(), g);
    CHECK(at.n_max == 3);
    const double disc = 8.0 / (3.0 * std::sqrt(3.0));
    REQUIRE(at.transitions.size() == 2);
    CHECK(at.transitions[0](0) == doctest::Approx(-disc).epsilon(1e-9));
    CHECK(at.transitions[1](0) == doctest::Approx(disc).epsilon(1e-9));
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = g.node(i)(0);
      CHECK(at.cardinality[i] == double_well_count(v));
      if (at.flagged[i]) CHECK(std::abs(std::abs(v) - disc) <= g.step(0));
    }
    bool three_around_zero = false;
    for (const auto& r : at.regions) {
      if (r.cardinality != 3) continue;
      const double lo = g.node(r.nodes.front())(0);
      const double hi = g.node(r.nodes.back())(0);
      three_around_zero = lo < 0 && hi > 0 && std::abs(lo + disc) <= 2 * g.step(0) &&
                          std::abs(hi - disc) <= 2 * g.step(0);
      for (const auto& br : r.branches) {
        REQUIRE(br.size() == 3);
        CHECK((br[1] - br[0]).norm() >= at.branch_gap);
        CHECK((br[2] - br[1]).norm() >= at.branch_gap);
      }
    }
    CHECK(three_around_zero);
    CHECK(at.coverage() >= 0.99);
  }
  SUBCASE("absolute value") {
    GridSpec g{v1(-2), v1(2), 201};
    const auto at = build_selection_atlas(lib::abs_value(), g);
    CHECK(at.n_max == 1);
    REQUIRE(at.transitions.size() == 2);
    // Bisection resolves the value to the inclusion tolerance of the enumeration.
    CHECK(at.transitions[0](0) == doctest::Approx(-1.0).epsilon(1e-7));
    CHECK(at.transitions[1](0) == doctest::Approx(1.0).epsilon(1e-7));
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = g.node(i)(0);
      if (std::abs(v) < 1.0 - 1e-12) CHECK(at.cardinality[i] == 1);
      if (std::abs(v) > 1.0 + 1e-12) CHECK(at.cardinality[i] == 0);
      CHECK(at.flagged[i] == (std::abs(std::abs(v) - 1.0) < 1e-12));
    }
    CHECK(at.regions.size() == 3);
  }
  SUBCASE("square: one region") {
    GridSpec g{v1(-1), v1(1), 51};
    const auto at = build_selection_atlas(lib::square(), g);
    CHECK(at.n_max == 1);
    REQUIRE(at.regions.size() == 1);
    CHECK(at.regions[0].cardinality == 1);
    CHECK(at.coverage() == 1.0);
    for (std::size_t k = 0; k < at.regions[0].nodes.size(); ++k) {
      CHECK(at.regions[0].branches[k][0](0) == doctest::Approx(g.node(at.regions[0].nodes[k])(0) / 2));
    }
  }
  SUBCASE("two-dimensional grid") {
    GridSpec g{v2(-1, -1), v2(1, 1), 11};
    const auto at = build_selection_atlas(lib::l1_squared(2), g);
    CHECK(at.cardinality.size() == 121);
    CHECK(at.n_max >= 1);
  }
  CHECK_THROWS_AS(build_selection_atlas(lib::square(), GridSpec{Vec::Zero(3), Vec::Ones(3), 3}), Error);
}

TEST_CASE("genericity experiment on |x|") {
  ExperimentOptions o;
  o.sampling = box1(-2, 2, 1000);
  o.seed = 11;
  const auto rep = run_genericity_experiment(TiltProblem{lib::abs_value(), {}}, o);
  REQUIRE(rep.samples.size() == 1000);
  CHECK(rep.failure_fraction <= 0.005);
  // The probe resolves transitions to its finest scale.
  for (const auto& s : rep.failure_set) CHECK(std::abs(std::abs(s.v(0)) - 1.0) <= kProbeScales[2]);
  CHECK(rep.n_max == 1);
  CHECK(rep.sampling_mode == "random");
  for (const auto& s : rep.samples) {
    CHECK(s.critical_count == (std::abs(s.sample.v(0)) <= 1.0 ? 1 : 0));
  }
}

TEST_CASE("genericity experiment on x^2") {
  ExperimentOptions o;
  o.sampling = box1(-2, 2, 50);
  o.seed = 3;
  const auto rep = run_genericity_experiment(TiltProblem{lib::square(), {}}, o);
  CHECK(rep.n_max == 1);
  CHECK(rep.failure_set.empty());
  for (const auto& s : rep.samples) {
    REQUIRE(s.points.size() == 1);
    const auto& p = s.points[0];
    CHECK(p.x(0) == doctest::Approx(s.sample.v(0) / 2));
    CHECK(p.strict_complementarity);
    CHECK(p.prox_regular);
    CHECK(p.identified_manifold);
    CHECK(p.strongly_regular);
    CHECK(p.stable_growth);
    REQUIRE(p.equivalence);
    CHECK(p.equivalence->str() == "TTTT");
  }
}

TEST_CASE("genericity experiment on a constrained composite family") {
  CompositeFamily fam{zero_function(1), indicator(lib::nonpositive_set()), SmoothMap({lib::poly1_raw({-1.0, 0.0, 1.0})}),
                      {v1(-0.9), v1(0.9)}, v1(0.5)};
  ExperimentOptions o;
  o.sampling = box1(-1, 1, 1000);
  o.sampling.y_lo = v1(-1);
  o.sampling.y_hi = v1(1);
  o.sampling.exclude_v_radius = 1e-3;
  o.seed = 5;
  const auto rep = run_genericity_experiment(fam, o);
  REQUIRE(rep.samples.size() == 1000);
  CHECK(rep.failure_set.empty());
  for (const auto& s : rep.samples) {
    const double v = s.sample.v(0);
    const double y = (*s.sample.y)(0);
    CHECK(std::abs(v) >= 1e-3);
    REQUIRE(s.points.size() == 1);
    const auto& p = s.points[0];
    // KKT closed form: x = sign(v) sqrt(1 - y), lambda = |v| / (2 sqrt(1 - y)).
    CHECK(p.x(0) == doctest::Approx((v > 0 ? 1 : -1) * std::sqrt(1 - y)).epsilon(1e-8));
    CHECK((*p.lambda)(0) == doctest::Approx(std::abs(v) / (2 * std::sqrt(1 - y))).epsilon(1e-8));
    CHECK((*p.lambda)(0) > 0);
    CHECK(p.strict_complementarity);
    CHECK(p.multiplier_unique);
    REQUIRE(p.qual);
    CHECK(p.qual->bcq);
  }
}
