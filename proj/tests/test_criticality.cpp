#include "test_support.hpp"
#include "tiltlab/criticality.hpp"
#include "tiltlab/derivatives.hpp"
#include "tiltlab/library.hpp"

using namespace tiltlab;
using namespace tiltlab::testing;

namespace {

// Real roots of a univariate polynomial by sign changes on a fine grid plus bisection.
std::vector<double> bisection_roots(const std::function<double(double)>& p, double lo, double hi) {
  std::vector<double> out;
  const int m = 60000;
  double a = lo;
  for (int k = 1; k <= m; ++k) {
    const double b = lo + (hi - lo) * k / m;
    if (p(a) == 0.0) out.push_back(a);
    if (p(a) * p(b) < 0) {
      double l = a, r = b;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (l + r);
        (p(l) * p(mid) <= 0 ? r : l) = mid;
      }
      out.push_back(0.5 * (l + r));
    }
    a = b;
  }
  return out;
}

CompositeProblem constrained_example(double v, double y) {
  // min -v x  s.t.  x^2 - 1 + y <= 0
  return {zero_function(1), indicator(lib::nonpositive_set()), SmoothMap({lib::poly1_raw({-1.0, 0.0, 1.0})}), v1(v),
          v1(y)};
}

}  // namespace

TEST_CASE("enumerate critical points: examples") {
  {
    const auto e = enumerate_critical_points(lib::abs_value(), v1(0.5));
    REQUIRE(e.points.size() == 1);
    CHECK(e.points[0].x(0) == doctest::Approx(0.0));
    CHECK(e.points[0].residual == 0.0);
    CHECK(e.points[0].classification == Classification::LocalMin);
  }
  {
    const auto e = enumerate_critical_points(lib::double_well(), v1(2.0));
    const auto roots = bisection_roots([](double x) { return 4 * x * x * x - 4 * x - 2; }, -5, 5);
    REQUIRE(roots.size() == 1);
    REQUIRE(e.points.size() == 1);
    CHECK(e.points[0].x(0) == doctest::Approx(roots[0]).epsilon(1e-10));
    CHECK(e.points[0].residual <= 1e-8);
  }
  CHECK(enumerate_critical_points(lib::abs_value(), v1(1.5)).points.empty());
}

TEST_CASE("enumerate critical points: double well counts against cubic roots") {
  std::mt19937_64 rng(11);
  for (int k = 0; k < 40; ++k) {
    const double v = std::uniform_real_distribution<double>(-3, 3)(rng);
    const auto roots = bisection_roots([v](double x) { return 4 * x * x * x - 4 * x - v; }, -5, 5);
    const auto e = enumerate_critical_points(lib::double_well(), v1(v), {}, false);
    REQUIRE(e.points.size() == roots.size());
    for (std::size_t i = 0; i < roots.size(); ++i) CHECK(e.points[i].x(0) == doctest::Approx(roots[i]).epsilon(1e-9));
  }
}

TEST_CASE("every enumerated point passes the independent inclusion test") {
  std::mt19937_64 rng(5);
  const std::vector<FunctionExpr> fs = {lib::abs_value(), lib::double_well(), lib::square(), lib::neg_abs(),
                                        lib::l1_squared(2), sum({lib::square(), lib::halfline()})};
  for (const auto& f : fs) {
    for (int k = 0; k < 10; ++k) {
      const Vec v = random_vec(rng, f.dim(), -2.0, 2.0);
      const auto e = enumerate_critical_points(f, v, {}, false);
      for (const auto& cp : e.points) {
        CHECK(limiting_subdiff(f, cp.x).distance(v) <= 1e-8);
        CHECK(cp.value.as_double() == doctest::Approx(evaluate(f, cp.x).as_double() - v.dot(cp.x)));
      }
    }
  }
}

TEST_CASE("classify critical points: examples") {
  CHECK(classify_critical_point(lib::square(), v1(0), v1(0)) == Classification::LocalMin);
  CHECK(classify_critical_point(lib::neg_square(), v1(0), v1(0)) == Classification::NotLocalMin);
  CHECK(classify_critical_point(lib::double_well(), v1(0), v1(0)) == Classification::NotLocalMin);
  CHECK(classify_critical_point(lib::double_well(), v1(0), v1(1)) == Classification::LocalMin);
  CHECK(classify_critical_point(lib::quartic(), v1(0), v1(0)) == Classification::LocalMin);
  CHECK(classify_critical_point(lib::neg_abs(), v1(0), v1(0)) == Classification::NotLocalMin);
  // 2-D saddle x^2 - y^2.
  const Polynomial saddle = Polynomial::quadratic(Eigen::Vector2d(2, -2).asDiagonal(), Vec::Zero(2), 0.0);
  CHECK(classify_critical_point(polynomial(saddle), v2(0, 0), v2(0, 0)) == Classification::NotLocalMin);
}

TEST_CASE("second subderivative: closed forms") {
  CHECK(second_subderivative(lib::square(), v1(0), v1(1)) == doctest::Approx(2.0));
  CHECK(second_subderivative(lib::quartic(), v1(0), v1(1)) == doctest::Approx(0.0));
  // |x| - x at 0 along u = 1: d^2 = w - w = 0.
  CHECK(second_subderivative(tilt(lib::abs_value(), v1(1)), v1(0), v1(1)) == doctest::Approx(0.0));
  CHECK(second_subderivative(tilt(lib::abs_value(), v1(0.5)), v1(0), v1(1)) == -std::numeric_limits<double>::infinity());
  // Indicator of x <= 0 precomposed with x^2 - 1 at x = 1, direction u = -1:
  // d^2 = delta_{T^2}(2u^2 + 2w) = 0 for every w since Ju = -2 is interior.
  const FunctionExpr c = shift(indicator(lib::nonpositive_set()), SmoothMap({lib::poly1_raw({-1, 0, 1})}), v1(0));
  CHECK(second_subderivative(c, v1(1), v1(-1)) == doctest::Approx(0.0));
  // Outside dom df: +inf.
  CHECK(second_subderivative(c, v1(1), v1(1)) == std::numeric_limits<double>::infinity());
}

TEST_CASE("second subderivative of smooth functions is the Hessian form") {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 50; ++k) {
    std::map<Polynomial::Exponents, double> t;
    for (int a = 0; a <= 3; ++a) {
      for (int b = 0; a + b <= 3; ++b) t[{a, b}] = std::uniform_real_distribution<double>(-1, 1)(rng);
    }
    const Polynomial p(2, t);
    const Vec x = random_vec(rng, 2);
    const Vec u = random_vec(rng, 2);
    // Central second difference oracle.
    const double h = 1e-4;
    const double fd = (p(x + h * u) - 2 * p(x) + p(x - h * u)) / (h * h);
    const double q = second_subderivative(tilt(polynomial(p), p.gradient(x)), x, u);
    CHECK(q == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
  }
}

TEST_CASE("second subderivative of max of smooth equals the active-pair LP value") {
  // f = max(x^2 + y, 2x^2 - y) at 0 with v on the segment between gradients
  // (0,1) and (0,-1). Critical directions are multiples of (1,0); Lagrangian
  // curvature with weights (1-s, s) for v = (0, 1-2s) is 2(1-s) + 4s.
  const Polynomial x2 = Polynomial::variable(2, 0) * Polynomial::variable(2, 0);
  const Polynomial yv = Polynomial::variable(2, 1);
  const FunctionExpr f = max_of({x2 + yv, 2.0 * x2 - yv});
  for (double s : {0.1, 0.5, 0.9}) {
    const Vec v = v2(0, 1 - 2 * s);
    const double q = second_subderivative(tilt(f, v), v2(0, 0), v2(1, 0));
    CHECK(q == doctest::Approx(2 * (1 - s) + 4 * s));
    CHECK(second_order_min(f, v, v2(0, 0)) == doctest::Approx(2 * (1 - s) + 4 * s));
  }
}

TEST_CASE("inverse subdifferential distance") {
  const FunctionExpr h = indicator(lib::nonpositive_set());
  CHECK(inverse_subdiff_distance(h, v1(0.5), v1(0.3)) == doctest::Approx(0.3));
  CHECK(inverse_subdiff_distance(h, v1(0.5), v1(-0.3)) == doctest::Approx(0.3));
  CHECK(inverse_subdiff_distance(h, v1(0.0), v1(-1.0)) == doctest::Approx(0.0));
  CHECK(inverse_subdiff_distance(h, v1(0.0), v1(0.25)) == doctest::Approx(0.25));
  CHECK(std::isinf(inverse_subdiff_distance(h, v1(-1.0), v1(0.0))));
  CHECK(inverse_subdiff_distance(norm_l1(2), v2(1, 0.2), v2(-1, 2)) == doctest::Approx(std::sqrt(5.0)));
  CHECK(std::isinf(inverse_subdiff_distance(norm_l1(2), v2(1.5, 0), v2(0, 0))));
  CHECK(inverse_subdiff_distance(norm_l2(2), v2(0.6, 0.8), v2(3, 4)) == doctest::Approx(0.0));
  CHECK(inverse_subdiff_distance(norm_l2(2), v2(0.6, 0.8), v2(-3, -4)) == doctest::Approx(5.0));
  CHECK(inverse_subdiff_distance(norm_linf(2), v2(1, 0), v2(2, 1)) == doctest::Approx(0.0));
  CHECK(inverse_subdiff_distance(norm_linf(2), v2(1, 0), v2(1, 2)) == doctest::Approx(std::sqrt(0.5)));
  // Smooth h: (grad h)^{-1}(l) for h = x^2 is l/2.
  CHECK(inverse_subdiff_distance(lib::square(), v1(1.0), v1(0.0)) == doctest::Approx(0.5));
}

TEST_CASE("composite critical pairs: examples") {
  {
    const auto p = constrained_example(1.0, 0.0);
    const auto pair = solve_composite_critical(p, v1(0.5), v1(0.1));
    REQUIRE(pair.status == SolveStatus::Converged);
    CHECK(pair.x(0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(pair.lambda(0) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(pair.w(0) == doctest::Approx(-1.0).epsilon(1e-9));
    REQUIRE(pair.qual_flags);
    CHECK(pair.qual_flags->bcq);
    CHECK(pair.qual_flags->licq_analogue);
    CHECK(pair.multiplier_unique);
    // Grid minimization of -x over x^2 <= 1.
    double best = 1e9, arg = 0;
    for (int k = 0; k <= 20000; ++k) {
      const double x = -1 + 2.0 * k / 20000;
      if (-x < best) best = -x, arg = x;
    }
    CHECK(pair.x(0) == doctest::Approx(arg).epsilon(1e-6));
  }
  {
    const auto pair = solve_composite_critical(constrained_example(-1.0, 0.0), v1(-0.5), v1(0.1));
    REQUIRE(pair.status == SolveStatus::Converged);
    CHECK(pair.x(0) == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(pair.lambda(0) == doctest::Approx(0.5).epsilon(1e-9));
  }
  {
    const auto p = constrained_example(0.0, 0.0);
    const auto pair = solve_composite_critical(p, v1(0.3), v1(0.2));
    CHECK(pair.status == SolveStatus::NonIsolated);
    CHECK(pair.lambda(0) == doctest::Approx(0.0));
    // Every x in [-1, 1] with lambda = 0 solves the generalized equation exactly.
    for (double x : {-1.0, -0.5, 0.0, 0.7, 1.0}) CHECK(residual(p, v1(x), v1(0.0)).max() == 0.0);
  }
}

TEST_CASE("generalized equation residual: examples") {
  const auto p = constrained_example(1.0, 0.0);
  const auto r0 = residual(p, v1(1.0), v1(0.5));
  CHECK(r0.r_v == 0.0);
  CHECK(r0.r_y == 0.0);
  const auto r1 = residual(p, v1(1.0 + 1e-3), v1(0.5));
  CHECK(r1.r_v == doctest::Approx(std::abs(1.0 - 2 * (1.0 + 1e-3) * 0.5)));
  CHECK(r1.r_v > 0);
  const auto r2 = residual(p, v1(1.0), v1(-0.5));
  CHECK(std::isinf(r2.r_y));
  CHECK(r2.no_multiplier_match);
}

TEST_CASE("qualification conditions: examples") {
  const FunctionExpr h = indicator(lib::nonpositive_set());
  const SmoothMap g1({lib::poly1_raw({-1, 0, 1})});
  const SmoothMap g0({lib::poly1_raw({0, 0, 1})});
  CHECK(check_qualifications(zero_function(1), h, g1, v1(1), v1(0)).bcq);
  CHECK_FALSE(check_qualifications(zero_function(1), h, g0, v1(0), v1(0)).bcq);
  CHECK_FALSE(check_qualifications(zero_function(1), h, g0, v1(0), v1(0)).licq_analogue);
  // Smooth finite h: horizon subdifferential {0}.
  CHECK(check_qualifications(lib::abs_value(), lib::square(), g0, v1(0), v1(0)).bcq);
  // Nondegeneracy with K = {0} and M = R.
  const ManifoldSpec k = ManifoldSpec::affine(Mat::Identity(1, 1), v1(0));
  const ManifoldSpec m = ManifoldSpec::whole(1);
  const QualFlags q1 = check_qualifications(zero_function(1), h, g1, v1(1), v1(0), k, m);
  REQUIRE(q1.nondegeneracy);
  CHECK(*q1.nondegeneracy);
  const QualFlags q0 = check_qualifications(zero_function(1), h, g0, v1(0), v1(0), k, m);
  CHECK_FALSE(*q0.nondegeneracy);
  CHECK_FALSE(check_qualifications(zero_function(1), h, g1, v1(1), v1(0)).nondegeneracy.has_value());
}

TEST_CASE("licq analogue implies a unique multiplier across restarts") {
  std::mt19937_64 rng(9);
  for (double v : {0.7, -1.3, 2.0}) {
    const auto p = constrained_example(v, 0.2);
    const auto ref = solve_composite_critical(p, v1(v > 0 ? 0.5 : -0.5), v1(0.3));
    REQUIRE(ref.status == SolveStatus::Converged);
    REQUIRE(ref.qual_flags);
    REQUIRE(ref.qual_flags->licq_analogue);
    CHECK(ref.multiplier_unique);
    for (int k = 0; k < 20; ++k) {
      const Vec x0 = ref.x + random_vec(rng, 1, -0.05, 0.05);
      const Vec l0 = ref.lambda + random_vec(rng, 1, -0.05, 0.05);
      const auto other = solve_composite_critical(p, x0, l0);
      REQUIRE(other.status == SolveStatus::Converged);
      CHECK((other.lambda - ref.lambda).norm() <= 1e-6);
    }
  }
}

TEST_CASE("convex composite pairs are critical points of the sum") {
  // f = x^2, h = |.|, G(x) = 2x - 1; both convex and regular.
  std::mt19937_64 rng(21);
  const SmoothMap g({lib::poly1_raw({-1, 2})});
  for (int k = 0; k < 20; ++k) {
    const double v = std::uniform_real_distribution<double>(-4, 4)(rng);
    const double y = std::uniform_real_distribution<double>(-1, 1)(rng);
    const CompositeProblem p{lib::square(), norm_l1(1), g, v1(v), v1(y)};
    const auto pair = solve_composite_critical(p, v1(0), v1(0));
    REQUIRE(pair.status == SolveStatus::Converged);
    const FunctionExpr total = sum({lib::square(), shift(norm_l1(1), g, v1(y))});
    const auto e = enumerate_critical_points(total, v1(v), {}, false);
    REQUIRE(e.points.size() == 1);
    CHECK(pair.x(0) == doctest::Approx(e.points[0].x(0)).epsilon(1e-8));
  }
}
