#include <cmath>
#include <random>

#include "test_support.hpp"
#include "tiltlab/duality.hpp"
#include "tiltlab/library.hpp"
#include "tiltlab/subdiff.hpp"

using namespace tiltlab;
using namespace tiltlab::testing;

namespace {

const Mat kOne = Mat::Identity(1, 1);

FunctionExpr half_square() { return polynomial(Polynomial::quadratic(kOne, v1(0), 0.0)); }

double value(const FunctionExpr& f, const Vec& x) {
  const ExtReal e = evaluate(f, x);
  return e.is_infinite() ? INFINITY : e.value();
}

// Brute-force conjugate on a fine grid of [-r, r]^n (n <= 2), used as an
// independent oracle for the closed forms.
double grid_conjugate(const FunctionExpr& f, const Vec& u, double r, int steps) {
  const int n = f.dim();
  double best = -INFINITY;
  const int total = n == 1 ? steps + 1 : (steps + 1) * (steps + 1);
  for (int k = 0; k < total; ++k) {
    Vec x(n);
    x(0) = -r + 2 * r * (k % (steps + 1)) / steps;
    if (n == 2) x(1) = -r + 2 * r * (k / (steps + 1)) / steps;
    const double fx = value(f, x);
    if (std::isfinite(fx)) best = std::max(best, u.dot(x) - fx);
  }
  return best;
}

struct Named {
  const char* name;
  FunctionExpr f;
};

std::vector<Named> convex_library() {
  const Mat q = (Mat(2, 2) << 2.0, 0.5, 0.5, 1.0).finished();
  return {
      {"abs", lib::abs_value()},
      {"square", lib::square()},
      {"half_square", half_square()},
      {"halfline", lib::halfline()},
      {"orthant2", lib::orthant(2)},
      {"l1_2", norm_l1(2)},
      {"linf_2", norm_linf(2)},
      {"l2_1", norm_l2(1)},
      {"quadratic_2", polynomial(Polynomial::quadratic(q, v2(1, -1), 0.5))},
      {"l1_squared", squared(norm_l1(2))},
      {"tilted_abs", tilt(lib::abs_value(), v1(0.3))},
      {"scaled_linf", scaled(2.0, norm_linf(2))},
      {"box", indicator(Polyhedron::box(v2(-1, 0), v2(1, 2)))},
      {"max_affine", max_of({Polynomial::affine(v1(1), 0), Polynomial::affine(v1(-2), 1),
                             Polynomial::constant(1, 0.5)})},
  };
}

}  // namespace

TEST_CASE("conjugate closed forms") {
  SUBCASE("|x| gives the indicator of [-1, 1]") {
    const auto c = conjugate(lib::abs_value());
    for (double u : {-1.0, -0.5, 0.0, 0.7, 1.0}) CHECK(value(c, v1(u)) == doctest::Approx(0.0));
    for (double u : {-1.01, 1.01, 3.0}) CHECK(std::isinf(value(c, v1(u))));
  }
  SUBCASE("half square is self-conjugate") {
    const auto c = conjugate(half_square());
    for (double u : {-2.0, -0.3, 0.0, 1.5}) CHECK(value(c, v1(u)) == doctest::Approx(0.5 * u * u));
  }
  SUBCASE("indicator of [0, inf) gives the indicator of (-inf, 0]") {
    const auto c = conjugate(lib::halfline());
    for (double u : {-5.0, -1.0, 0.0}) CHECK(value(c, v1(u)) == doctest::Approx(0.0));
    for (double u : {1e-3, 2.0}) CHECK(std::isinf(value(c, v1(u))));
  }
  SUBCASE("rejections") {
    CHECK_THROWS_AS(conjugate(lib::neg_square()), Error);
    CHECK_THROWS_AS(conjugate(lib::quartic()), Error);
    CHECK_THROWS_AS(conjugate(norm_l2(2)), Error);
    // Huber-type conjugate, outside the expression class.
    CHECK_THROWS_AS(conjugate(sum({lib::abs_value(), lib::square()})), Error);
  }
}

TEST_CASE("closed-form conjugates match a brute-force supremum") {
  std::mt19937_64 rng(5);
  for (const auto& [name, f] : convex_library()) {
    CAPTURE(std::string(name));
    const auto c = conjugate(f);
    const int n = f.dim();
    for (int k = 0; k < 10; ++k) {
      // Slopes inside [-0.9, 0.9]^n keep every supremum attained well inside the grid
      // for the finite-domain cases; infinite values are checked by growth.
      const Vec u = random_vec(rng, n, -0.9, 0.9);
      const double closed = value(c, u);
      const double brute = grid_conjugate(f, u, 8.0, n == 1 ? 4000 : 320);
      CAPTURE(u.transpose());
      if (std::isinf(closed)) {
        CHECK(grid_conjugate(f, u, 16.0, n == 1 ? 4000 : 320) > brute + 1.0);
      } else {
        CHECK(closed == doctest::Approx(brute).epsilon(2e-3).scale(1.0));
        CHECK(brute <= closed + 1e-9);
      }
    }
  }
}

TEST_CASE("biconjugation recovers the function on a grid") {
  for (const auto& [name, f] : convex_library()) {
    CAPTURE(std::string(name));
    const auto cc = conjugate(conjugate(f));
    const int n = f.dim();
    const int steps = n == 1 ? 40 : 12;
    for (int i = 0; i <= steps; ++i) {
      for (int j = 0; j <= (n == 2 ? steps : 0); ++j) {
        Vec x(n);
        x(0) = -2.0 + 4.0 * i / steps;
        if (n == 2) x(1) = -2.0 + 4.0 * j / steps;
        CAPTURE(x.transpose());
        const double a = value(f, x);
        const double b = value(cc, x);
        if (std::isinf(a)) {
          CHECK(std::isinf(b));
        } else {
          CHECK(b == doctest::Approx(a).epsilon(1e-8).scale(1.0));
        }
      }
    }
  }
}

TEST_CASE("Fenchel-Young inequality with equality exactly on the subdifferential graph") {
  std::mt19937_64 rng(11);
  for (const auto& [name, f] : convex_library()) {
    CAPTURE(std::string(name));
    const auto cp = conjugate_pair(f);
    const int n = f.dim();
    const auto dom = polyhedral_domain(f);
    for (int k = 0; k < 40; ++k) {
      Vec x = random_vec(rng, n, -2, 2);
      if (k % 3 == 0) x(0) = 0.0;
      if (dom) x = dom->project(x);
      const Vec u = random_vec(rng, n, -3, 3);
      const double gap = fenchel_young_gap(cp, x, u);
      CHECK(gap >= -1e-9);
      const SubgradientSet s = limiting_subdiff(f, x);
      if (s.empty()) continue;
      const Vec g = s.nearest(u);
      CHECK(std::abs(fenchel_young_gap(cp, x, g)) <= 1e-8);
      if (std::isfinite(gap) && s.distance(u) > 1e-3) CHECK(gap > 1e-9);
    }
  }
}

TEST_CASE("inverse subdifferential check") {
  CHECK(inverse_subdiff_check(lib::abs_value()));
  CHECK(inverse_subdiff_check(half_square()));
  CHECK(inverse_subdiff_check(lib::halfline()));
  for (const auto& [name, f] : convex_library()) {
    CAPTURE(std::string(name));
    CHECK(inverse_subdiff_check(f, 100, 3));
  }
  // The three hand-worked pairs.
  CHECK(limiting_subdiff(conjugate(lib::abs_value()), v1(1)).contains(v1(2)));
  CHECK(limiting_subdiff(conjugate(half_square()), v1(0.4)).contains(v1(0.4)));
  CHECK(limiting_subdiff(conjugate(lib::halfline()), v1(-3)).contains(v1(0)));
  CHECK_FALSE(limiting_subdiff(conjugate(lib::halfline()), v1(-3)).contains(v1(0.5)));
}

TEST_CASE("solve_primal_dual examples") {
  const auto f = half_square();
  const auto h = lib::abs_value();
  SUBCASE("v = 0") {
    const auto c = solve_primal_dual(f, h, kOne, v1(0), v1(0));
    CHECK(c.x(0) == doctest::Approx(0.0).scale(1.0));
    CHECK(c.u(0) == doctest::Approx(0.0).scale(1.0));
    CHECK(c.primal_value.value() == doctest::Approx(0.0).scale(1.0));
    CHECK(c.dual_value.value() == doctest::Approx(0.0).scale(1.0));
    CHECK(std::abs(c.gap) <= 1e-8);
    CHECK(c.feasibility.y_interior);
    CHECK(c.feasibility.v_interior);
  }
  SUBCASE("v = 0.5") {
    const auto c = solve_primal_dual(f, h, kOne, v1(0.5), v1(0));
    CHECK(c.x(0) == doctest::Approx(0.0).scale(1.0));
    CHECK(c.u(0) == doctest::Approx(0.5));
    CHECK(c.primal_value.value() == doctest::Approx(0.0).scale(1.0));
    CHECK(c.dual_value.value() == doctest::Approx(0.0).scale(1.0));
    CHECK(std::abs(c.gap) <= 1e-8);
  }
  SUBCASE("weak duality on sampled points") {
    const PrimalDualProblem p{f, h, kOne, v1(0.5), v1(0)};
    std::mt19937_64 rng(2);
    for (int k = 0; k < 200; ++k) {
      const Vec x = random_vec(rng, 1, -3, 3);
      const Vec u = random_vec(rng, 1, -1, 1);
      CHECK(primal_objective(p, x).value() >= dual_objective(p, u).value() - 1e-12);
    }
  }
  SUBCASE("infeasible and unbounded problems") {
    // h = indicator of [0, inf) at Ax + y with dom f = (-inf, -1]: empty intersection.
    const auto f_neg = indicator(Polyhedron::box(v1(-1e3), v1(-1)));
    CHECK_THROWS_AS(solve_primal_dual(f_neg, lib::halfline(), kOne, v1(0), v1(0)), Error);
    // inf of -x over [0, inf) is -inf.
    CHECK_THROWS_AS(solve_primal_dual(lib::halfline(), zero_function(1), kOne, v1(1), v1(0)), Error);
  }
}

TEST_CASE("strong duality and certificate complementarity at interior parameters") {
  struct Inst {
    FunctionExpr f, h;
    Mat a;
  };
  const Mat a2 = (Mat(2, 2) << 1.0, 0.5, -0.3, 1.0).finished();
  const std::vector<Inst> insts = {
      {half_square(), lib::abs_value(), kOne},
      {lib::square(), scaled(0.5, lib::square()), kOne},
      {lib::abs_value(), scaled(0.5, lib::square()), kOne},
      {lib::abs_value(), lib::square(), 2.0 * kOne},
      {polynomial(Polynomial::quadratic(Mat::Identity(2, 2), v2(0, 0), 0)), norm_l1(2), a2},
      {scaled(0.5, squared(norm_l1(2))), lib::orthant(2),
       a2},
  };
  std::mt19937_64 rng(17);
  int interior_cases = 0;
  for (std::size_t i = 0; i < insts.size(); ++i) {
    CAPTURE(i);
    const auto& in = insts[i];
    for (int k = 0; k < 15; ++k) {
      const PrimalDualProblem p{in.f, in.h, in.a, random_vec(rng, in.f.dim(), -1.5, 1.5),
                                random_vec(rng, in.h.dim(), -1, 1)};
      CAPTURE(p.v.transpose());
      CAPTURE(p.y.transpose());
      DualityCertificate c;
      try {
        c = solve_primal_dual(p);
      } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Unbounded);
        continue;
      }
      CHECK(c.gap >= -1e-9);
      if (c.feasibility.y_interior && c.feasibility.v_interior) {
        ++interior_cases;
        CHECK(c.gap <= 1e-8);
      }
      CHECK(limiting_subdiff(p.h, p.a * c.x + p.y).distance(c.u) <= 1e-7);
      CHECK(limiting_subdiff(p.f, c.x).distance(p.v - p.a.transpose() * c.u) <= 1e-7);
    }
  }
  CHECK(interior_cases >= 40);
}

TEST_CASE("feasibility flags") {
  // dom h = [0, inf), dom f = R: Y = R, interior everywhere.
  const PrimalDualProblem p1{half_square(), lib::halfline(), kOne, v1(0), v1(0)};
  CHECK(feasibility_flags(p1).y_interior);
  // dom f = {0}, dom h = [0, inf): Y = [0, inf), and y = 0 is on the boundary.
  const auto point = indicator(Polyhedron::box(v1(0), v1(0)));
  const PrimalDualProblem p2{point, lib::halfline(), kOne, v1(0), v1(0)};
  CHECK_FALSE(feasibility_flags(p2).y_interior);
  CHECK(feasibility_flags(PrimalDualProblem{point, lib::halfline(), kOne, v1(0), v1(0.5)}).y_interior);
  // f = |x|, h = 0: V = [-1, 1]; v = 1 is on the boundary.
  const PrimalDualProblem p3{lib::abs_value(), zero_function(1), kOne, v1(1), v1(0)};
  CHECK_FALSE(feasibility_flags(p3).v_interior);
  CHECK(feasibility_flags(PrimalDualProblem{lib::abs_value(), zero_function(1), kOne, v1(0.9), v1(0)}).v_interior);
}

TEST_CASE("smooth dependence probe") {
  const auto hq = half_square();
  SUBCASE("quadratic data: solutions linear in (v, y)") {
    // x = (v - y) / 2, u = (v + y) / 2
    const auto r = smooth_dependence_probe(PrimalDualProblem{hq, hq, kOne, v1(0.3), v1(-0.2)});
    CAPTURE(r.diagnostic);
    CHECK(r.smooth);
    CHECK(r.lipschitz_estimate == doctest::Approx(std::sqrt(0.5)).epsilon(1e-4));
  }
  SUBCASE("|x| at v = 0.5 is locally constant in x") {
    const auto r = smooth_dependence_probe(PrimalDualProblem{lib::abs_value(), hq, kOne, v1(0.5), v1(0)});
    CAPTURE(r.diagnostic);
    CHECK(r.smooth);
  }
  SUBCASE("|x| at the boundary tilt v = 1 is flagged") {
    const auto r = smooth_dependence_probe(PrimalDualProblem{lib::abs_value(), hq, kOne, v1(1), v1(0)});
    CHECK_FALSE(r.smooth);
    CHECK_FALSE(r.diagnostic.empty());
  }
  SUBCASE("non-unique base solution throws") {
    // f = 0 on [-1, 1], h = 0: every x in [-1, 1] is optimal at v = 0.
    const auto f = indicator(Polyhedron::box(v1(-1), v1(1)));
    CHECK_THROWS_AS(smooth_dependence_probe(PrimalDualProblem{f, zero_function(1), kOne, v1(0), v1(0)}), Error);
  }
}
