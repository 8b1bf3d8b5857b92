#pragma once

#include "tiltlab/expr.hpp"

namespace tiltlab::lib {

/// Univariate polynomial from coefficients in increasing degree.
FunctionExpr poly1(std::vector<double> coeffs);
Polynomial poly1_raw(std::vector<double> coeffs);

FunctionExpr abs_value();           // |x|
FunctionExpr neg_abs();             // -|x|
FunctionExpr square();              // x^2
FunctionExpr neg_square();          // -x^2
FunctionExpr quartic();             // x^4
FunctionExpr double_well();         // (x^2 - 1)^2
FunctionExpr l1_squared(int n);     // (|x_1| + ... + |x_n|)^2
FunctionExpr halfline();            // indicator of [0, inf)
FunctionExpr orthant(int n);        // indicator of the nonnegative orthant
Polyhedron halfline_set();
Polyhedron orthant_set(int n);
/// {x : x <= 0} in R^1, as a polyhedron.
Polyhedron nonpositive_set();

/// Named instance lookup used by the command-line tool; throws Schema on unknown names.
FunctionExpr by_name(const std::string& name);
std::vector<std::string> names();

}  // namespace tiltlab::lib
