#include "tiltlab/library.hpp"

#include <functional>
#include <map>

namespace tiltlab::lib {

Polynomial poly1_raw(std::vector<double> coeffs) { return Polynomial::from_poly1(Poly1(std::move(coeffs))); }

FunctionExpr poly1(std::vector<double> coeffs) { return polynomial(poly1_raw(std::move(coeffs))); }

FunctionExpr abs_value() { return norm_l1(1); }
FunctionExpr neg_abs() { return scaled(-1.0, norm_l1(1)); }
FunctionExpr square() { return poly1({0, 0, 1}); }
FunctionExpr neg_square() { return poly1({0, 0, -1}); }
FunctionExpr quartic() { return poly1({0, 0, 0, 0, 1}); }
FunctionExpr double_well() { return poly1({1, 0, -2, 0, 1}); }
FunctionExpr l1_squared(int n) { return squared(norm_l1(n)); }

Polyhedron halfline_set() { return Polyhedron(Mat::Constant(1, 1, -1.0), Vec::Zero(1)); }
Polyhedron nonpositive_set() { return Polyhedron(Mat::Constant(1, 1, 1.0), Vec::Zero(1)); }
Polyhedron orthant_set(int n) { return Polyhedron(-Mat::Identity(n, n), Vec::Zero(n)); }

FunctionExpr halfline() { return indicator(halfline_set()); }
FunctionExpr orthant(int n) { return indicator(orthant_set(n)); }

namespace {

const std::map<std::string, std::function<FunctionExpr()>>& table() {
  static const std::map<std::string, std::function<FunctionExpr()>> t = {
      {"abs", abs_value},
      {"neg_abs", neg_abs},
      {"square", square},
      {"neg_square", neg_square},
      {"quartic", quartic},
      {"double_well", double_well},
      {"l1_squared_2d", [] { return l1_squared(2); }},
      {"halfline", halfline},
      {"abs_plus_halfline", [] { return sum({abs_value(), halfline()}); }},
  };
  return t;
}

}  // namespace

FunctionExpr by_name(const std::string& name) {
  const auto& t = table();
  auto it = t.find(name);
  if (it == t.end()) fail(ErrorKind::Schema, "unknown library function \"" + name + "\"");
  return it->second();
}

std::vector<std::string> names() {
  std::vector<std::string> out;
  for (const auto& [k, v] : table()) out.push_back(k);
  return out;
}

}  // namespace tiltlab::lib
