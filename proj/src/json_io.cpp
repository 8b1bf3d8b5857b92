#include "tiltlab/json_io.hpp"

#include <algorithm>

namespace tiltlab {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

namespace {

[[noreturn]] void schema(const std::string& path, const std::string& what) {
  fail(ErrorKind::Schema, (path.empty() ? std::string("/") : path) + ": " + what);
}

const Json& field(const Json& doc, const char* key, const std::string& path) {
  if (!doc.is_object() || !doc.contains(key)) schema(path + "/" + key, "missing required field");
  return doc.at(key);
}

}  // namespace

void reject_unknown_keys(const Json& doc, std::initializer_list<const char*> allowed, const std::string& path) {
  if (!doc.is_object()) schema(path, "expected an object");
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const bool ok = std::any_of(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; });
    if (!ok) schema(path + "/" + it.key(), "unknown key \"" + it.key() + "\"");
  }
}

Vec vec_from_json(const Json& doc, const std::string& path) {
  if (!doc.is_array()) schema(path, "expected an array of numbers");
  Vec v(static_cast<Eigen::Index>(doc.size()));
  for (std::size_t i = 0; i < doc.size(); ++i) {
    if (!doc[i].is_number()) schema(path + "/" + std::to_string(i), "expected a number");
    v(static_cast<Eigen::Index>(i)) = doc[i].get<double>();
  }
  if (!v.allFinite()) schema(path, "non-finite entry");
  return v;
}

Json vec_to_json(const Vec& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Mat mat_from_json(const Json& doc, const std::string& path) {
  if (!doc.is_array()) schema(path, "expected an array of rows");
  if (doc.empty()) return Mat(0, 0);
  const Vec first = vec_from_json(doc[0], path + "/0");
  Mat m(static_cast<Eigen::Index>(doc.size()), first.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const Vec r = vec_from_json(doc[i], path + "/" + std::to_string(i));
    if (r.size() != first.size()) schema(path + "/" + std::to_string(i), "ragged matrix row");
    m.row(static_cast<Eigen::Index>(i)) = r.transpose();
  }
  return m;
}

Json mat_to_json(const Mat& m) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(vec_to_json(m.row(i).transpose()));
  return out;
}

Polynomial polynomial_from_json(const Json& doc, const std::string& path) {
  reject_unknown_keys(doc, {"kind", "dim", "terms"}, path);
  const Json& dim = field(doc, "dim", path);
  if (!dim.is_number_integer() || dim.get<int>() < 1 || dim.get<int>() > kMaxDim) {
    schema(path + "/dim", "dimension must be an integer in [1, 8]");
  }
  const int n = dim.get<int>();
  std::map<Polynomial::Exponents, double> terms;
  const Json& ts = field(doc, "terms", path);
  if (!ts.is_array()) schema(path + "/terms", "expected an array");
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const std::string tp = path + "/terms/" + std::to_string(i);
    reject_unknown_keys(ts[i], {"exponents", "coeff"}, tp);
    const Json& ex = field(ts[i], "exponents", tp);
    if (!ex.is_array() || static_cast<int>(ex.size()) != n) schema(tp + "/exponents", "expected dim integers");
    Polynomial::Exponents e;
    for (const auto& k : ex) {
      if (!k.is_number_integer() || k.get<int>() < 0) schema(tp + "/exponents", "exponents must be nonnegative integers");
      e.push_back(k.get<int>());
    }
    const Json& c = field(ts[i], "coeff", tp);
    if (!c.is_number()) schema(tp + "/coeff", "expected a number");
    terms[e] += c.get<double>();
  }
  return Polynomial(n, terms);
}

Json polynomial_to_json(const Polynomial& p) {
  Json terms = Json::array();
  for (const auto& [e, c] : p.terms()) terms.push_back({{"exponents", e}, {"coeff", c}});
  return {{"kind", "polynomial"}, {"dim", p.nvars()}, {"terms", terms}};
}

SmoothMap smooth_map_from_json(const Json& doc, const std::string& path) {
  if (!doc.is_array() || doc.empty()) schema(path, "expected a nonempty array of polynomials");
  std::vector<Polynomial> comps;
  for (std::size_t i = 0; i < doc.size(); ++i) comps.push_back(polynomial_from_json(doc[i], path + "/" + std::to_string(i)));
  for (std::size_t i = 1; i < comps.size(); ++i) {
    if (comps[i].nvars() != comps[0].nvars()) schema(path + "/" + std::to_string(i), "component dimension mismatch");
  }
  return SmoothMap(comps);
}

Json smooth_map_to_json(const SmoothMap& g) {
  Json out = Json::array();
  for (const auto& c : g.components()) out.push_back(polynomial_to_json(c));
  return out;
}

Polyhedron polyhedron_from_json(const Json& doc, const std::string& path) {
  reject_unknown_keys(doc, {"kind", "A", "b", "dim"}, path);
  Mat a = mat_from_json(field(doc, "A", path), path + "/A");
  const Vec b = vec_from_json(field(doc, "b", path), path + "/b");
  if (a.rows() == 0) {
    const Json& dim = field(doc, "dim", path);
    if (!dim.is_number_integer()) schema(path + "/dim", "expected an integer");
    a = Mat(0, dim.get<int>());
  }
  if (a.rows() != b.size()) schema(path + "/b", "length must equal the row count of A");
  try {
    return Polyhedron(a, b);
  } catch (const Error& e) {
    schema(path, e.what());
  }
}

Json polyhedron_to_json(const Polyhedron& p) {
  return {{"A", mat_to_json(p.a())}, {"b", vec_to_json(p.b())}, {"dim", p.dim()}};
}

FunctionExpr function_from_json(const Json& doc, const std::string& path) {
  const Json& kind_j = field(doc, "kind", path);
  if (!kind_j.is_string()) schema(path + "/kind", "expected a string");
  const std::string kind = kind_j.get<std::string>();
  auto dim_of = [&]() {
    const Json& d = field(doc, "dim", path);
    if (!d.is_number_integer() || d.get<int>() < 1 || d.get<int>() > kMaxDim) schema(path + "/dim", "dimension must be an integer in [1, 8]");
    return d.get<int>();
  };
  if (kind == "polynomial") return polynomial(polynomial_from_json(doc, path));
  if (kind == "max") {
    reject_unknown_keys(doc, {"kind", "pieces"}, path);
    const Json& ps = field(doc, "pieces", path);
    if (!ps.is_array() || ps.empty()) schema(path + "/pieces", "expected a nonempty array");
    std::vector<Polynomial> pieces;
    for (std::size_t i = 0; i < ps.size(); ++i) pieces.push_back(polynomial_from_json(ps[i], path + "/pieces/" + std::to_string(i)));
    return max_of(pieces);
  }
  if (kind == "norm_l1" || kind == "norm_l2" || kind == "norm_linf") {
    reject_unknown_keys(doc, {"kind", "dim"}, path);
    const int n = dim_of();
    if (kind == "norm_l1") return norm_l1(n);
    if (kind == "norm_l2") return norm_l2(n);
    return norm_linf(n);
  }
  if (kind == "indicator") {
    const Polyhedron p = polyhedron_from_json(doc, path);
    return indicator(p);
  }
  if (kind == "sum") {
    reject_unknown_keys(doc, {"kind", "terms"}, path);
    const Json& ts = field(doc, "terms", path);
    if (!ts.is_array() || ts.empty()) schema(path + "/terms", "expected a nonempty array");
    std::vector<FunctionExpr> terms;
    for (std::size_t i = 0; i < ts.size(); ++i) terms.push_back(function_from_json(ts[i], path + "/terms/" + std::to_string(i)));
    for (std::size_t i = 1; i < terms.size(); ++i) {
      if (terms[i].dim() != terms[0].dim()) schema(path + "/terms/" + std::to_string(i), "dimension mismatch");
    }
    return sum(terms);
  }
  if (kind == "tilted") {
    reject_unknown_keys(doc, {"kind", "base", "v"}, path);
    const FunctionExpr base = function_from_json(field(doc, "base", path), path + "/base");
    const Vec v = vec_from_json(field(doc, "v", path), path + "/v");
    if (v.size() != base.dim()) schema(path + "/v", "dimension mismatch");
    return tilt(base, v);
  }
  if (kind == "squared") {
    reject_unknown_keys(doc, {"kind", "inner"}, path);
    return squared(function_from_json(field(doc, "inner", path), path + "/inner"));
  }
  if (kind == "scaled") {
    reject_unknown_keys(doc, {"kind", "factor", "base"}, path);
    const Json& c = field(doc, "factor", path);
    if (!c.is_number()) schema(path + "/factor", "expected a number");
    return scaled(c.get<double>(), function_from_json(field(doc, "base", path), path + "/base"));
  }
  if (kind == "precomposed") {
    reject_unknown_keys(doc, {"kind", "outer", "map", "y"}, path);
    const FunctionExpr outer = function_from_json(field(doc, "outer", path), path + "/outer");
    const SmoothMap g = smooth_map_from_json(field(doc, "map", path), path + "/map");
    Vec y = Vec::Zero(g.m());
    if (doc.contains("y")) y = vec_from_json(doc.at("y"), path + "/y");
    if (g.m() != outer.dim()) schema(path + "/map", "map output dimension must match the outer function");
    if (y.size() != g.m()) schema(path + "/y", "dimension mismatch");
    return shift(outer, g, y);
  }
  schema(path + "/kind", "unsupported function kind \"" + kind + "\"");
}

Json function_to_json(const FunctionExpr& f) {
  return std::visit(
      overloaded{
          [](const expr::Poly& a) { return polynomial_to_json(a.p); },
          [](const expr::MaxOfSmooth& a) {
            Json ps = Json::array();
            for (const auto& p : a.pieces) ps.push_back(polynomial_to_json(p));
            return Json{{"kind", "max"}, {"pieces", ps}};
          },
          [&](const expr::NormL1&) { return Json{{"kind", "norm_l1"}, {"dim", f.dim()}}; },
          [&](const expr::NormL2&) { return Json{{"kind", "norm_l2"}, {"dim", f.dim()}}; },
          [&](const expr::NormLinf&) { return Json{{"kind", "norm_linf"}, {"dim", f.dim()}}; },
          [](const expr::Indicator& a) {
            Json j = polyhedron_to_json(a.set);
            j["kind"] = "indicator";
            return j;
          },
          [](const expr::Sum& a) {
            Json ts = Json::array();
            for (const auto& t : a.terms) ts.push_back(function_to_json(t));
            return Json{{"kind", "sum"}, {"terms", ts}};
          },
          [](const expr::Tilted& a) {
            return Json{{"kind", "tilted"}, {"base", function_to_json(a.base)}, {"v", vec_to_json(a.v)}};
          },
          [](const expr::Squared& a) { return Json{{"kind", "squared"}, {"inner", function_to_json(a.inner)}}; },
          [](const expr::Precomposed& a) {
            return Json{{"kind", "precomposed"},
                        {"outer", function_to_json(a.outer)},
                        {"map", smooth_map_to_json(a.map)},
                        {"y", vec_to_json(a.shift)}};
          },
          [](const expr::Scaled& a) {
            return Json{{"kind", "scaled"}, {"factor", a.factor}, {"base", function_to_json(a.base)}};
          },
      },
      f.node().v);
}

}  // namespace tiltlab
