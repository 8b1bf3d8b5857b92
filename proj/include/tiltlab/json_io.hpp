#pragma once

#include <json.hpp>

#include "tiltlab/expr.hpp"

namespace tiltlab {

using Json = nlohmann::json;

/// Parse a function expression document. Unknown kinds and unknown keys are
/// rejected with a Schema error naming the JSON-pointer path.
FunctionExpr function_from_json(const Json& doc, const std::string& path = "");
Json function_to_json(const FunctionExpr& f);

Polynomial polynomial_from_json(const Json& doc, const std::string& path = "");
Json polynomial_to_json(const Polynomial& p);

SmoothMap smooth_map_from_json(const Json& doc, const std::string& path = "");
Json smooth_map_to_json(const SmoothMap& g);

Polyhedron polyhedron_from_json(const Json& doc, const std::string& path = "");
Json polyhedron_to_json(const Polyhedron& p);

Vec vec_from_json(const Json& doc, const std::string& path = "");
Json vec_to_json(const Vec& v);
Mat mat_from_json(const Json& doc, const std::string& path = "");
Json mat_to_json(const Mat& m);

/// Throws Schema naming the first key of `doc` not in `allowed`.
void reject_unknown_keys(const Json& doc, std::initializer_list<const char*> allowed, const std::string& path);

}  // namespace tiltlab
