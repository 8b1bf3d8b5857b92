#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tiltlab/library.hpp"
#include "tiltlab/reporting.hpp"

namespace tiltlab {

namespace {

[[noreturn]] void schema(const std::string& path, const std::string& what) { fail(ErrorKind::Schema, path + ": " + what); }

const Json* find(const Json& doc, const char* key) {
  const auto it = doc.find(key);
  return it == doc.end() ? nullptr : &*it;
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot read " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    // The library message carries "line L, column C".
    fail(ErrorKind::Parse, path.string() + ": " + e.what());
  }
}

// Inline expression, library name, or {"file": path}.
Json resolve_function(const Json& doc, const std::string& path, const std::filesystem::path& base) {
  if (doc.is_string()) return function_to_json(lib::by_name(doc.get<std::string>()));
  if (doc.is_object() && doc.size() == 1 && doc.contains("file")) {
    if (!doc["file"].is_string()) schema(path + "/file", "expected a string");
    std::filesystem::path p = doc["file"].get<std::string>();
    if (p.is_relative()) p = base / p;
    return function_to_json(function_from_json(read_json_file(p), ""));
  }
  return function_to_json(function_from_json(doc, path));
}

double number(const Json& doc, const std::string& path) {
  if (!doc.is_number()) schema(path, "expected a number");
  const double x = doc.get<double>();
  if (!std::isfinite(x)) schema(path, "expected a finite number");
  return x;
}

double positive(const Json& doc, const std::string& path) {
  const double x = number(doc, path);
  if (x <= 0.0) schema(path, "must be positive");
  return x;
}

int integer_at_least(const Json& doc, int lo, const std::string& path) {
  if (!doc.is_number_integer()) schema(path, "expected an integer");
  const auto x = doc.get<std::int64_t>();
  if (x < lo) schema(path, "must be at least " + std::to_string(lo));
  if (x > 10'000'000) schema(path, "too large");
  return static_cast<int>(x);
}

Vec vec_of_dim(const Json& doc, int n, const std::string& path) {
  const Vec v = vec_from_json(doc, path);
  if (v.size() != n) schema(path, "expected " + std::to_string(n) + " entries");
  return v;
}

const Json& required(const Json& doc, const char* key, const std::string& path) {
  const Json* j = find(doc, key);
  if (!j) schema(path + "/" + key, "missing required field");
  return *j;
}

void parse_sampling(const Json& s, ExperimentConfig& c, int n, std::optional<int> m) {
  const std::string path = "/sampling";
  reject_unknown_keys(s, {"box", "count", "grid_nodes", "master_seed", "exclude_v_radius"}, path);
  const Json& box = required(s, "box", path);
  reject_unknown_keys(box, {"v_lo", "v_hi", "y_lo", "y_hi"}, path + "/box");
  c.sampling.v_lo = vec_of_dim(required(box, "v_lo", path + "/box"), n, path + "/box/v_lo");
  c.sampling.v_hi = vec_of_dim(required(box, "v_hi", path + "/box"), n, path + "/box/v_hi");
  if ((c.sampling.v_hi - c.sampling.v_lo).minCoeff() < 0.0) schema(path + "/box/v_hi", "below v_lo");
  if (m) {
    const Vec lo = vec_of_dim(required(box, "y_lo", path + "/box"), *m, path + "/box/y_lo");
    const Vec hi = vec_of_dim(required(box, "y_hi", path + "/box"), *m, path + "/box/y_hi");
    if ((hi - lo).minCoeff() < 0.0) schema(path + "/box/y_hi", "below y_lo");
    c.sampling.y_lo = lo;
    c.sampling.y_hi = hi;
  } else if (box.contains("y_lo") || box.contains("y_hi")) {
    schema(path + "/box/" + std::string(box.contains("y_lo") ? "y_lo" : "y_hi"), "only used by composite and duality modes");
  }
  const Json* count = find(s, "count");
  const Json* nodes = find(s, "grid_nodes");
  if (count && nodes) schema(path + "/grid_nodes", "count and grid_nodes are mutually exclusive");
  if (c.mode == Mode::Atlas && !nodes) schema(path + "/grid_nodes", "atlas mode requires grid_nodes");
  if (nodes) {
    c.sampling.grid = true;
    c.sampling.count = integer_at_least(*nodes, 2, path + "/grid_nodes");
  } else {
    c.sampling.grid = false;
    c.sampling.count = count ? integer_at_least(*count, 0, path + "/count") : 100;
  }
  if (const Json* seed = find(s, "master_seed")) {
    if (!seed->is_number_unsigned() && !(seed->is_number_integer() && seed->get<std::int64_t>() >= 0)) {
      schema(path + "/master_seed", "expected a nonnegative integer");
    }
    c.master_seed = seed->get<std::uint64_t>();
  }
  if (const Json* r = find(s, "exclude_v_radius")) {
    c.sampling.exclude_v_radius = number(*r, path + "/exclude_v_radius");
    if (c.sampling.exclude_v_radius < 0.0) schema(path + "/exclude_v_radius", "must be nonnegative");
  }
}

}  // namespace

const char* to_string(Mode m) {
  switch (m) {
    case Mode::TiltSweep: return "tilt_sweep";
    case Mode::CompositeSweep: return "composite_sweep";
    case Mode::Atlas: return "atlas";
    case Mode::Duality: return "duality";
    case Mode::SinglePoint: return "single_point";
  }
  return "?";
}

std::optional<Mode> mode_from_string(const std::string& s) {
  for (Mode m : {Mode::TiltSweep, Mode::CompositeSweep, Mode::Atlas, Mode::Duality, Mode::SinglePoint}) {
    if (s == to_string(m)) return m;
  }
  return std::nullopt;
}

ExperimentConfig config_from_json(const Json& doc, const std::filesystem::path& base) {
  reject_unknown_keys(doc, {"mode", "problem", "sampling", "tolerances", "options", "output"}, "");
  ExperimentConfig c;
  const Json& mode = required(doc, "mode", "");
  if (!mode.is_string() || !mode_from_string(mode.get<std::string>())) {
    schema("/mode", "expected one of tilt_sweep, composite_sweep, atlas, duality, single_point");
  }
  c.mode = *mode_from_string(mode.get<std::string>());

  const Json& prob = required(doc, "problem", "");
  const std::string pp = "/problem";
  c.problem = Json::object();
  int n = 0;
  std::optional<int> m;
  switch (c.mode) {
    case Mode::TiltSweep:
    case Mode::Atlas:
    case Mode::SinglePoint: {
      if (c.mode == Mode::SinglePoint) {
        reject_unknown_keys(prob, {"f", "v"}, pp);
      } else {
        reject_unknown_keys(prob, {"f"}, pp);
      }
      c.problem["f"] = resolve_function(required(prob, "f", pp), pp + "/f", base);
      n = function_from_json(c.problem["f"]).dim();
      if (c.mode == Mode::Atlas && n > 2) schema(pp + "/f", "atlas mode needs a function of 1 or 2 variables");
      if (c.mode == Mode::SinglePoint) c.problem["v"] = vec_to_json(vec_of_dim(required(prob, "v", pp), n, pp + "/v"));
      break;
    }
    case Mode::CompositeSweep: {
      reject_unknown_keys(prob, {"f", "h", "g", "x_starts", "lambda0"}, pp);
      c.problem["f"] = resolve_function(required(prob, "f", pp), pp + "/f", base);
      c.problem["h"] = resolve_function(required(prob, "h", pp), pp + "/h", base);
      const SmoothMap g = smooth_map_from_json(required(prob, "g", pp), pp + "/g");
      c.problem["g"] = smooth_map_to_json(g);
      n = function_from_json(c.problem["f"]).dim();
      m = function_from_json(c.problem["h"]).dim();
      if (g.n() != n) schema(pp + "/g", "map domain must match the dimension of f");
      if (g.m() != *m) schema(pp + "/g", "map range must match the dimension of h");
      Json starts = Json::array();
      if (const Json* xs = find(prob, "x_starts")) {
        if (!xs->is_array() || xs->empty()) schema(pp + "/x_starts", "expected a non-empty array of points");
        for (std::size_t i = 0; i < xs->size(); ++i) {
          starts.push_back(vec_to_json(vec_of_dim((*xs)[i], n, pp + "/x_starts/" + std::to_string(i))));
        }
      } else {
        starts.push_back(vec_to_json(Vec::Zero(n)));
      }
      c.problem["x_starts"] = starts;
      c.problem["lambda0"] =
          vec_to_json(find(prob, "lambda0") ? vec_of_dim(prob["lambda0"], *m, pp + "/lambda0") : Vec::Zero(*m));
      break;
    }
    case Mode::Duality: {
      reject_unknown_keys(prob, {"f", "h", "A", "v", "y"}, pp);
      c.problem["f"] = resolve_function(required(prob, "f", pp), pp + "/f", base);
      c.problem["h"] = resolve_function(required(prob, "h", pp), pp + "/h", base);
      n = function_from_json(c.problem["f"]).dim();
      m = function_from_json(c.problem["h"]).dim();
      const Mat a = mat_from_json(required(prob, "A", pp), pp + "/A");
      if (a.rows() != *m || a.cols() != n) {
        schema(pp + "/A", "expected a " + std::to_string(*m) + " x " + std::to_string(n) + " matrix");
      }
      c.problem["A"] = mat_to_json(a);
      c.problem["v"] = vec_to_json(vec_of_dim(required(prob, "v", pp), n, pp + "/v"));
      c.problem["y"] = vec_to_json(vec_of_dim(required(prob, "y", pp), *m, pp + "/y"));
      break;
    }
  }

  if (const Json* s = find(doc, "sampling")) {
    if (c.mode == Mode::SinglePoint) schema("/sampling", "not used by single_point mode");
    c.sampling_given = true;
    parse_sampling(*s, c, n, c.mode == Mode::CompositeSweep || c.mode == Mode::Duality ? m : std::nullopt);
  } else if (c.mode == Mode::TiltSweep || c.mode == Mode::CompositeSweep || c.mode == Mode::Atlas) {
    schema("/sampling", "missing required field");
  }

  if (const Json* t = find(doc, "tolerances")) {
    reject_unknown_keys(*t, {"tol", "residual", "branch_gap"}, "/tolerances");
    if (const Json* x = find(*t, "tol")) c.tol = positive(*x, "/tolerances/tol");
    if (const Json* x = find(*t, "residual")) c.residual = positive(*x, "/tolerances/residual");
    if (const Json* x = find(*t, "branch_gap")) c.branch_gap = positive(*x, "/tolerances/branch_gap");
  }
  if (const Json* o = find(doc, "options")) {
    reject_unknown_keys(*o, {"equivalence"}, "/options");
    if (const Json* e = find(*o, "equivalence")) {
      if (!e->is_boolean()) schema("/options/equivalence", "expected a boolean");
      c.equivalence = e->get<bool>();
    }
  }
  if (const Json* o = find(doc, "output")) {
    reject_unknown_keys(*o, {"directory", "formats"}, "/output");
    if (const Json* d = find(*o, "directory")) {
      if (!d->is_string() || d->get<std::string>().empty()) schema("/output/directory", "expected a non-empty string");
      c.output_dir = d->get<std::string>();
    }
    if (const Json* f = find(*o, "formats")) {
      if (!f->is_array() || f->empty()) schema("/output/formats", "expected a non-empty array");
      c.formats.clear();
      for (std::size_t i = 0; i < f->size(); ++i) {
        const std::string p = "/output/formats/" + std::to_string(i);
        const Json& e = (*f)[i];
        if (!e.is_string() || (e != "json" && e != "csv")) schema(p, "expected \"json\" or \"csv\"");
        const Format fmt = e == "json" ? Format::Json : Format::Csv;
        if (std::find(c.formats.begin(), c.formats.end(), fmt) != c.formats.end()) schema(p, "duplicate format");
        c.formats.push_back(fmt);
      }
    }
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return config_from_json(read_json_file(path), path.parent_path());
}

Json config_to_json(const ExperimentConfig& c) {
  Json j;
  j["mode"] = to_string(c.mode);
  j["problem"] = c.problem;
  if (c.sampling_given) {
    Json box{{"v_lo", vec_to_json(c.sampling.v_lo)}, {"v_hi", vec_to_json(c.sampling.v_hi)}};
    if (c.sampling.y_lo) box["y_lo"] = vec_to_json(*c.sampling.y_lo);
    if (c.sampling.y_hi) box["y_hi"] = vec_to_json(*c.sampling.y_hi);
    Json s{{"box", box}, {"exclude_v_radius", c.sampling.exclude_v_radius}};
    s[c.sampling.grid ? "grid_nodes" : "count"] = c.sampling.count;
    j["sampling"] = s;
  }
  // The seed lives outside "sampling" so single runs still record it.
  j["master_seed"] = c.master_seed;
  j["tolerances"] = {{"tol", c.tol}, {"residual", c.residual}, {"branch_gap", c.branch_gap}};
  j["options"] = {{"equivalence", c.equivalence}};
  Json formats = Json::array();
  for (Format f : c.formats) formats.push_back(f == Format::Json ? "json" : "csv");
  j["output"] = {{"formats", formats}};
  return j;
}

std::string config_hash(const ExperimentConfig& c) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : canonical_dump(config_to_json(c))) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

}  // namespace tiltlab
