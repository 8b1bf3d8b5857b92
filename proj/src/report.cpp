#include <cmath>
#include <cstdio>
#include <fstream>

#include "tiltlab/reporting.hpp"

namespace tiltlab {

namespace {

void dump_to(const Json& j, std::string& out) {
  switch (j.type()) {
    case Json::value_t::object: {
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ',';
        first = false;
        out += Json(it.key()).dump();
        out += ':';
        dump_to(it.value(), out);
      }
      out += '}';
      break;
    }
    case Json::value_t::array: {
      out += '[';
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ',';
        dump_to(j[i], out);
      }
      out += ']';
      break;
    }
    case Json::value_t::number_float: {
      const double x = j.get<double>();
      out += std::isfinite(x) ? fmt_num(x) : "\"" + fmt_num(x) + "\"";
      break;
    }
    default:
      out += j.dump();
  }
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

template <class T>
std::string fmt_opt(const std::optional<T>& x) {
  if (!x) return "";
  if constexpr (std::is_same_v<T, bool>) {
    return fmt_bool(*x);
  } else if constexpr (std::is_same_v<T, double>) {
    return fmt_num(*x);
  } else if constexpr (std::is_same_v<T, Vec>) {
    return fmt_vec(*x);
  } else {
    return *x;
  }
}

Json ext_json(const ExtReal& e) { return e.is_infinite() ? Json(INFINITY) : Json(e.value()); }

Json qual_json(const QualFlags& q) {
  Json j{{"bcq", q.bcq}, {"licq_analogue", q.licq_analogue}};
  j["nondegeneracy"] = q.nondegeneracy ? Json(*q.nondegeneracy) : Json();
  return j;
}

Json point_json(const PointRecord& p) {
  Json j{{"x", vec_to_json(p.x)},
         {"strict_complementarity", p.strict_complementarity},
         {"prox_regular", p.prox_regular},
         {"identified_manifold", p.identified_manifold},
         {"strongly_regular", p.strongly_regular},
         {"stable_growth", p.stable_growth},
         {"alpha", p.alpha},
         {"multiplier_unique", p.multiplier_unique},
         {"classification", p.classification}};
  j["lambda"] = p.lambda ? vec_to_json(*p.lambda) : Json();
  j["prox_r"] = p.prox_r ? Json(*p.prox_r) : Json();
  j["manifold"] = p.manifold ? Json(*p.manifold) : Json();
  j["equivalence"] = p.equivalence ? Json(p.equivalence->str()) : Json();
  j["qual"] = p.qual ? qual_json(*p.qual) : Json();
  return j;
}

Json sample_json(const PerturbationSample& s) {
  Json j{{"index", s.index}, {"seed", s.seed}, {"v", vec_to_json(s.v)}};
  j["y"] = s.y ? vec_to_json(*s.y) : Json();
  return j;
}

}  // namespace

std::string fmt_num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string fmt_vec(const Vec& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += fmt_num(v(i));
  }
  return out;
}

std::string canonical_dump(const Json& j) {
  std::string out;
  dump_to(j, out);
  return out;
}

std::vector<std::filesystem::path> emit_report(const Report& report, const std::vector<Format>& formats,
                                               const std::filesystem::path& directory) {
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + directory.string() + ": " + ec.message());
  auto write = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
    out.close();
    if (!out) fail(ErrorKind::Io, "cannot write " + p.string());
  };
  std::vector<std::filesystem::path> paths;
  for (Format f : formats) {
    if (f == Format::Json) {
      const auto p = directory / (report.name + ".json");
      write(p, canonical_dump(report.json) + "\n");
      paths.push_back(p);
    } else {
      for (const auto& t : report.tables) {
        std::string text;
        auto line = [&](const std::vector<std::string>& cells) {
          for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) text += ',';
            text += csv_field(cells[i]);
          }
          text += '\n';
        };
        line(t.header);
        for (const auto& r : t.rows) line(r);
        const auto p = directory / (t.name + ".csv");
        write(p, text);
        paths.push_back(p);
      }
    }
  }
  return paths;
}

Report genericity_report(const GenericityReport& r, const std::string& hash) {
  Report out;
  out.name = "genericity";
  Json samples = Json::array();
  Json failures = Json::array();
  CsvTable st{"samples", {"index", "seed", "v", "y", "critical_count", "non_isolated", "failed", "error"}, {}};
  CsvTable pt{"points",
              {"sample", "point", "x", "lambda", "classification", "strict_complementarity", "prox_regular", "prox_r",
               "identified_manifold", "manifold", "strongly_regular", "stable_growth", "alpha", "equivalence",
               "bcq", "multiplier_unique"},
              {}};
  for (const auto& s : r.samples) {
    Json sj = sample_json(s.sample);
    sj["critical_count"] = s.critical_count;
    sj["non_isolated"] = s.non_isolated;
    sj["failed"] = s.failed;
    sj["error"] = s.error ? Json(*s.error) : Json();
    Json pts = Json::array();
    for (std::size_t k = 0; k < s.points.size(); ++k) {
      const auto& p = s.points[k];
      pts.push_back(point_json(p));
      pt.rows.push_back({std::to_string(s.sample.index), std::to_string(k), fmt_vec(p.x), fmt_opt(p.lambda),
                         p.classification, fmt_bool(p.strict_complementarity), fmt_bool(p.prox_regular),
                         fmt_opt(p.prox_r), fmt_bool(p.identified_manifold), fmt_opt(p.manifold),
                         fmt_bool(p.strongly_regular), fmt_bool(p.stable_growth), fmt_num(p.alpha),
                         p.equivalence ? p.equivalence->str() : "", p.qual ? fmt_bool(p.qual->bcq) : "",
                         fmt_bool(p.multiplier_unique)});
    }
    sj["points"] = pts;
    samples.push_back(sj);
    st.rows.push_back({std::to_string(s.sample.index), std::to_string(s.sample.seed), fmt_vec(s.sample.v),
                       fmt_opt(s.sample.y), std::to_string(s.critical_count), fmt_bool(s.non_isolated),
                       fmt_bool(s.failed), fmt_opt(s.error)});
  }
  for (const auto& f : r.failure_set) failures.push_back(sample_json(f));
  out.json = {{"kind", "genericity"},
              {"config_hash", hash},
              {"n_max", r.n_max},
              {"failure_fraction", r.failure_fraction},
              {"sampling_mode", r.sampling_mode},
              {"untested", r.untested},
              {"failure_set", failures},
              {"samples", samples}};
  out.tables = {std::move(st), std::move(pt)};
  return out;
}

Report atlas_report(const SelectionAtlas& a, const std::string& hash) {
  Report out;
  out.name = "atlas";
  std::vector<int> region_of(a.cardinality.size(), -1);
  Json regions = Json::array();
  CsvTable bt{"atlas_branches", {"region", "node", "v", "branch", "x"}, {}};
  for (std::size_t r = 0; r < a.regions.size(); ++r) {
    const auto& reg = a.regions[r];
    Json nodes = Json::array();
    Json branches = Json::array();
    for (std::size_t k = 0; k < reg.nodes.size(); ++k) {
      const std::size_t node = reg.nodes[k];
      region_of[node] = static_cast<int>(r);
      nodes.push_back(node);
      Json b = Json::array();
      for (std::size_t j = 0; j < reg.branches[k].size(); ++j) {
        b.push_back(vec_to_json(reg.branches[k][j]));
        bt.rows.push_back({std::to_string(r), std::to_string(node), fmt_vec(a.grid.node(node)), std::to_string(j),
                           fmt_vec(reg.branches[k][j])});
      }
      branches.push_back(b);
    }
    regions.push_back({{"cardinality", reg.cardinality}, {"nodes", nodes}, {"branches", branches}});
  }
  Json nodes = Json::array();
  CsvTable nt{"atlas_nodes", {"node", "v", "cardinality", "flagged", "region"}, {}};
  for (std::size_t i = 0; i < a.cardinality.size(); ++i) {
    nodes.push_back({{"v", vec_to_json(a.grid.node(i))},
                     {"cardinality", a.cardinality[i]},
                     {"flagged", static_cast<bool>(a.flagged[i])}});
    nt.rows.push_back({std::to_string(i), fmt_vec(a.grid.node(i)), std::to_string(a.cardinality[i]),
                       fmt_bool(a.flagged[i]), region_of[i] < 0 ? "" : std::to_string(region_of[i])});
  }
  Json transitions = Json::array();
  for (const auto& t : a.transitions) transitions.push_back(vec_to_json(t));
  out.json = {{"kind", "atlas"},
              {"config_hash", hash},
              {"grid", {{"lo", vec_to_json(a.grid.lo)}, {"hi", vec_to_json(a.grid.hi)}, {"nodes", a.grid.nodes}}},
              {"n_max", a.n_max},
              {"coverage", a.coverage()},
              {"branch_gap", a.branch_gap},
              {"transitions", transitions},
              {"nodes", nodes},
              {"regions", regions}};
  out.tables = {std::move(nt), std::move(bt)};
  return out;
}

Report duality_report(const std::vector<DualityRecord>& records, const std::string& hash) {
  Report out;
  out.name = "duality";
  Json items = Json::array();
  CsvTable t{"duality",
             {"index", "v", "y", "x", "u", "primal_value", "dual_value", "gap", "y_interior", "v_interior", "smooth",
              "lipschitz_estimate", "error"},
             {}};
  for (const auto& r : records) {
    Json j = sample_json(r.sample);
    j["error"] = r.error ? Json(*r.error) : Json();
    j["certificate"] = Json();
    j["smooth_dependence"] = Json();
    std::vector<std::string> row{std::to_string(r.sample.index), fmt_vec(r.sample.v), fmt_opt(r.sample.y)};
    if (r.certificate) {
      const auto& c = *r.certificate;
      j["certificate"] = {{"x", vec_to_json(c.x)},
                          {"u", vec_to_json(c.u)},
                          {"primal_value", ext_json(c.primal_value)},
                          {"dual_value", ext_json(c.dual_value)},
                          {"gap", c.gap},
                          {"feasibility",
                           {{"y_interior", c.feasibility.y_interior}, {"v_interior", c.feasibility.v_interior}}}};
      auto ext = [](const ExtReal& e) { return e.is_infinite() ? std::string("inf") : fmt_num(e.value()); };
      row.insert(row.end(), {fmt_vec(c.x), fmt_vec(c.u), ext(c.primal_value), ext(c.dual_value), fmt_num(c.gap),
                             fmt_bool(c.feasibility.y_interior), fmt_bool(c.feasibility.v_interior)});
    } else {
      row.insert(row.end(), 7, "");
    }
    if (r.smooth) {
      j["smooth_dependence"] = {{"smooth", r.smooth->smooth},
                                {"lipschitz_estimate", r.smooth->lipschitz_estimate},
                                {"diagnostic", r.smooth->diagnostic}};
      row.insert(row.end(), {fmt_bool(r.smooth->smooth), fmt_num(r.smooth->lipschitz_estimate)});
    } else {
      row.insert(row.end(), 2, "");
    }
    row.push_back(fmt_opt(r.error));
    items.push_back(j);
    t.rows.push_back(std::move(row));
  }
  out.json = {{"kind", "duality"}, {"config_hash", hash}, {"records", items}};
  out.tables = {std::move(t)};
  return out;
}

Json run_record_to_json(const RunRecord& r) {
  Json reports = Json::array();
  for (const auto& p : r.reports) reports.push_back(p.filename().string());
  return {{"config_hash", r.config_hash},
          {"code_version", r.code_version},
          {"started", r.started},
          {"finished", r.finished},
          {"reports", reports},
          {"errors", r.errors},
          {"invariant_violations", r.invariant_violations},
          {"exit_code", r.exit_code()}};
}

}  // namespace tiltlab
