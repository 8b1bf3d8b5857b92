// tiltlab command-line driver. Exit codes: 0 success, 1 invariant violation,
// 2 configuration (or I/O) error.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "tiltlab/reporting.hpp"

using namespace tiltlab;

namespace {

constexpr int kOk = 0;
constexpr int kInvariant = 1;
constexpr int kConfig = 2;

struct Globals {
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  std::optional<int> jobs;
  std::optional<std::string> out;
};

int resolve_jobs(const Globals& g) {
  if (g.jobs) return *g.jobs;
  if (const char* env = std::getenv("TILTLAB_JOBS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || n < 0) fail(ErrorKind::Schema, "TILTLAB_JOBS must be a nonnegative integer");
    return static_cast<int>(n);
  }
  return 0;
}

int run_verb(const std::string& verb, const std::string& config_path, const Globals& g) {
  ExperimentConfig c;
  int jobs = 0;
  try {
    c = load_config(config_path);
    const bool ok = (verb == "analyze" && c.mode == Mode::SinglePoint) ||
                    (verb == "sweep" && (c.mode == Mode::TiltSweep || c.mode == Mode::CompositeSweep)) ||
                    (verb == "atlas" && c.mode == Mode::Atlas) || (verb == "duality" && c.mode == Mode::Duality);
    if (!ok) fail(ErrorKind::Schema, std::string("/mode: \"") + to_string(c.mode) + "\" cannot run under `" + verb + "`");
    if (g.seed) c.master_seed = *g.seed;
    if (g.tol) {
      if (!(*g.tol > 0.0)) fail(ErrorKind::Schema, "--tol must be positive");
      c.tol = *g.tol;
    }
    if (g.out) c.output_dir = *g.out;
    jobs = resolve_jobs(g);
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  }

  RunRecord rec;
  try {
    rec = run_experiment(c, RunOptions{jobs});
  } catch (const Error& e) {
    std::cerr << (e.kind() == ErrorKind::Io ? "i/o error: " : "error: ") << e.what() << "\n";
    return e.kind() == ErrorKind::Io ? kConfig : kInvariant;
  }
  std::cout << "config " << rec.config_hash << "\n";
  for (const auto& p : rec.reports) std::cout << "wrote " << p.string() << "\n";
  std::cout << "sample errors: " << rec.errors.size() << "\n";
  for (const auto& v : rec.invariant_violations) std::cerr << "invariant violation: " << v << "\n";
  std::cout << "invariant violations: " << rec.invariant_violations.size() << "\n";
  return rec.exit_code() == 0 ? kOk : kInvariant;
}

int summarize(const std::filesystem::path& dir) {
  auto load = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) fail(ErrorKind::Io, "cannot read " + p.string());
    try {
      return Json::parse(in);
    } catch (const Json::parse_error& e) {
      fail(ErrorKind::Parse, p.string() + ": " + e.what());
    }
  };
  try {
    const Json run = load(dir / "run.json");
    std::cout << "config " << run.at("config_hash").get<std::string>() << "  version "
              << run.at("code_version").get<std::string>() << "\n";
    std::cout << "started " << run.at("started").get<std::string>() << "  finished "
              << run.at("finished").get<std::string>() << "\n";
    std::cout << "exit code " << run.at("exit_code").get<int>() << ", sample errors " << run.at("errors").size()
              << ", invariant violations " << run.at("invariant_violations").size() << "\n";
    for (const auto& name : run.at("reports")) {
      const std::filesystem::path p = dir / name.get<std::string>();
      if (p.extension() != ".json") {
        std::cout << "table " << p.filename().string() << "\n";
        continue;
      }
      const Json r = load(p);
      const std::string kind = r.at("kind").get<std::string>();
      std::cout << "report " << p.filename().string() << " (" << kind << ")\n";
      if (kind == "genericity") {
        std::cout << "  samples " << r.at("samples").size() << ", N_max " << r.at("n_max").get<int>()
                  << ", failures " << r.at("failure_set").size() << " (fraction "
                  << fmt_num(r.at("failure_fraction").get<double>()) << ")\n";
      } else if (kind == "atlas") {
        std::cout << "  nodes " << r.at("nodes").size() << ", N_max " << r.at("n_max").get<int>() << ", regions "
                  << r.at("regions").size() << ", coverage " << fmt_num(r.at("coverage").get<double>()) << "\n";
        for (const auto& t : r.at("transitions")) std::cout << "  transition " << t.dump() << "\n";
      } else if (kind == "duality") {
        std::size_t solved = 0;
        double worst = 0.0;
        for (const auto& rec : r.at("records")) {
          if (rec.at("certificate").is_null()) continue;
          ++solved;
          const Json& gap = rec.at("certificate").at("gap");
          if (gap.is_number()) worst = std::max(worst, std::abs(gap.get<double>()));
        }
        std::cout << "  records " << r.at("records").size() << ", solved " << solved << ", max |gap| "
                  << fmt_num(worst) << "\n";
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "report error: " << e.what() << "\n";
    return kConfig;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tiltlab: tilt stability and genericity experiments"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed = 0;
  double tol = 0.0;
  int jobs = 0;
  std::string out;
  auto* seed_opt = app.add_option("--seed", seed, "Master seed (overrides the config)");
  auto* tol_opt = app.add_option("--tol", tol, "Oracle inclusion tolerance (overrides the config)");
  auto* jobs_opt = app.add_option("--jobs", jobs, "Worker threads; falls back to TILTLAB_JOBS")->check(CLI::NonNegativeNumber);
  auto* out_opt = app.add_option("--out", out, "Output directory (overrides the config)");

  std::string target;
  std::string verb;
  for (const auto& [name, help] : std::vector<std::pair<const char*, const char*>>{
           {"analyze", "Analyze one tilt (mode single_point)"},
           {"sweep", "Random or grid sweep (modes tilt_sweep, composite_sweep)"},
           {"atlas", "Selection atlas on a grid (mode atlas)"},
           {"duality", "Primal-dual certificates (mode duality)"}}) {
    auto* sub = app.add_subcommand(name, help);
    sub->fallthrough();
    sub->add_option("config", target, "Config file")->required();
    sub->callback([&verb, n = std::string(name)] { verb = n; });
  }
  auto* rep = app.add_subcommand("report", "Summarize a finished run directory");
  rep->fallthrough();
  rep->add_option("run-dir", target, "Output directory of a run")->required();
  rep->callback([&verb] { verb = "report"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }
  if (*seed_opt) g.seed = seed;
  if (*tol_opt) g.tol = tol;
  if (*jobs_opt) g.jobs = jobs;
  if (*out_opt) g.out = out;
  if (verb == "report") return summarize(target);
  return run_verb(verb, target, g);
}
