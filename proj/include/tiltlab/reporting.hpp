#pragma once

#include <filesystem>

#include "tiltlab/duality.hpp"
#include "tiltlab/genericity.hpp"
#include "tiltlab/json_io.hpp"

namespace tiltlab {

enum class Mode { TiltSweep, CompositeSweep, Atlas, Duality, SinglePoint };
const char* to_string(Mode m);
std::optional<Mode> mode_from_string(const std::string& s);

enum class Format { Json, Csv };

struct ExperimentConfig {
  Mode mode = Mode::TiltSweep;
  /// Fully resolved problem data. Function references (library names, file
  /// paths) are replaced by their inline JSON form.
  Json problem;
  SamplingConfig sampling;
  bool sampling_given = false;
  std::uint64_t master_seed = 0;
  /// Inclusion tolerance of the exact oracles used for invariant checks.
  double tol = 1e-9;
  /// Residual bound for solutions of the iterative pair solver.
  double residual = 1e-8;
  double branch_gap = 1e-6;
  bool equivalence = true;
  std::filesystem::path output_dir = "tiltlab-out";
  std::vector<Format> formats{Format::Json, Format::Csv};
};

/// Validated config as canonical JSON with every default filled in.
Json config_to_json(const ExperimentConfig& c);

/// Validate a parsed document. Schema errors name the JSON-pointer path of the
/// offending value; `base` resolves relative problem file paths.
ExperimentConfig config_from_json(const Json& doc, const std::filesystem::path& base = {});

/// Parse errors carry line and column; schema errors a JSON pointer.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical serialization: sorted keys, no whitespace, numbers as "%.17g"
/// (integers verbatim), non-finite numbers as the strings "inf", "-inf", "nan".
std::string canonical_dump(const Json& j);

/// FNV-1a 64 of the canonical config, as 16 hex digits.
std::string config_hash(const ExperimentConfig& c);

struct CsvTable {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

struct Report {
  std::string name;
  Json json;
  std::vector<CsvTable> tables;
};

/// "%.17g" for one number, space-separated for vectors.
std::string fmt_num(double x);
std::string fmt_vec(const Vec& v);

/// Writes <name>.json and/or one <table>.csv per table. Returns the written
/// paths in a fixed order. Throws Io on failure.
std::vector<std::filesystem::path> emit_report(const Report& report, const std::vector<Format>& formats,
                                               const std::filesystem::path& directory);

// Report builders, also used by tests.
Report genericity_report(const GenericityReport& r, const std::string& hash);
Report atlas_report(const SelectionAtlas& a, const std::string& hash);

struct DualityRecord {
  PerturbationSample sample;
  std::optional<DualityCertificate> certificate;
  std::optional<SmoothDependence> smooth;
  std::optional<std::string> error;
};
Report duality_report(const std::vector<DualityRecord>& records, const std::string& hash);

struct RunRecord {
  std::string config_hash;
  std::string code_version;
  std::string started;
  std::string finished;
  std::vector<std::filesystem::path> reports;
  /// Per-sample computational failures; logged, never fatal.
  std::vector<std::string> errors;
  /// Internal inconsistencies; any entry makes the run fail.
  std::vector<std::string> invariant_violations;
  int exit_code() const { return invariant_violations.empty() ? 0 : 1; }
};
Json run_record_to_json(const RunRecord& r);

struct RunOptions {
  /// Worker threads; 0 keeps the OpenMP default.
  int jobs = 0;
};

/// Runs the configured experiment, writes the reports plus run.json (the only
/// file carrying timestamps) into the output directory.
RunRecord run_experiment(const ExperimentConfig& c, const RunOptions& opts = {});

}  // namespace tiltlab
