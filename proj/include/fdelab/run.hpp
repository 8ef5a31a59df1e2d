#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fdelab/diagnostics.hpp"
#include "fdelab/evolve.hpp"
#include "fdelab/steady.hpp"

namespace fdelab {

enum class Experiment { steady, evolve_base, evolve_rescaled, diagnose, funcineq };

std::string to_string(Experiment e);

struct GridSpec {
  int dimension = 1;
  std::vector<Interval> extents{{0.0, 1.0}};
  std::vector<Index> nodes{101};
};

struct DiagnosticRequest {
  std::string name;
  std::optional<double> tol;  // falls back to the diagnostic's default
};

struct RunConfig {
  std::string name;
  Experiment experiment = Experiment::steady;
  GridSpec grid;
  double p = 2.0;
  double b = 0.0;
  InitialDataSpec initial;
  DtPolicy dt;
  std::optional<double> t_end;
  double floor_fraction = 1e-8;
  std::vector<DiagnosticRequest> diagnostics;
  std::string output = "out";
  std::uint64_t seed = 0;
  std::string trajectory;  // input directory for `diagnose`
  nlohmann::ordered_json echo;
};

// Schema violations throw ConfigError; the message starts with the field path.
RunConfig parse_config(const nlohmann::json& j, const std::string& path = "$");
// A single experiment object, or {"schema": 1, "experiments": [...]}.
std::vector<RunConfig> load_config(const std::string& file);

struct ManifestEntry {
  std::string path;  // relative to the experiment directory
  std::uintmax_t bytes = 0;
  std::uint64_t fnv1a64 = 0;
};

std::uint64_t fnv1a64(const std::string& bytes);
std::uint64_t fnv1a64_file(const std::string& path);

struct RunReport {
  RunConfig config;
  DiagnosticsReport diagnostics;
  std::vector<ManifestEntry> manifest;
  double wall_seconds = 0.0;
  int exit_code = 0;
  std::string status = "ok";
  std::string message;

  nlohmann::ordered_json to_json() const;
};

// Runs one experiment into config.output and writes report.json there.
// Never throws for solver or estimation trouble; those map to exit codes.
RunReport run(const RunConfig& config);

// Runs every experiment, up to `threads` at a time; the exit code is the
// most severe one (2 > 3 > 1 > 0).
int run_all(const std::vector<RunConfig>& configs, int threads);

// Writes a `t,value` CSV for one series of a report.json. Throws ContractError
// when the quantity is missing.
void emit_plotdata(const std::string& report_path, const std::string& quantity, const std::string& out_path);

int thread_cap();  // FDE_LAB_THREADS, else 1

}  // namespace fdelab
