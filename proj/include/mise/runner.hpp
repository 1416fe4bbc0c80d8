#pragma once

#include <exception>
#include <filesystem>
#include <string_view>
#include <vector>

#include "mise/config.hpp"
#include "mise/output.hpp"
#include "mise/trajectory.hpp"

namespace mise {

enum ExitCode : int { exit_ok = 0, exit_config = 2, exit_numeric = 3, exit_guard = 4 };

/// Maps a module error to the CLI exit status.
int exit_code_for(const std::exception& e);

/// Path of a checked-in preset config; MISE_PRESET_DIR overrides the
/// compiled-in location.
std::filesystem::path preset_path(std::string_view name);

/// Runs the configured engine in memory. Sweep axes are ignored.
EnsembleStats simulate(const RunConfig& cfg, int threads = 1);

struct RunOptions {
  int threads = 1;
  bool force = false;
};

struct RunSummary {
  std::filesystem::path directory;
  EnsembleStats stats;
  double wall_seconds = 0.0;
};

/// simulate() plus observables.csv, steady.csv and manifest.json in cfg.output.
/// Refuses a non-empty output directory unless options.force is set.
RunSummary execute_run(const RunConfig& cfg, const RunOptions& options);

struct SweepSummary {
  std::vector<ScalingRow> rows;
  int failures = 0;
  int exit_status = exit_ok;  // status of the first failed point
};

/// One run per point of the gamma x L x theta grid, each in its own
/// subdirectory, plus a combined scaling.csv. A failing point is recorded
/// and the sweep continues. With no axes this is a single run.
SweepSummary execute_sweep(const RunConfig& cfg, const RunOptions& options);

struct AnalysisSummary {
  std::vector<AsymptoteFit> fits;
  CollapseResult collapse;
  std::vector<std::string> errors;
};

/// Which steady classical entropy of scaling.csv enters the fits: the
/// per-trajectory average (column scl) or the entropy of the averaged
/// density profile (column scl_avg).
enum class ScalingObservable { trajectory, averaged };

ScalingObservable parse_scaling_observable(std::string_view text);

/// fit.csv, collapse.csv and summary.json from a sweep's scaling.csv.
AnalysisSummary analyze_scaling(const std::filesystem::path& scaling_csv, const std::filesystem::path& out_dir,
                                double gamma_cutoff, bool force,
                                ScalingObservable observable = ScalingObservable::trajectory);

}  // namespace mise
