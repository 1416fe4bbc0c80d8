#pragma once

// On-disk formats. Every CSV starts with a "# schema_version=N" comment line
// followed by a header row; column order is fixed.
//
//   observables.csv  time,observable,index,mean,stderr
//   steady.csv       observable,index,mean,stderr
//   scaling.csv      theta,gamma,L,scl,scl_err,scl_avg,status,directory
//   fit.csv          theta,c,c_err,n_points,min_L,residual,stable
//   collapse.csv     L,x,y,y_err

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mise/analysis.hpp"
#include "mise/trajectory.hpp"

namespace mise {

inline constexpr int kCsvSchemaVersion = 1;

/// "mise <version> (<git describe>)"
std::string version_string();

void write_observables_csv(const std::filesystem::path& path, const EnsembleStats& stats);
void write_steady_csv(const std::filesystem::path& path, const EnsembleStats& stats);

struct ScalingRow {
  ScalingPoint point;
  double scl_avg = 0.0;
  std::string status = "ok";  // "ok" or the error message of a failed point
  std::string directory;
};

void write_scaling_csv(const std::filesystem::path& path, std::span<const ScalingRow> rows);
/// Rows with status "ok"; throws DataError on a malformed file or schema mismatch.
std::vector<ScalingRow> read_scaling_csv(const std::filesystem::path& path);

void write_fit_csv(const std::filesystem::path& path, std::span<const AsymptoteFit> fits);
void write_collapse_csv(const std::filesystem::path& path, const CollapseResult& collapse);

void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

/// Totals of an ensemble for manifests and summaries (non-finite values become null).
nlohmann::json ensemble_summary(const EnsembleStats& stats);

}  // namespace mise
