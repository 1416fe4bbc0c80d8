#include "mise/runner.hpp"

#include <chrono>
#include <cstdlib>

#include <fmt/format.h>

#include "mise/analysis.hpp"
#include "mise/ed.hpp"

namespace mise {

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const GuardError*>(&e)) return exit_guard;
  if (dynamic_cast<const ConfigError*>(&e)) return exit_config;
  return exit_numeric;
}

std::filesystem::path preset_path(std::string_view name) {
  std::filesystem::path dir;
  if (const char* env = std::getenv("MISE_PRESET_DIR")) {
    dir = env;
  } else {
#ifdef MISE_PRESET_DIR
    dir = MISE_PRESET_DIR;
#else
    dir = "presets";
#endif
  }
  auto path = dir / (std::string(name) + ".ini");
  if (!std::filesystem::exists(path)) {
    throw ConfigError(fmt::format("no preset named '{}' in {}", name, dir.string()));
  }
  return path;
}

namespace {

EnsembleStats simulate_lindblad(const RunConfig& cfg) {
  const auto ops = ed::build_sector_operators(cfg.lattice, static_cast<int>(cfg.initial_sites.size()),
                                              ed::kLindbladSectorLimit);
  const CMatrix rho0 = ed::pure_density_matrix(ed::product_state(ops.basis, cfg.initial_sites));
  const auto run = ed::integrate_lindblad(ops, rho0, cfg.protocol.record_times);

  // The averaged state is exact, so it enters as a single record with zero error.
  TrajectoryRecord record;
  for (const auto& snap : run.snapshots) {
    Snapshot s;
    s.time = snap.time;
    s.density = ed::site_densities(ops.basis, snap.rho);
    s.classical_entropy = classical_entropy(s.density);
    record.snapshots.push_back(std::move(s));
  }
  EnsembleAccumulator acc(cfg.setup().steady_from());
  acc.add(record);
  EnsembleStats stats = acc.finish();
  for (const char* unused : {"entropy", "jumps"}) {
    stats.series.erase(unused);
    stats.steady.erase(unused);
  }
  return stats;
}

std::string point_name(double gamma, int sites, double theta) {
  return fmt::format("gamma={}_L={}_theta={:.6g}pi", gamma, sites, theta / pi);
}

void claim_directory(const std::filesystem::path& dir, bool force) {
  if (std::filesystem::exists(dir) && !std::filesystem::is_empty(dir) && !force) {
    throw ConfigError(fmt::format("output directory {} already exists; pass --force to overwrite", dir.string()));
  }
  std::filesystem::create_directories(dir);
}

}  // namespace

EnsembleStats simulate(const RunConfig& cfg, int threads) {
  const TrajectorySetup setup = cfg.setup();
  switch (cfg.engine) {
    case Engine::gaussian:
      return run_ensemble(setup, cfg.trajectories, cfg.seed, threads);
    case Engine::dense: {
      const ed::DenseTrajectoryRunner runner(setup);
      return run_ensemble([&runner](std::uint64_t seed) { return runner(seed); }, cfg.trajectories, cfg.seed,
                          setup.steady_from(), threads);
    }
    case Engine::lindblad:
      return simulate_lindblad(cfg);
  }
  throw ConfigError("unknown engine");
}

RunSummary execute_run(const RunConfig& cfg, const RunOptions& options) {
  claim_directory(cfg.output, options.force);
  const auto start = std::chrono::steady_clock::now();
  RunSummary summary;
  summary.directory = cfg.output;
  summary.stats = simulate(cfg, options.threads);
  summary.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  write_observables_csv(cfg.output / "observables.csv", summary.stats);
  write_steady_csv(cfg.output / "steady.csv", summary.stats);

  nlohmann::json manifest;
  manifest["schema_version"] = kCsvSchemaVersion;
  manifest["version"] = version_string();
  manifest["engine"] = std::string(to_string(cfg.engine));
  manifest["config"] = to_json(cfg.table);
  manifest["seeds"] = {{"base", cfg.seed},
                       {"first", cfg.engine == Engine::lindblad ? cfg.seed : cfg.seed + 1},
                       {"count", cfg.engine == Engine::lindblad ? 0 : cfg.trajectories}};
  manifest["threads"] = options.threads;
  manifest["wall_seconds"] = summary.wall_seconds;
  manifest["files"] = {"observables.csv", "steady.csv"};
  manifest["summary"] = ensemble_summary(summary.stats);
  if (const auto it = summary.stats.series.find("scl_traj");
      it != summary.stats.series.end() && summary.stats.times.size() >= 2) {
    // Fixed-t_max runs only report whether S_cl had stopped drifting.
    const double window = cfg.lattice.gamma > 0.0 ? 50.0 / cfg.lattice.gamma : cfg.protocol.t_max;
    const auto drift = steady_drift(summary.stats.times, it->second.mean.col(0), window);
    manifest["summary"]["scl_drift"] = {
        {"slope", drift.slope}, {"window", drift.window}, {"points", drift.points}, {"steady", drift.steady}};
  }
  manifest["notes"] = {
      {"scl_traj", "classical entropy of each trajectory's density profile, averaged over trajectories; "
                   "this is the quantity bounded by twice the entanglement entropy and the default for fits"},
      {"scl_avg", "classical entropy of the trajectory-averaged density profile; reported with zero error"},
      {"steady", "per-trajectory time average over t >= steady_from, then averaged over trajectories"},
  };
  write_json(cfg.output / "manifest.json", manifest);
  return summary;
}

SweepSummary execute_sweep(const RunConfig& cfg, const RunOptions& options) {
  SweepSummary summary;
  const auto& axes = cfg.sweep;
  auto base = cfg.with("sweep", "gamma", "").with("sweep", "L", "").with("sweep", "theta", "");

  auto record = [&](const RunConfig& point_cfg, const EnsembleStats* stats, std::string status) {
    ScalingRow row;
    row.point.theta = point_cfg.lattice.theta;
    row.point.gamma = point_cfg.lattice.gamma;
    row.point.sites = point_cfg.lattice.sites;
    row.directory = point_cfg.output.string();
    row.status = std::move(status);
    if (stats) {
      const auto& scl = stats->steady.at("scl_traj");
      row.point.scl = scl.mean(0);
      row.point.scl_err = scl.error(0);
      row.scl_avg = stats->steady.at("scl_avg").mean(0);
    }
    summary.rows.push_back(std::move(row));
  };

  if (axes.empty()) {
    auto result = execute_run(base, options);
    record(base, &result.stats, "ok");
    return summary;
  }

  claim_directory(cfg.output, options.force);
  const std::vector<double> gammas = axes.gamma.empty() ? std::vector{cfg.lattice.gamma} : axes.gamma;
  const std::vector<int> sizes = axes.sites.empty() ? std::vector{cfg.lattice.sites} : axes.sites;
  const std::vector<double> thetas = axes.theta.empty() ? std::vector{cfg.lattice.theta} : axes.theta;
  for (std::size_t t = 0; t < thetas.size(); ++t) {
    for (int sites : sizes) {
      for (std::size_t g = 0; g < gammas.size(); ++g) {
        const auto dir = cfg.output / point_name(gammas[g], sites, thetas[t]);
        RunConfig point = base;
        try {
          // %.17g round-trips, so the point manifest reproduces the same doubles.
          point = base.with("model", "gamma", fmt::format("{:.17g}", gammas[g]))
                      .with("model", "theta", fmt::format("{:.17g}", thetas[t]))
                      .with("model", "L", std::to_string(sites))
                      .with("run", "output", dir.string());
          auto result = execute_run(point, RunOptions{options.threads, true});
          record(point, &result.stats, "ok");
        } catch (const std::exception& e) {
          ++summary.failures;
          if (summary.exit_status == exit_ok) summary.exit_status = exit_code_for(e);
          point.lattice.gamma = gammas[g];
          point.lattice.theta = thetas[t];
          point.lattice.sites = sites;
          point.output = dir;
          record(point, nullptr, fmt::format("failed: {}", e.what()));
        }
      }
    }
  }
  write_scaling_csv(cfg.output / "scaling.csv", summary.rows);

  nlohmann::json manifest;
  manifest["schema_version"] = kCsvSchemaVersion;
  manifest["version"] = version_string();
  manifest["engine"] = std::string(to_string(cfg.engine));
  manifest["config"] = to_json(cfg.table);
  manifest["points"] = nlohmann::json::array();
  for (const auto& r : summary.rows) {
    manifest["points"].push_back(
        {{"gamma", r.point.gamma}, {"L", r.point.sites}, {"theta", r.point.theta}, {"status", r.status},
         {"directory", r.directory}});
  }
  manifest["failures"] = summary.failures;
  write_json(cfg.output / "sweep.json", manifest);
  return summary;
}

ScalingObservable parse_scaling_observable(std::string_view text) {
  if (text == "traj" || text == "scl") return ScalingObservable::trajectory;
  if (text == "avg" || text == "scl_avg") return ScalingObservable::averaged;
  throw ConfigError(fmt::format("unknown observable '{}' (expected traj or avg)", text));
}

AnalysisSummary analyze_scaling(const std::filesystem::path& scaling_csv, const std::filesystem::path& out_dir,
                                double gamma_cutoff, bool force, ScalingObservable observable) {
  const auto rows = read_scaling_csv(scaling_csv);
  std::vector<ScalingPoint> points;
  for (const auto& r : rows) {
    points.push_back(r.point);
    if (observable == ScalingObservable::averaged) {
      points.back().scl = r.scl_avg;
      points.back().scl_err = 0.0;
    }
  }
  claim_directory(out_dir, force);

  AnalysisSummary summary;
  nlohmann::json doc;
  doc["schema_version"] = kCsvSchemaVersion;
  doc["version"] = version_string();
  doc["input"] = scaling_csv.string();
  doc["points"] = points.size();
  doc["observable"] = observable == ScalingObservable::averaged ? "scl_avg" : "scl";
  try {
    summary.fits = fit_asymptote(points);
    write_fit_csv(out_dir / "fit.csv", summary.fits);
    for (const auto& f : summary.fits) {
      doc["fits"].push_back({{"theta", f.theta}, {"c", f.c}, {"c_err", f.c_err}, {"n_points", f.points},
                             {"min_L", f.min_sites}, {"stable", f.stable}});
    }
  } catch (const DataError& e) {
    summary.errors.push_back(fmt::format("fit: {}", e.what()));
  }
  try {
    summary.collapse = scaling_collapse(points, gamma_cutoff);
    write_collapse_csv(out_dir / "collapse.csv", summary.collapse);
    doc["collapse"] = {{"gamma_cutoff", gamma_cutoff}, {"spread", summary.collapse.spread},
                       {"grid_points", summary.collapse.grid.size()}};
  } catch (const DataError& e) {
    summary.errors.push_back(fmt::format("collapse: {}", e.what()));
  }
  doc["errors"] = summary.errors;
  write_json(out_dir / "summary.json", doc);
  return summary;
}

}  // namespace mise
