#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "mise/config.hpp"
#include "mise/runner.hpp"

namespace {

struct CommonArgs {
  std::string config;
  std::string preset;
  int threads = 0;
  std::string seed;
  std::string out;
  bool force = false;
  std::vector<std::string> set;
  std::vector<std::string> axes;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  auto* source = cmd->add_option_group("source", "where the run description comes from");
  source->add_option("--config", args.config, "INI config file or a manifest.json to re-run")->check(CLI::ExistingFile);
  source->add_option("--preset", args.preset, "name of a checked-in preset, e.g. fig2b");
  source->require_option(1);
  cmd->add_option("--threads", args.threads, "worker threads (default: hardware concurrency)")
      ->envname("MISE_THREADS")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--seed", args.seed, "base seed; trajectories use seed+1, seed+2, ...");
  cmd->add_option("--out", args.out, "output directory");
  cmd->add_flag("--force", args.force, "overwrite an existing output directory");
  cmd->add_option("--set", args.set, "override a config value, section.key=value")->take_all();
}

// "section.key=value" or, for --axis, "key=v1,v2,..." in [sweep].
std::pair<std::string, std::string> split_assignment(const std::string& text, std::string& value) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw mise::ConfigError(fmt::format("expected key=value, got '{}'", text));
  value = text.substr(eq + 1);
  const std::string lhs = text.substr(0, eq);
  const auto dot = lhs.find('.');
  if (dot == std::string::npos) return {"", lhs};
  return {lhs.substr(0, dot), lhs.substr(dot + 1)};
}

mise::RunConfig build_config(const CommonArgs& args) {
  const auto path = args.preset.empty() ? std::filesystem::path(args.config) : mise::preset_path(args.preset);
  mise::ConfigTable table = mise::read_config_file(path);
  mise::apply_environment(table);
  for (const auto& s : args.set) {
    std::string value;
    const auto [section, key] = split_assignment(s, value);
    table[section][key] = value;
  }
  for (const auto& a : args.axes) {
    std::string value;
    auto [section, key] = split_assignment(a, value);
    if (!section.empty() && section != "sweep") throw mise::ConfigError(fmt::format("--axis takes gamma, L or theta"));
    table["sweep"][key] = value;
  }
  if (!args.seed.empty()) table["run"]["seed"] = args.seed;
  if (!args.out.empty()) table["run"]["output"] = args.out;
  return mise::RunConfig::from_table(std::move(table));
}

int threads_or_default(int requested) {
  if (requested > 0) return requested;
  return std::max(1U, std::thread::hardware_concurrency());
}

void report(const mise::RunSummary& run) {
  const auto& stats = run.stats;
  fmt::print("wrote {} ({} trajectories, {:.1f} s)\n", run.directory.string(), stats.trajectories, run.wall_seconds);
  if (auto it = stats.steady.find("scl_traj"); it != stats.steady.end()) {
    fmt::print("steady S_cl = {:.6g} +- {:.2g}\n", it->second.mean(0), it->second.error(0));
  }
  if (stats.bound_violations > 0) {
    fmt::print(stderr, "warning: {} snapshots violate 2 S <= S_cl\n", stats.bound_violations);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monitored free-fermion trajectories: measurement-induced skin effect"};
  app.set_version_flag("--version", mise::version_string());
  app.require_subcommand(1);

  CommonArgs run_args;
  auto* run = app.add_subcommand("run", "run one configuration (a [sweep] section makes it a sweep)");
  add_common(run, run_args);

  CommonArgs sweep_args;
  auto* sweep = app.add_subcommand("sweep", "one run per grid point plus a combined scaling.csv");
  add_common(sweep, sweep_args);
  sweep->add_option("--axis", sweep_args.axes, "grid axis, e.g. gamma=0.1,0.2 or L=64,128 or theta=pi,0.7pi")
      ->take_all();

  std::string analyze_in;
  std::string analyze_out;
  double gamma_cutoff = 1.0;
  bool analyze_force = false;
  std::string observable = "traj";
  auto* analyze = app.add_subcommand("analyze", "asymptote fit and scaling collapse of a sweep");
  analyze->add_option("--in", analyze_in, "scaling.csv written by sweep")->required()->check(CLI::ExistingFile);
  analyze->add_option("--out", analyze_out, "output directory")->required();
  analyze->add_option("--gamma-cutoff", gamma_cutoff, "exclude gamma >= cutoff from the collapse");
  analyze->add_option("--observable", observable, "classical entropy to fit: traj (column scl) or avg (column scl_avg)")
      ->check(CLI::IsMember({"traj", "avg", "scl", "scl_avg"}));
  analyze->add_flag("--force", analyze_force, "overwrite an existing output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : mise::exit_config;
  }

  try {
    if (*analyze) {
      const auto summary = mise::analyze_scaling(analyze_in, analyze_out, gamma_cutoff, analyze_force,
                                                   mise::parse_scaling_observable(observable));
      for (const auto& f : summary.fits) {
        fmt::print("theta = {:.4f} pi: c = {:.4g} +- {:.2g} ({} points, L >= {})\n", f.theta / mise::pi, f.c, f.c_err,
                   f.points, f.min_sites);
      }
      if (!summary.collapse.series.empty()) fmt::print("collapse spread = {:.3g}\n", summary.collapse.spread);
      for (const auto& e : summary.errors) fmt::print(stderr, "mise: {}\n", e);
      return summary.errors.empty() ? mise::exit_ok : mise::exit_numeric;
    }
    const CommonArgs& args = *run ? run_args : sweep_args;
    const mise::RunConfig cfg = build_config(args);
    const mise::RunOptions options{threads_or_default(args.threads), args.force};
    if (cfg.sweep.empty()) {
      report(mise::execute_run(cfg, options));
      return mise::exit_ok;
    }
    const auto summary = mise::execute_sweep(cfg, options);
    fmt::print("sweep: {} points, {} failed; wrote {}\n", summary.rows.size(), summary.failures,
               (cfg.output / "scaling.csv").string());
    for (const auto& r : summary.rows) {
      if (r.status != "ok") fmt::print(stderr, "mise: {}: {}\n", r.directory, r.status);
    }
    return summary.exit_status;
  } catch (const std::exception& e) {
    fmt::print(stderr, "mise: error: {}\n", e.what());
    return mise::exit_code_for(e);
  }
}
