#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "mise/model.hpp"
#include "mise/trajectory.hpp"

namespace mise {

inline constexpr int kConfigSchemaVersion = 1;

enum class Engine { gaussian, dense, lindblad };

std::string_view to_string(Engine engine);
Engine parse_engine(std::string_view text);

/// Raw config values: section -> key -> text. Root-level keys use section "".
using ConfigTable = std::map<std::string, std::map<std::string, std::string>>;

/// Reads an INI file. Unknown sections or keys are rejected later, by RunConfig::from_table.
ConfigTable read_config_file(const std::filesystem::path& path);
ConfigTable parse_ini(const std::string& text);

/// The "config" object of a run manifest.
ConfigTable read_manifest(const std::filesystem::path& path);

/// Overrides any key from MISE_<SECTION>_<KEY> environment variables,
/// e.g. MISE_RUN_TRAJECTORIES=10 or MISE_MODEL_GAMMA=0.5.
void apply_environment(ConfigTable& table);

/// "0.7pi", "pi/2", "0.5 * pi", or a plain number.
double parse_angle(std::string_view text);

struct SweepAxes {
  std::vector<double> gamma;
  std::vector<int> sites;
  std::vector<double> theta;

  bool empty() const { return gamma.empty() && sites.empty() && theta.empty(); }
};

/// A validated run description. `table` is the canonical source and is
/// what gets written to the manifest.
struct RunConfig {
  ConfigTable table;

  LatticeConfig lattice;
  StepProtocol protocol;
  double steady_from = -1.0;
  Engine engine = Engine::gaussian;
  int trajectories = 1;
  std::uint64_t seed = 0;
  std::vector<int> initial_sites;
  std::vector<std::vector<int>> cuts;
  std::filesystem::path output = "out";
  SweepAxes sweep;

  /// Interprets and validates every field; throws ConfigError naming the
  /// offending [section] key.
  static RunConfig from_table(ConfigTable table);

  /// Copy with one value replaced and everything re-derived.
  RunConfig with(const std::string& section, const std::string& key, const std::string& value) const;

  TrajectorySetup setup() const;
};

RunConfig load_run_config(const std::filesystem::path& path);

std::string to_ini(const ConfigTable& table);
nlohmann::json to_json(const ConfigTable& table);

}  // namespace mise
