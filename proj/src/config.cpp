#include "mise/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

namespace mise {

namespace {

struct Key {
  const char* section;
  const char* name;
  const char* fallback;
};

// Every accepted key with its default. Order is the canonical output order.
constexpr Key kSchema[] = {
    {"", "schema_version", "1"},
    {"model", "L", "64"},
    {"model", "bc", "open"},
    {"model", "gamma", "0.3"},
    {"model", "theta", "pi"},
    {"model", "g", "0"},
    {"protocol", "dt", "0.05"},
    {"protocol", "t_max", "auto"},
    {"protocol", "record_interval", "1"},
    {"protocol", "jump_order", "ascending"},
    {"protocol", "steady_from", "auto"},
    {"run", "engine", "gaussian"},
    {"run", "trajectories", "1"},
    {"run", "seed", "0"},
    {"run", "initial_state", "default"},
    {"run", "cuts", "L/4,L/2"},
    {"run", "output", "out"},
    {"sweep", "gamma", ""},
    {"sweep", "L", ""},
    {"sweep", "theta", ""},
};

const Key* find_key(const std::string& section, const std::string& name) {
  for (const Key& k : kSchema) {
    if (section == k.section && name == k.name) return &k;
  }
  return nullptr;
}

std::string where(const std::string& section, const std::string& key) {
  return section.empty() ? key : fmt::format("[{}] {}", section, key);
}

std::string trimmed(std::string_view text) { return boost::algorithm::trim_copy(std::string(text)); }

double parse_double(std::string_view text) {
  const std::string s = trimmed(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ConfigError(fmt::format("'{}' is not a finite number", s));
  }
  return v;
}

template <typename Int>
Int parse_integer(std::string_view text) {
  const std::string s = trimmed(text);
  Int v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError(fmt::format("'{}' is not an integer", s));
  }
  return v;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  if (trimmed(text).empty()) return items;
  boost::algorithm::split(items, text, boost::algorithm::is_any_of(","));
  for (auto& item : items) {
    item = trimmed(item);
    if (item.empty()) throw ConfigError(fmt::format("empty entry in list '{}'", text));
  }
  return items;
}

std::vector<int> parse_cut(const std::string& item, int L) {
  static const std::regex fraction(R"(L\s*/\s*(\d+))");
  static const std::regex range(R"((\d+)\s*:\s*(\d+))");
  std::smatch m;
  int begin = 0;
  int end = 0;
  if (std::regex_match(item, m, fraction)) {
    const int d = parse_integer<int>(m[1].str());
    if (d < 1) throw ConfigError(fmt::format("cut '{}' divides by zero", item));
    end = L / d;
  } else if (std::regex_match(item, m, range)) {
    begin = parse_integer<int>(m[1].str());
    end = parse_integer<int>(m[2].str());
  } else {
    end = parse_integer<int>(item);
  }
  if (begin < 0 || end > L || begin >= end) {
    throw ConfigError(fmt::format("cut '{}' is empty or leaves the {}-site chain", item, L));
  }
  std::vector<int> sites;
  for (int i = begin; i < end; ++i) sites.push_back(i);
  return sites;
}

std::vector<int> parse_initial_state(const std::string& text, int L, Boundary bc) {
  if (text == "default") return bc == Boundary::open ? half_filled_left(L) : neel_sites(L);
  if (text == "half_left") return half_filled_left(L);
  if (text == "neel") return neel_sites(L);
  if (text.rfind("sites:", 0) == 0) {
    std::vector<int> sites;
    for (const auto& item : split_list(text.substr(6))) sites.push_back(parse_integer<int>(item));
    std::sort(sites.begin(), sites.end());
    for (std::size_t k = 0; k < sites.size(); ++k) {
      if (sites[k] < 0 || sites[k] >= L || (k > 0 && sites[k] == sites[k - 1])) {
        throw ConfigError(fmt::format("initial sites '{}' must be distinct and inside [0, {})", text, L));
      }
    }
    return sites;
  }
  throw ConfigError(fmt::format("unknown initial state '{}' (default, half_left, neel, sites:i,j,...)", text));
}

JumpOrder parse_jump_order(const std::string& text) {
  if (text == "ascending") return JumpOrder::ascending;
  if (text == "random") return JumpOrder::random;
  throw ConfigError(fmt::format("unknown jump order '{}' (ascending, random)", text));
}

}  // namespace

std::string_view to_string(Engine engine) {
  switch (engine) {
    case Engine::gaussian: return "gaussian";
    case Engine::dense: return "dense";
    case Engine::lindblad: return "lindblad";
  }
  return "gaussian";
}

Engine parse_engine(std::string_view text) {
  if (text == "gaussian") return Engine::gaussian;
  if (text == "dense") return Engine::dense;
  if (text == "lindblad") return Engine::lindblad;
  throw ConfigError(fmt::format("unknown engine '{}' (gaussian, dense, lindblad)", text));
}

double parse_angle(std::string_view text) {
  std::string s = trimmed(text);
  s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); }), s.end());
  static const std::regex angle(R"(([-+]?[0-9]*\.?[0-9]*(?:[eE][-+]?[0-9]+)?)\*?pi(?:/([0-9]*\.?[0-9]+))?)");
  std::smatch m;
  if (std::regex_match(s, m, angle)) {
    const std::string coef = m[1].str();
    double c = 1.0;
    if (coef == "-") c = -1.0;
    else if (!coef.empty() && coef != "+") c = parse_double(coef);
    double v = c * pi;
    if (m[2].matched) {
      const double d = parse_double(m[2].str());
      if (d == 0.0) throw ConfigError(fmt::format("angle '{}' divides by zero", s));
      v /= d;
    }
    return v;
  }
  return parse_double(s);
}

ConfigTable parse_ini(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  // Boost's reader only knows ';' comments.
  std::string cleaned;
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);) {
    const auto first = line.find_first_not_of(" \t");
    if (first != std::string::npos && line[first] == '#') line[first] = ';';
    cleaned += line;
    cleaned += '\n';
  }
  std::istringstream in(cleaned);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(fmt::format("config line {}: {}", e.line(), e.message()));
  }
  ConfigTable table;
  for (const auto& [name, node] : tree) {
    const bool known_section = name == "model" || name == "protocol" || name == "run" || name == "sweep";
    if (node.empty() && known_section) {
      table[name];
      continue;
    }
    if (node.empty()) {
      table[""][name] = trimmed(node.data());
      continue;
    }
    auto& section = table[name];
    for (const auto& [key, value] : node) section[key] = trimmed(value.data());
  }
  return table;
}

ConfigTable read_config_file(const std::filesystem::path& path) {
  if (path.extension() == ".json") return read_manifest(path);
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read config file {}", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_ini(buffer.str());
}

ConfigTable read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read manifest {}", path.string()));
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("manifest {}: {}", path.string(), e.what()));
  }
  if (!doc.contains("config") || !doc["config"].is_object()) {
    throw ConfigError(fmt::format("manifest {} has no config object", path.string()));
  }
  ConfigTable table;
  for (const auto& [name, value] : doc["config"].items()) {
    if (value.is_string()) {
      table[""][name] = value.get<std::string>();
    } else if (value.is_object()) {
      for (const auto& [key, v] : value.items()) {
        if (!v.is_string()) throw ConfigError(fmt::format("manifest value {} is not a string", where(name, key)));
        table[name][key] = v.get<std::string>();
      }
    } else {
      throw ConfigError(fmt::format("manifest entry '{}' is neither a section nor a string", name));
    }
  }
  return table;
}

void apply_environment(ConfigTable& table) {
  for (const Key& k : kSchema) {
    std::string var = "MISE_";
    if (*k.section != '\0') var += boost::algorithm::to_upper_copy(std::string(k.section)) + "_";
    var += boost::algorithm::to_upper_copy(std::string(k.name));
    if (const char* value = std::getenv(var.c_str())) table[k.section][k.name] = trimmed(value);
  }
}

RunConfig RunConfig::from_table(ConfigTable table) {
  for (const auto& [section, keys] : table) {
    for (const auto& [key, value] : keys) {
      if (!find_key(section, key)) {
        throw ConfigError(fmt::format("unknown config key '{}'", where(section, key)));
      }
    }
  }
  for (const Key& k : kSchema) table[k.section].try_emplace(k.name, k.fallback);

  RunConfig cfg;
  auto field = [&](const char* section, const char* key, auto&& parse) {
    const std::string& text = table.at(section).at(key);
    try {
      return parse(text);
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("{}: {}", where(section, key), e.what()));
    }
  };
  auto check = [](bool ok, const char* section, const char* key, std::string_view message) {
    if (!ok) throw ConfigError(fmt::format("{}: {}", where(section, key), message));
  };

  const int version = field("", "schema_version", parse_integer<int>);
  check(version == kConfigSchemaVersion, "", "schema_version",
        fmt::format("unsupported version {}, expected {}", version, kConfigSchemaVersion));

  auto& lat = cfg.lattice;
  lat.sites = field("model", "L", parse_integer<int>);
  check(lat.sites >= 2 && lat.sites <= 8192, "model", "L", "must lie in [2, 8192]");
  lat.boundary = field("model", "bc", [](const std::string& s) {
    try {
      return parse_boundary(s);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  });
  lat.gamma = field("model", "gamma", parse_double);
  check(lat.gamma >= 0.0, "model", "gamma", "must be non-negative");
  lat.theta = field("model", "theta", parse_angle);
  lat.interaction = field("model", "g", parse_double);

  auto& proto = cfg.protocol;
  proto.dt = field("protocol", "dt", parse_double);
  check(proto.dt > 0.0 && proto.dt <= 1.0, "protocol", "dt", "must lie in (0, 1]");
  proto.t_max = field("protocol", "t_max", [&](const std::string& s) {
    return s == "auto" ? std::max(300.0, lat.gamma > 0.0 ? 10.0 / lat.gamma : 0.0) : parse_double(s);
  });
  check(proto.t_max >= 0.0, "protocol", "t_max", "must be non-negative");
  const double interval = field("protocol", "record_interval", parse_double);
  check(interval > 0.0, "protocol", "record_interval", "must be positive");
  check(std::abs(interval / proto.dt - std::round(interval / proto.dt)) < 1e-9, "protocol", "record_interval",
        "must be a multiple of dt");
  const double t_max = proto.t_max;
  const double dt = proto.dt;
  const JumpOrder order = field("protocol", "jump_order", parse_jump_order);
  proto = StepProtocol::uniform(dt, t_max, interval);
  proto.jump_order = order;
  check(std::abs(t_max / dt - std::round(t_max / dt)) < 1e-9, "protocol", "t_max", "must be a multiple of dt");
  cfg.steady_from = field("protocol", "steady_from",
                          [](const std::string& s) { return s == "auto" ? -1.0 : parse_double(s); });
  check(cfg.steady_from <= t_max, "protocol", "steady_from", "lies beyond t_max");

  cfg.engine = field("run", "engine", parse_engine);
  cfg.trajectories = field("run", "trajectories", parse_integer<int>);
  check(cfg.trajectories >= 1, "run", "trajectories", "must be at least 1");
  cfg.seed = field("run", "seed", parse_integer<std::uint64_t>);
  cfg.initial_sites = field("run", "initial_state", [&](const std::string& s) {
    return parse_initial_state(s, lat.sites, lat.boundary);
  });
  cfg.cuts = field("run", "cuts", [&](const std::string& s) {
    std::vector<std::vector<int>> cuts;
    if (s == "none") return cuts;
    for (const auto& item : split_list(s)) cuts.push_back(parse_cut(item, lat.sites));
    return cuts;
  });
  cfg.output = field("run", "output", [](const std::string& s) {
    if (s.empty()) throw ConfigError("must not be empty");
    return std::filesystem::path(s);
  });
  check(cfg.engine != Engine::gaussian || lat.interaction == 0.0, "model", "g",
        "interactions need the dense or lindblad engine");

  cfg.sweep.gamma = field("sweep", "gamma", [](const std::string& s) {
    std::vector<double> v;
    for (const auto& item : split_list(s)) v.push_back(parse_double(item));
    return v;
  });
  cfg.sweep.theta = field("sweep", "theta", [](const std::string& s) {
    std::vector<double> v;
    for (const auto& item : split_list(s)) v.push_back(parse_angle(item));
    return v;
  });
  cfg.sweep.sites = field("sweep", "L", [](const std::string& s) {
    std::vector<int> v;
    for (const auto& item : split_list(s)) v.push_back(parse_integer<int>(item));
    return v;
  });

  try {
    lat.validate();
    proto.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("[model]/[protocol]: {}", e.what()));
  }
  cfg.table = std::move(table);
  return cfg;
}

RunConfig RunConfig::with(const std::string& section, const std::string& key, const std::string& value) const {
  if (!find_key(section, key)) throw ConfigError(fmt::format("unknown config key '{}'", where(section, key)));
  ConfigTable t = table;
  t[section][key] = value;
  return from_table(std::move(t));
}

TrajectorySetup RunConfig::setup() const {
  TrajectorySetup s;
  s.lattice = lattice;
  s.protocol = protocol;
  s.initial_sites = initial_sites;
  s.observables.cuts = cuts;
  s.observables.steady_from = steady_from;
  return s;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  ConfigTable table = read_config_file(path);
  apply_environment(table);
  return RunConfig::from_table(std::move(table));
}

std::string to_ini(const ConfigTable& table) {
  std::string out;
  if (auto it = table.find(""); it != table.end()) {
    for (const auto& [key, value] : it->second) out += fmt::format("{} = {}\n", key, value);
  }
  for (const auto& [section, keys] : table) {
    if (section.empty()) continue;
    out += fmt::format("\n[{}]\n", section);
    for (const auto& [key, value] : keys) out += fmt::format("{} = {}\n", key, value);
  }
  return out;
}

nlohmann::json to_json(const ConfigTable& table) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [section, keys] : table) {
    for (const auto& [key, value] : keys) {
      if (section.empty()) j[key] = value;
      else j[section][key] = value;
    }
  }
  return j;
}

}  // namespace mise
