#include "mise/output.hpp"

#include <cmath>
#include <fstream>

#include <boost/algorithm/string.hpp>
#include <fmt/format.h>

namespace mise {

namespace {

std::string number(double v) { return fmt::format("{:.17g}", v); }

std::ofstream open_for_write(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw NumericError(fmt::format("cannot write {}", path.string()));
  return out;
}

void write_preamble(std::ofstream& out, std::string_view header) {
  out << "# schema_version=" << kCsvSchemaVersion << '\n' << header << '\n';
}

// Keeps the "status" and "directory" columns parseable.
std::string csv_field(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

std::string version_string() {
#if defined(MISE_VERSION) && defined(MISE_GIT_DESCRIBE)
  return fmt::format("mise {} ({})", MISE_VERSION, MISE_GIT_DESCRIBE);
#else
  return "mise";
#endif
}

void write_observables_csv(const std::filesystem::path& path, const EnsembleStats& stats) {
  auto out = open_for_write(path);
  write_preamble(out, "time,observable,index,mean,stderr");
  for (std::size_t t = 0; t < stats.times.size(); ++t) {
    const auto row = static_cast<Eigen::Index>(t);
    for (const auto& [name, s] : stats.series) {
      for (Eigen::Index k = 0; k < s.mean.cols(); ++k) {
        out << number(stats.times[t]) << ',' << name << ',' << k << ',' << number(s.mean(row, k)) << ','
            << number(s.error(row, k)) << '\n';
      }
    }
  }
}

void write_steady_csv(const std::filesystem::path& path, const EnsembleStats& stats) {
  auto out = open_for_write(path);
  write_preamble(out, "observable,index,mean,stderr");
  for (const auto& [name, s] : stats.steady) {
    for (Eigen::Index k = 0; k < s.mean.size(); ++k) {
      out << name << ',' << k << ',' << number(s.mean(k)) << ',' << number(s.error(k)) << '\n';
    }
  }
}

void write_scaling_csv(const std::filesystem::path& path, std::span<const ScalingRow> rows) {
  auto out = open_for_write(path);
  write_preamble(out, "theta,gamma,L,scl,scl_err,scl_avg,status,directory");
  for (const auto& r : rows) {
    out << number(r.point.theta) << ',' << number(r.point.gamma) << ',' << r.point.sites << ','
        << number(r.point.scl) << ',' << number(r.point.scl_err) << ',' << number(r.scl_avg) << ','
        << csv_field(r.status) << ',' << csv_field(r.directory) << '\n';
  }
}

std::vector<ScalingRow> read_scaling_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot read {}", path.string()));
  std::string line;
  if (!std::getline(in, line) || line != fmt::format("# schema_version={}", kCsvSchemaVersion)) {
    throw DataError(fmt::format("{}: expected '# schema_version={}' on the first line", path.string(),
                                kCsvSchemaVersion));
  }
  if (!std::getline(in, line) || line != "theta,gamma,L,scl,scl_err,scl_avg,status,directory") {
    throw DataError(fmt::format("{}: unexpected header '{}'", path.string(), line));
  }
  std::vector<ScalingRow> rows;
  int lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> f;
    boost::algorithm::split(f, line, boost::algorithm::is_any_of(","));
    if (f.size() != 8) throw DataError(fmt::format("{}:{}: expected 8 fields", path.string(), lineno));
    try {
      ScalingRow r;
      r.point.theta = std::stod(f[0]);
      r.point.gamma = std::stod(f[1]);
      r.point.sites = std::stoi(f[2]);
      r.point.scl = std::stod(f[3]);
      r.point.scl_err = std::stod(f[4]);
      r.scl_avg = std::stod(f[5]);
      r.status = f[6];
      r.directory = f[7];
      if (r.status == "ok") rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw DataError(fmt::format("{}:{}: malformed number", path.string(), lineno));
    }
  }
  return rows;
}

void write_fit_csv(const std::filesystem::path& path, std::span<const AsymptoteFit> fits) {
  auto out = open_for_write(path);
  write_preamble(out, "theta,c,c_err,n_points,min_L,residual,stable");
  for (const auto& f : fits) {
    out << number(f.theta) << ',' << number(f.c) << ',' << number(f.c_err) << ',' << f.points << ',' << f.min_sites
        << ',' << number(f.residual) << ',' << (f.stable ? 1 : 0) << '\n';
  }
}

void write_collapse_csv(const std::filesystem::path& path, const CollapseResult& collapse) {
  auto out = open_for_write(path);
  write_preamble(out, "L,x,y,y_err");
  for (const auto& s : collapse.series) {
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      out << s.sites << ',' << number(s.x[k]) << ',' << number(s.y[k]) << ',' << number(s.y_err[k]) << '\n';
    }
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  auto out = open_for_write(path);
  out << doc.dump(2) << '\n';
}

nlohmann::json ensemble_summary(const EnsembleStats& stats) {
  nlohmann::json j;
  j["trajectories"] = stats.trajectories;
  j["steady_from"] = stats.steady_from;
  j["total_jumps"] = stats.total_jumps;
  j["expected_jumps"] = stats.expected_jumps;
  j["bound_violations"] = stats.bound_violations;
  j["min_bound_margin"] = finite_or_null(stats.min_bound_margin);
  for (const char* name : {"scl_traj", "scl_avg", "current"}) {
    if (auto it = stats.steady.find(name); it != stats.steady.end() && it->second.mean.size() > 0) {
      j["steady"][name] = {{"mean", finite_or_null(it->second.mean(0))},
                           {"stderr", finite_or_null(it->second.error(0))}};
    }
  }
  return j;
}

}  // namespace mise
