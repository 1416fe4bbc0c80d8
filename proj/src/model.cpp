#include "mise/model.hpp"

#include <cmath>

#include <fmt/format.h>

namespace mise {

std::string_view to_string(Boundary bc) {
  return bc == Boundary::open ? "open" : "periodic";
}

Boundary parse_boundary(std::string_view text) {
  if (text == "open" || text == "obc") return Boundary::open;
  if (text == "periodic" || text == "pbc") return Boundary::periodic;
  throw ConfigError(fmt::format("unknown boundary condition '{}' (expected open|periodic)", text));
}

void LatticeConfig::validate() const {
  if (sites < 2) {
    throw ConfigError(fmt::format("L must be at least 2, got {}", sites));
  }
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
    throw ConfigError(fmt::format("gamma must be a finite non-negative rate, got {}", gamma));
  }
  if (!std::isfinite(theta)) {
    throw ConfigError("theta must be finite");
  }
  if (!std::isfinite(interaction)) {
    throw ConfigError("g must be finite");
  }
}

int LatticeConfig::bond_count() const {
  return boundary == Boundary::open ? sites - 1 : sites;
}

std::vector<Bond> bonds(const LatticeConfig& cfg) {
  cfg.validate();
  std::vector<Bond> out;
  out.reserve(cfg.bond_count());
  for (int m = 0; m < cfg.bond_count(); ++m) {
    out.push_back({m, (m + 1) % cfg.sites});
  }
  return out;
}

CVector JumpSpec::mode_vector(int sites) const {
  CVector a = CVector::Zero(sites);
  a(bond.left) += mode(0);
  a(bond.right) += mode(1);
  return a;
}

CMatrix build_hopping_matrix(const LatticeConfig& cfg) {
  const int L = cfg.sites;
  CMatrix h = CMatrix::Zero(L, L);
  for (const auto& b : bonds(cfg)) {
    h(b.left, b.right) += 1.0;
    h(b.right, b.left) += 1.0;
  }
  return h;
}

CMatrix build_effective_matrix(const LatticeConfig& cfg) {
  const int L = cfg.sites;
  const double forward = 1.0 + cfg.gamma / 4.0;
  const double backward = 1.0 - cfg.gamma / 4.0;
  const Complex loss(0.0, -cfg.gamma / 4.0);
  CMatrix h = CMatrix::Zero(L, L);
  for (const auto& b : bonds(cfg)) {
    h(b.left, b.right) += forward;
    h(b.right, b.left) += backward;
    h(b.left, b.left) += loss;
    h(b.right, b.right) += loss;
  }
  return h;
}

std::vector<JumpSpec> build_jump_specs(const LatticeConfig& cfg) {
  const double norm = 1.0 / std::sqrt(2.0);
  std::vector<JumpSpec> specs;
  for (const auto& b : bonds(cfg)) {
    JumpSpec spec;
    spec.bond = b;
    spec.mode << Complex(norm, 0.0), Complex(0.0, -norm);
    spec.feedback_phase = cfg.theta;
    specs.push_back(spec);
  }
  return specs;
}

CMatrix build_feedback_matrix(const JumpSpec& spec, int sites) {
  if (spec.bond.right < 0 || spec.bond.right >= sites) {
    throw ConfigError(fmt::format("bond site {} outside a chain of {} sites", spec.bond.right, sites));
  }
  CMatrix u = CMatrix::Identity(sites, sites);
  u(spec.bond.right, spec.bond.right) = spec.feedback_factor();
  return u;
}

}  // namespace mise
