#pragma once

#include <string_view>
#include <vector>

#include "mise/types.hpp"

namespace mise {

enum class Boundary { open, periodic };

std::string_view to_string(Boundary bc);
Boundary parse_boundary(std::string_view text);

/// Parameters of the monitored chain.
///
/// `gamma` is the measurement rate, `theta` the phase of the feedback gate
/// applied after a detected jump, `interaction` the nearest-neighbour
/// density-density coupling (used by the dense engines only).
struct LatticeConfig {
  int sites = 2;
  Boundary boundary = Boundary::open;
  double gamma = 0.0;
  double theta = pi;
  double interaction = 0.0;

  /// Throws ConfigError when the configuration is unusable.
  void validate() const;

  /// L - 1 bonds for open chains, L for periodic ones.
  int bond_count() const;
};

/// A monitored bond between `left` and `right = left + 1 (mod L)`, zero-based.
struct Bond {
  int left = 0;
  int right = 1;
};

std::vector<Bond> bonds(const LatticeConfig& cfg);

/// One monitored bond. The detected quasimode is a = (e_left - i e_right)/sqrt(2),
/// the jump operator is exp(i theta n_right) |a><a|.
struct JumpSpec {
  Bond bond;
  Eigen::Vector2cd mode;
  double feedback_phase = 0.0;

  /// The mode vector embedded in an L-site chain.
  CVector mode_vector(int sites) const;

  Complex feedback_factor() const { return std::polar(1.0, feedback_phase); }
};

/// Free nearest-neighbour hopping matrix h with H = sum_ij h_ij c_i^dag c_j.
CMatrix build_hopping_matrix(const LatticeConfig& cfg);

/// Single-particle matrix of H - (i gamma / 2) sum_m P_m: asymmetric hopping
/// 1 + gamma/4 on (i, i+1), 1 - gamma/4 on (i+1, i), and -i gamma/4 on the
/// diagonal for every monitored bond touching a site.
CMatrix build_effective_matrix(const LatticeConfig& cfg);

std::vector<JumpSpec> build_jump_specs(const LatticeConfig& cfg);

/// Diagonal unitary with exp(i theta) on the right site of the bond.
CMatrix build_feedback_matrix(const JumpSpec& spec, int sites);

}  // namespace mise
