#pragma once

#include <array>
#include <cstdint>

namespace mise {

/// Philox4x32-10 block function (Salmon et al., SC'11). Stateless: the same
/// (counter, key) always yields the same 128 output bits.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter block(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85;
};

/// Uniform draws r in (0, 1) addressed by (step, bond) under a 64-bit seed.
///
/// The value for a given address never depends on which other addresses
/// were drawn or in which order, so trajectories are reproducible under any
/// scheduling.
class JumpDecisionStream {
 public:
  explicit JumpDecisionStream(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  double draw(std::uint64_t step, std::uint32_t bond) const { return draw(step, bond, 0); }

  /// Independent channel used to shuffle jump order when requested.
  double draw_order_key(std::uint64_t step, std::uint32_t bond) const { return draw(step, bond, 1); }

 private:
  double draw(std::uint64_t step, std::uint32_t bond, std::uint32_t channel) const {
    const auto out = Philox4x32::block(
        {static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32), bond, channel},
        {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)});
    const std::uint64_t bits = ((std::uint64_t{out[0]} << 32) | out[1]) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  std::uint64_t seed_;
};

}  // namespace mise
