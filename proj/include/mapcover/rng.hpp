#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace mapcover {

// Philox4x32-10 counter-based generator (Salmon et al. 2011). Chosen over the
// stdlib engines because output is a pure function of (key, counter): every
// agent gets its own key and every step its own counter, so simulations are
// reproducible regardless of agent iteration order or thread count.
struct Philox4x32 {
  static constexpr std::uint32_t kMulA = 0xD2511F53u;
  static constexpr std::uint32_t kMulB = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeylA = 0x9E3779B9u;
  static constexpr std::uint32_t kWeylB = 0xBB67AE85u;

  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                            std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t pa = static_cast<std::uint64_t>(kMulA) * ctr[0];
      const std::uint64_t pb = static_cast<std::uint64_t>(kMulB) * ctr[2];
      const std::uint32_t lo_a = static_cast<std::uint32_t>(pa);
      const std::uint32_t hi_a = static_cast<std::uint32_t>(pa >> 32);
      const std::uint32_t lo_b = static_cast<std::uint32_t>(pb);
      const std::uint32_t hi_b = static_cast<std::uint32_t>(pb >> 32);
      ctr = {hi_b ^ ctr[1] ^ key[0], lo_b, hi_a ^ ctr[3] ^ key[1], lo_a};
      key[0] += kWeylA;
      key[1] += kWeylB;
    }
    return ctr;
  }
};

// One Philox block of derived variates: two standard normals (Box-Muller) and
// two uniforms in [0,1). Box-Muller keeps normals bit-reproducible; the
// distribution algorithms in <random> are implementation-defined.
struct RandomBlock {
  double z1, z2;  // N(0,1)
  double u1, u2;  // U[0,1)
};

inline double uniform01_open(std::uint32_t x) {
  // (0,1): safe for log().
  return (static_cast<double>(x) + 0.5) * 0x1p-32;
}

inline double uniform01(std::uint32_t x) {
  // [0,1)
  return static_cast<double>(x) * 0x1p-32;
}

inline RandomBlock draw_block(std::uint64_t seed, std::uint32_t stream,
                              std::uint64_t counter) {
  const std::array<std::uint32_t, 2> key = {
      static_cast<std::uint32_t>(seed),
      static_cast<std::uint32_t>(seed >> 32) ^ stream};
  const std::array<std::uint32_t, 4> ctr = {
      static_cast<std::uint32_t>(counter),
      static_cast<std::uint32_t>(counter >> 32), 0u, 0u};
  const auto r = Philox4x32::block(ctr, key);
  const double a = uniform01_open(r[0]);
  const double b = uniform01(r[1]);
  const double rad = std::sqrt(-2.0 * std::log(a));
  const double ang = 2.0 * std::numbers::pi * b;
  return RandomBlock{rad * std::cos(ang), rad * std::sin(ang), uniform01(r[2]),
                     uniform01(r[3])};
}

// Sequential convenience wrapper for tests and one-off sampling.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint32_t stream = 0)
      : seed_(seed), stream_(stream) {}

  RandomBlock next_block() { return draw_block(seed_, stream_, counter_++); }

  // Each block yields two of either variate; unused halves are cached per
  // kind so interleaved uniform()/normal() calls never cross-contaminate.
  double uniform() {
    if (have_u_) {
      have_u_ = false;
      return cached_u_;
    }
    RandomBlock b = next_block();
    cached_u_ = b.u2;
    have_u_ = true;
    return b.u1;
  }

  double normal() {
    if (have_z_) {
      have_z_ = false;
      return cached_z_;
    }
    RandomBlock b = next_block();
    cached_z_ = b.z2;
    have_z_ = true;
    return b.z1;
  }

 private:
  std::uint64_t seed_;
  std::uint32_t stream_;
  std::uint64_t counter_ = 0;
  double cached_u_ = 0.0, cached_z_ = 0.0;
  bool have_u_ = false, have_z_ = false;
};

}  // namespace mapcover
