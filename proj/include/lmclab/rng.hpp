#pragma once

// Counter-based random numbers: every draw is a pure function of
// (seed, chain, step, block), so chains can run on any worker in any order.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

namespace lmc {

// Philox4x32-10 (Salmon et al., SC'11).
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter apply(Counter ctr, Key key) noexcept {
    ctr = round(ctr, key);
    for (int i = 1; i < 10; ++i) {
      key[0] += kW0;
      key[1] += kW1;
      ctr = round(ctr, key);
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kM0 = 0xD2511F53u;
  static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kW0 = 0x9E3779B9u;
  static constexpr std::uint32_t kW1 = 0xBB67AE85u;

  static Counter round(const Counter& c, const Key& k) noexcept {
    const std::uint64_t p0 = std::uint64_t{kM0} * c[0];
    const std::uint64_t p1 = std::uint64_t{kM1} * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

/// Standard normals keyed by (seed, chain, step). Step -1 is reserved for
/// initialization; block b yields the normals for coordinates 2b and 2b+1.
class NoiseStream {
 public:
  explicit NoiseStream(std::uint64_t seed) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

  std::pair<double, double> normal_pair(std::uint64_t chain, std::int64_t step,
                                        std::uint32_t block) const noexcept {
    const auto s = static_cast<std::uint64_t>(step + 1);
    const Philox4x32::Counter ctr{static_cast<std::uint32_t>(chain), block,
                                  static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32)};
    const auto out = Philox4x32::apply(ctr, key_);
    const std::uint64_t w0 = (std::uint64_t{out[0]} << 32) | out[1];
    const std::uint64_t w1 = (std::uint64_t{out[2]} << 32) | out[3];
    // u1 in (0, 1], u2 in [0, 1)
    const double u1 = (static_cast<double>(w0 >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(w1 >> 11) * 0x1.0p-53;
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = 2.0 * std::numbers::pi * u2;
    return {rad * std::cos(ang), rad * std::sin(ang)};
  }

  // Fills out[0..d) with the standard normals of (chain, step).
  template <typename Out>
  void fill(std::uint64_t chain, std::int64_t step, int d, Out&& out) const noexcept {
    for (int j = 0; j < d; j += 2) {
      const auto [z0, z1] = normal_pair(chain, step, static_cast<std::uint32_t>(j / 2));
      out[j] = z0;
      if (j + 1 < d) out[j + 1] = z1;
    }
  }

  // Uniform in [0, 1) keyed by (stream, index); used by audits and bootstraps.
  double uniform(std::uint64_t stream, std::uint64_t index) const noexcept {
    const Philox4x32::Counter ctr{static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                                  static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32) ^ 0x5A5A5A5Au};
    const auto out = Philox4x32::apply(ctr, key_);
    const std::uint64_t w = (std::uint64_t{out[0]} << 32) | out[1];
    return static_cast<double>(w >> 11) * 0x1.0p-53;
  }

 private:
  Philox4x32::Key key_;
};

// Radical-inverse Halton point, coordinate `axis` of point `index` (axis < 32).
inline double halton(std::uint64_t index, int axis) {
  static constexpr std::array<std::uint32_t, 32> primes{2,  3,  5,  7,  11, 13, 17, 19, 23,  29,  31,
                                                        37, 41, 43, 47, 53, 59, 61, 67, 71,  73,  79,
                                                        83, 89, 97, 101, 103, 107, 109, 113, 127, 131};
  const std::uint32_t base = primes[static_cast<size_t>(axis) % primes.size()];
  double f = 1.0;
  double r = 0.0;
  std::uint64_t i = index + 1;
  while (i > 0) {
    f /= base;
    r += f * static_cast<double>(i % base);
    i /= base;
  }
  return r;
}

}  // namespace lmc
