#pragma once

// Counter-based random numbers (Philox4x32-10, Salmon et al. 2011).
// Every draw is a pure function of (seed, stream, index), so parallel
// Monte Carlo stays reproducible regardless of worker count or path
// ordering, and adding paths never perturbs existing ones.

#include <array>
#include <cmath>
#include <cstdint>

namespace nsfde {

namespace detail {

inline constexpr std::uint32_t kPhiloxW32A = 0x9E3779B9u;
inline constexpr std::uint32_t kPhiloxW32B = 0xBB67AE85u;
inline constexpr std::uint32_t kPhiloxM4x32A = 0xD2511F53u;
inline constexpr std::uint32_t kPhiloxM4x32B = 0xCD9E8D57u;

inline void philox_round(std::array<std::uint32_t, 4>& ctr,
                         const std::array<std::uint32_t, 2>& key) {
  const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM4x32A) * ctr[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM4x32B) * ctr[2];
  const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
  const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
  const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
  ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
}

inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    philox_round(ctr, key);
    key[0] += kPhiloxW32A;
    key[1] += kPhiloxW32B;
  }
  return ctr;
}

// Uniform draw in (0, 1] from 53 random bits; never 0, so log() is safe.
inline double u01_open(std::uint64_t bits) {
  return static_cast<double>((bits >> 11) + 1) * 0x1.0p-53;
}

// Uniform draw in [0, 1).
inline double u01_halfopen(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace detail

/// One 128-bit Philox block keyed by (seed) with counter (index, stream).
inline std::array<std::uint32_t, 4> philox_block(std::uint64_t seed,
                                                 std::uint64_t stream,
                                                 std::uint64_t index) {
  const std::array<std::uint32_t, 4> ctr = {
      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed),
                                            static_cast<std::uint32_t>(seed >> 32)};
  return detail::philox4x32(ctr, key);
}

/// k-th standard normal of stream (seed, stream), stateless.
/// Each block yields a Box-Muller pair; k selects block k/2, lane k%2.
inline double normal_at(std::uint64_t seed, std::uint64_t stream, std::uint64_t k) {
  const auto out = philox_block(seed, stream, k >> 1);
  const std::uint64_t b0 = (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
  const std::uint64_t b1 = (static_cast<std::uint64_t>(out[2]) << 32) | out[3];
  const double u1 = detail::u01_open(b0);
  const double u2 = detail::u01_halfopen(b1);
  const double rad = std::sqrt(-2.0 * std::log(u1));
  const double ang = 6.283185307179586476925286766559 * u2;
  return (k & 1) ? rad * std::sin(ang) : rad * std::cos(ang);
}

/// k-th uniform(0,1] of stream (seed, stream), stateless.
inline double uniform_at(std::uint64_t seed, std::uint64_t stream, std::uint64_t k) {
  const auto out = philox_block(seed, stream ^ 0x9E3779B97F4A7C15ull, k >> 1);
  const std::uint64_t b = (k & 1)
      ? (static_cast<std::uint64_t>(out[2]) << 32) | out[3]
      : (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
  return detail::u01_open(b);
}

/// Sequential view of the same normals as normal_at(); caches the spare
/// Box-Muller lane so consecutive draws cost one Philox block per pair.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t stream)
      : seed_(seed), stream_(stream) {}

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const std::uint64_t k = next_index_;
    next_index_ += 2;
    const auto out = philox_block(seed_, stream_, k >> 1);
    const std::uint64_t b0 = (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
    const std::uint64_t b1 = (static_cast<std::uint64_t>(out[2]) << 32) | out[3];
    const double u1 = detail::u01_open(b0);
    const double u2 = detail::u01_halfopen(b1);
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = 6.283185307179586476925286766559 * u2;
    spare_ = rad * std::sin(ang);
    have_spare_ = true;
    return rad * std::cos(ang);
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t next_index_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace nsfde
