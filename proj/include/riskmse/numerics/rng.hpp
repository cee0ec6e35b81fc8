#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include "riskmse/errors.hpp"

namespace riskmse {

// Counter-based random numbers (Philox 4x32-10). Every draw is a pure
// function of (seed, stream, counter), so parallel consumers that partition
// the counter space produce identical values regardless of scheduling.
namespace philox {

inline constexpr std::uint32_t kW32A = 0x9E3779B9u;
inline constexpr std::uint32_t kW32B = 0xBB67AE85u;
inline constexpr std::uint32_t kM4x32A = 0xD2511F53u;
inline constexpr std::uint32_t kM4x32B = 0xCD9E8D57u;

inline void round_once(std::array<std::uint32_t, 4>& ctr, const std::array<std::uint32_t, 2>& key) {
  const std::uint64_t p0 = static_cast<std::uint64_t>(kM4x32A) * ctr[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(kM4x32B) * ctr[2];
  const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
  const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
  const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
  ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
}

inline std::array<std::uint32_t, 4> block(std::uint64_t key, std::array<std::uint32_t, 4> ctr) {
  std::array<std::uint32_t, 2> k = {static_cast<std::uint32_t>(key),
                                    static_cast<std::uint32_t>(key >> 32)};
  for (int r = 0; r < 10; ++r) {
    if (r > 0) {
      k[0] += kW32A;
      k[1] += kW32B;
    }
    round_once(ctr, k);
  }
  return ctr;
}

}  // namespace philox

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// A named position in the counter space: (seed, stream). Substreams are
// derived deterministically, so sample k of a batch always sees the same
// values no matter how work is split across threads.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

  RngStream substream(std::uint64_t k) const {
    return RngStream(seed_, splitmix64(stream_ ^ splitmix64(k + 0x51E15EEDull)), 0);
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  RngStream(std::uint64_t seed, std::uint64_t stream, int) : seed_(seed), stream_(stream) {}
  std::uint64_t seed_;
  std::uint64_t stream_;
};

// Sequential draw interface over one stream.
class Sampler {
 public:
  explicit Sampler(const RngStream& s)
      : key_(splitmix64(s.seed()) ^ 0x243F6A8885A308D3ull), stream_(s.stream()) {}

  std::uint64_t next_u64() {
    if (have_ == 0) {
      const std::array<std::uint32_t, 4> ctr = {
          static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
          static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
      buf_ = philox::block(key_, ctr);
      ++counter_;
      have_ = 2;
    }
    --have_;
    const int base = 2 * (1 - have_);
    return (static_cast<std::uint64_t>(buf_[base]) << 32) | buf_[base + 1];
  }

  // Uniform on the open interval (0, 1); never returns an exact endpoint.
  double u01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller. Consumes two uniforms per call.
  double normal() {
    const double u1 = u01();
    const double u2 = u01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  double exponential(double mean) {
    if (!(mean > 0.0)) throw InvalidInput("Sampler::exponential: mean must be positive");
    return -mean * std::log(u01());
  }

 private:
  std::uint64_t key_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> buf_{};
  int have_ = 0;
};

}  // namespace riskmse
