#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "sav/numerics/grid.hpp"

namespace sav {

// PCG32 (XSH-RR 64/32) with the reference multiplier and the reference
// pcg32_srandom seeding procedure. Identical (seed, stream) pairs produce the
// same draws on every platform.
class Rng {
 public:
  static constexpr std::uint64_t kMultiplier = 6364136223846793005ULL;

  explicit Rng(std::uint64_t seed = 0x853c49e6748fea9bULL, std::uint64_t stream = 0xda3e39cb94b95bdbULL)
      : seed_(seed), stream_(stream) {
    inc_ = (stream << 1u) | 1u;
    state_ = 0;
    next_u32();
    state_ += seed;
    next_u32();
    draws_ = 0;
  }

  std::uint32_t next_u32() {
    const std::uint64_t old = state_;
    state_ = old * kMultiplier + inc_;
    const auto xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
    const auto rot = static_cast<std::uint32_t>(old >> 59u);
    ++draws_;
    return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u32()) * (1.0 / 4294967296.0); }

  // Uniform integer in [0, n) by rejection (unbiased).
  std::uint32_t below(std::uint32_t n) {
    require(n > 0, "Rng::below(0)");
    const std::uint32_t threshold = (0u - n) % n;
    for (;;) {
      const std::uint32_t r = next_u32();
      if (r >= threshold) return r % n;
    }
  }

  bool bernoulli(double p) { return uniform() < p; }

  // One Box-Muller pair from exactly two 32-bit draws. u1 lies in (0, 1] so
  // the log is always finite.
  std::pair<double, double> gaussian_pair() {
    const double u1 = (static_cast<double>(next_u32()) + 1.0) * (1.0 / 4294967296.0);
    const double u2 = static_cast<double>(next_u32()) * (1.0 / 4294967296.0);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(theta), r * std::sin(theta)};
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  // Number of 32-bit draws consumed so far; used to audit stream positions.
  std::uint64_t draws() const { return draws_; }

 private:
  std::uint64_t state_ = 0;
  std::uint64_t inc_ = 0;
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t draws_ = 0;
};

// Fixed stream identifiers so independent consumers never share a sequence.
namespace streams {
inline constexpr std::uint64_t kInit = 11;
inline constexpr std::uint64_t kData = 23;
inline constexpr std::uint64_t kTrain = 37;
inline constexpr std::uint64_t kSampler = 41;
inline constexpr std::uint64_t kEval = 53;
inline constexpr std::uint64_t kFeature = 67;
}  // namespace streams

// i.i.d. standard normal grid. Values are produced pairwise; for an odd count
// the second value of the last pair is discarded.
inline FloatGrid gaussian(Rng& rng, const Shape& shape) {
  require(!shape.empty(), "gaussian: shape must be non-empty");
  FloatGrid out(shape);
  auto data = out.data();
  std::size_t i = 0;
  while (i < data.size()) {
    auto [a, b] = rng.gaussian_pair();
    data[i++] = a;
    if (i < data.size()) data[i++] = b;
  }
  return out;
}

inline FloatGrid uniform_grid(Rng& rng, const Shape& shape, double lo, double hi) {
  FloatGrid out(shape);
  for (auto& v : out.data()) v = lo + (hi - lo) * rng.uniform();
  return out;
}

}  // namespace sav
