#pragma once

#include "tenkf/core.hpp"

#include <cstdint>
#include <random>

namespace tenkf {

using Rng = std::mt19937_64;

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Hierarchical seed. Every random draw in the library comes from a stream whose
/// seed is a pure function of (master seed, path of child indices), so results do
/// not depend on scheduling or thread count.
class StreamKey {
public:
  constexpr StreamKey() = default;
  constexpr explicit StreamKey(std::uint64_t master) : value_(mix64(master)) {}

  constexpr StreamKey child(std::uint64_t index) const {
    StreamKey k;
    k.value_ = mix64(value_ ^ mix64(index + 0x632be59bd9b4e019ULL));
    return k;
  }
  constexpr std::uint64_t value() const { return value_; }
  Rng rng() const { return Rng(value_); }

private:
  std::uint64_t value_ = 0x853c49e6748fea9bULL;
};

/// Named sub-streams of a replicate.
enum class Stream : std::uint64_t {
  Truth = 1,
  InitialEnsemble = 2,
  Forecast = 3,
  Update = 4,
  Augment = 5,
  AugmentForecast = 6,
};

inline StreamKey operator/(const StreamKey& k, Stream s) {
  return k.child(static_cast<std::uint64_t>(s));
}

// Column-major fill order; the draw sequence is part of the reproducibility contract.
template <typename MatrixLike>
void fill_standard_normal(MatrixLike&& out, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index j = 0; j < out.cols(); ++j)
    for (Index i = 0; i < out.rows(); ++i) out(i, j) = normal(rng);
}

inline Vector standard_normal(Index size, Rng& rng) {
  Vector v(size);
  fill_standard_normal(v, rng);
  return v;
}

}  // namespace tenkf
