#pragma once

#include <cmath>
#include <cstdint>

#include "icph/numeric.hpp"

namespace icph {

namespace detail {
// SplitMix64 finalizer; also used to derive stream keys.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}
}  // namespace detail

// Counter-based stream keyed by (seed, replicate, subject). Streams are
// independent of how work is scheduled across threads, so replicate-level
// parallelism cannot change the generated data.
class SubjectRng {
 public:
  SubjectRng(std::uint64_t seed, std::uint64_t replicate, std::uint64_t subject) {
    state_ = detail::mix64(seed + 0x9E3779B97F4A7C15ull);
    state_ = detail::mix64(state_ ^ (replicate + 0xD1B54A32D192ED03ull));
    state_ = detail::mix64(state_ ^ (subject + 0x8CB92BA72F3D8DD7ull));
  }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    return detail::mix64(state_);
  }

  // Strictly inside (0,1): offset by half an ulp of the 53-bit grid.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Inverse-CDF draws keep sequences stable across platforms.
  double normal() { return norm_ppf(uniform()); }

  double exponential(double mean) { return -mean * std::log1p(-uniform()); }

  bool bernoulli(double p) { return uniform() < p; }

  // Uniform on integers {1, ..., m}.
  int uniform_int_1_to(int m) {
    int v = 1 + static_cast<int>(uniform() * m);
    return v > m ? m : v;
  }

 private:
  std::uint64_t state_;
};

}  // namespace icph
