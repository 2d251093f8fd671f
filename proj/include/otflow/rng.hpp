#pragma once

#include <cstdint>

namespace otflow {

// splitmix64: the single randomness source of the project.  Counter-based,
// so identical seeds give identical streams on every platform.
// Constants: increment 0x9E3779B97F4A7C15, mixers 0xBF58476D1CE4E5B9 and
// 0x94D049BB133111EB with shifts 30/27/31.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  // Independent deterministic generator for a tagged sub-task of this seed.
  SplitMix64 substream(std::uint64_t tag) const {
    SplitMix64 d(state_ ^ (0x9E3779B97F4A7C15ull * (tag + 1)));
    return SplitMix64(d.next_u64());
  }

 private:
  std::uint64_t state_;
};

}  // namespace otflow
