#pragma once

#include <cmath>
#include <cstdint>

namespace ltrc {

// SplitMix64 counter generator. Substreams are derived from (master seed,
// stream index) so trial k always sees the same draws regardless of how many
// trials run or in what order.
class rng {
 public:
  explicit rng(std::uint64_t seed) : state_(seed) {}

  static rng substream(std::uint64_t master, std::uint64_t stream) {
    return rng(mix(master + golden * (stream + 1)));
  }

  std::uint64_t next() {
    state_ += golden;
    return mix(state_);
  }

  // Uniform on (0, 1): low bit forced so 0 and 1 are never produced.
  double uniform() {
    return static_cast<double>((next() >> 11) | 1u) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // Inclusive range.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(next() % span);
  }

  double exponential(double rate) { return -std::log(uniform()) / rate; }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  static constexpr std::uint64_t golden = 0x9E3779B97F4A7C15ull;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace ltrc
