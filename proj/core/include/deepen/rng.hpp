#pragma once

#include <cmath>
#include <cstdint>
#include <utility>

namespace deepen {

/// Counter-based pseudo-random stream. The output at draw index n is a pure
/// function of (key, n), so a stream can be replayed from any point and
/// independent substreams can be forked cheaply for parallel work.
class RngStream {
 public:
  RngStream() : RngStream(0) {}
  explicit RngStream(std::uint64_t seed) : key_(mix(seed ^ kKeySalt)), counter_(0) {}

  std::uint64_t next_u64() {
    ++counter_;
    return mix(key_ + kGamma * counter_);
  }

  /// Uniform in [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Two independent N(0,1) draws via Box-Muller.
  std::pair<double, double> normal_pair() {
    const double u1 = 1.0 - uniform01();  // (0, 1], keeps log finite
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * kPi * u2;
    return {r * std::cos(a), r * std::sin(a)};
  }

  double normal() { return normal_pair().first; }

  /// Independent stream derived from this stream's key and an index.
  /// Does not advance this stream.
  RngStream substream(std::uint64_t index) const {
    RngStream s;
    s.key_ = mix(key_ ^ mix(index + kForkSalt));
    s.counter_ = 0;
    return s;
  }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  // SplitMix64 finalizer; full-period bijective mixing of the counter state.
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;
  static constexpr std::uint64_t kKeySalt = 0xD1B54A32D192ED03ull;
  static constexpr std::uint64_t kForkSalt = 0x8CB92BA72F3D8DD7ull;
  static constexpr double kPi = 3.14159265358979323846;

  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace deepen
