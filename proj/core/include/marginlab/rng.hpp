#pragma once

#include <cstdint>
#include <limits>

namespace marginlab {

/// Counter-based random bit generator keyed by a 64-bit value.
///
/// Output i is a SplitMix64 finalization of (key, i), so streams are cheap to
/// split: `substream(tag)` derives an independent key without advancing the
/// parent. Every sample, restart and Monte-Carlo batch owns a substream, which
/// keeps results identical when n, restart count or worker count changes.
/// Satisfies UniformRandomBitGenerator.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t key) noexcept : key_(mix(key)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
    return mix(key_ + kGolden * (++counter_));
  }

  CounterRng substream(std::uint64_t tag) const noexcept;

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  /// Standard normal deviate (Box-Muller, one value per call).
  double normal() noexcept;

  std::uint64_t key() const noexcept { return key_; }

  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z += kGolden;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  struct Raw {};
  CounterRng(std::uint64_t key, Raw) noexcept : key_(key) {}

  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Substream tags used across modules; keeping them in one place avoids
// accidental stream reuse between, say, training data and test draws.
namespace stream_tag {
inline constexpr std::uint64_t kSamples = 0x5A4D;
inline constexpr std::uint64_t kTestDraws = 0x7E57;
inline constexpr std::uint64_t kOppositeDraws = 0x0990;
inline constexpr std::uint64_t kSolver = 0x501F;
inline constexpr std::uint64_t kTrainer = 0x7A1B;
inline constexpr std::uint64_t kDirections = 0xD1EC;
}  // namespace stream_tag

}  // namespace marginlab
