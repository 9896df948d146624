#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string_view>

namespace diffnoise {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// The 64-bit key is the user seed; the upper half of the 128-bit counter is
/// the stream index, the lower half counts blocks within the stream. Two
/// generators with the same (seed, stream) produce identical sequences, and
/// distinct streams never overlap, so Monte Carlo replications can be run in
/// any order or in parallel.
class Philox4x32 {
 public:
  using result_type = std::uint64_t;

  explicit Philox4x32(std::uint64_t seed = 0, std::uint64_t stream = 0) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    if (index_ == 2) {
      refill();
    }
    return buffer_[index_++];
  }

  void discard(unsigned long long z) noexcept {
    for (; z > 0; --z) {
      (*this)();
    }
  }

  /// Repositions the generator at the start of counter block `block` (two
  /// outputs per block) within the current stream.
  void seek(std::uint64_t block) noexcept {
    block_ = block;
    index_ = 2;
  }

  std::uint64_t seed() const noexcept {
    return (static_cast<std::uint64_t>(key_[1]) << 32) | key_[0];
  }
  std::uint64_t stream() const noexcept { return stream_; }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

 private:
  void refill() noexcept;

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int index_ = 2;
};

/// (seed, stream) pair used wherever an operation is "deterministic given seed".
struct StreamSeed {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  StreamSeed() = default;
  StreamSeed(std::uint64_t s, std::uint64_t st = 0) : seed(s), stream(st) {}  // NOLINT

  Philox4x32 engine() const noexcept { return Philox4x32(seed, stream); }
};

/// SplitMix64 finalizer; used to derive independent keys from a master seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) noexcept;

/// Stable 64-bit key for a text label (FNV-1a, then mixed).
std::uint64_t label_key(std::string_view label) noexcept;

}  // namespace diffnoise
