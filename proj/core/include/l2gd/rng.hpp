#pragma once

#include <cstdint>
#include <string_view>

namespace l2gd {

/// SplitMix64 finalizer; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Stable 64-bit FNV-1a hash, used to derive stream keys from tags.
constexpr std::uint64_t hash_tag(std::string_view tag) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Key for the sub-stream `(tag, index)` of a run seeded with `seed`.
constexpr std::uint64_t derive_key(std::uint64_t seed, std::string_view tag,
                                   std::uint64_t index = 0) noexcept {
  return mix64(seed ^ hash_tag(tag) ^ mix64(index + 0x632BE59BD9B4E019ULL));
}

/// Maps a 64-bit word to [0, 1) using its top 53 bits.
constexpr double to_unit(std::uint64_t u) noexcept {
  return static_cast<double>(u >> 11) * 0x1.0p-53;
}

/// Counter-based generator: draw k is a pure function of (key, k), so every
/// stream is reproducible bit-for-bit regardless of platform or standard
/// library. The std:: distributions are avoided for the same reason.
class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t key) noexcept : key_(key) {}

  constexpr std::uint64_t at(std::uint64_t k) const noexcept {
    return mix64(key_ ^ mix64(k));
  }
  constexpr std::uint64_t next_u64() noexcept { return at(counter_++); }
  constexpr double uniform() noexcept { return to_unit(next_u64()); }
  constexpr bool bernoulli(double p) noexcept { return uniform() < p; }

  /// Uniform integer in [0, n) by rejection; n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept;

  constexpr std::uint64_t key() const noexcept { return key_; }
  constexpr std::uint64_t position() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Seeded Bernoulli(p) coin sequence; bit k depends only on (seed, p, k).
class CoinStream {
 public:
  /// Throws ConfigError unless 0 < p < 1.
  CoinStream(std::uint64_t seed, double p);

  bool at(std::uint64_t k) const noexcept;
  bool next() noexcept { return at(position_++); }
  std::uint64_t position() const noexcept { return position_; }
  double p() const noexcept { return p_; }

 private:
  CounterRng rng_;
  double p_;
  std::uint64_t position_ = 0;
};

}  // namespace l2gd
