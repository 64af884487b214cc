#include "l2gd/rng.hpp"

#include <limits>
#include <string>

#include "l2gd/errors.hpp"

namespace l2gd {

std::uint64_t CounterRng::below(std::uint64_t n) noexcept {
  // Reject the top partial bucket so every residue is equally likely.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t u = next_u64();
  while (u >= limit) u = next_u64();
  return u % n;
}

CoinStream::CoinStream(std::uint64_t seed, double p)
    : rng_(derive_key(seed, "coin")), p_(p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw ConfigError("coin probability must lie in (0,1), got " + std::to_string(p));
  }
}

bool CoinStream::at(std::uint64_t k) const noexcept { return to_unit(rng_.at(k)) < p_; }

}  // namespace l2gd
