#pragma once

#include <cstdint>
#include <random>

namespace moran {

using Rng = std::mt19937_64;

/// Independent stream for replicate `replicate` of a run seeded with `seed`.
/// The stream depends only on the pair, so replicates can run in any order.
inline Rng make_stream(std::uint64_t seed, std::uint64_t replicate) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(replicate),
                    static_cast<std::uint32_t>(replicate >> 32), 0x6d6f72u};
  return Rng(seq);
}

}  // namespace moran
