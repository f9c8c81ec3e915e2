#pragma once

#include <cstdint>
#include <random>

namespace advsparse {

using Rng = std::mt19937_64;

/// Named sub-streams derived from one master seed.
enum class Stream : std::uint32_t {
  kData = 1,
  kInit = 2,
  kShuffle = 3,
  kAttack = 4,
  kDirections = 5,
  kMonteCarlo = 6,
};

/// Independent generator for (master seed, stream, a, b). Built on
/// std::seed_seq so the derivation is fixed by the standard.
inline Rng make_rng(std::uint64_t master, Stream stream, std::uint64_t a = 0, std::uint64_t b = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(stream),  static_cast<std::uint32_t>(a),
                    static_cast<std::uint32_t>(a >> 32), static_cast<std::uint32_t>(b),
                    static_cast<std::uint32_t>(b >> 32)};
  return Rng(seq);
}

}  // namespace advsparse
