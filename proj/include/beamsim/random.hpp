#pragma once

#include <cstdint>
#include <random>

namespace beamsim {

using Rng = std::mt19937_64;

/// Independent engine for (seed, stream). Distinct streams of one seed do not
/// share state, so e.g. PSD noise and photon counting can be reseeded apart.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x5eedu};
  return Rng(seq);
}

}  // namespace beamsim
