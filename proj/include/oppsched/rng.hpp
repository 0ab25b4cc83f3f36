#pragma once

#include <cstdint>
#include <random>

namespace oppsched {

using Rng = std::mt19937_64;

/// Independent stream for replication `stream` of a run seeded with `master`.
inline Rng make_rng(std::uint64_t master, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      0x6f707073u};
    return Rng(seq);
}

}  // namespace oppsched
