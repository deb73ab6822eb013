#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace divi {

using Rng = std::mt19937_64;

// Derives an independent sub-seed for a named stage ("datagen", "prior",
// "train.noise", ...) from a run's root seed. Stages never share a stream,
// so changing how much randomness one stage consumes leaves the others intact.
std::uint64_t derive_seed(std::uint64_t root, std::string_view label);

inline Rng make_rng(std::uint64_t root, std::string_view label)
{
    return Rng(derive_seed(root, label));
}

} // namespace divi
