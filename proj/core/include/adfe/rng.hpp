#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace adfe {

using Rng = std::mt19937_64;

/// Derive an independent seed for a named substream of a root seed.
/// The same (root, name) pair always yields the same seed.
std::uint64_t substream_seed(std::uint64_t root, std::string_view name);

/// Derive a seed for the i-th member of a family of substreams.
std::uint64_t substream_seed(std::uint64_t root, std::string_view name, std::uint64_t index);

inline Rng make_rng(std::uint64_t root, std::string_view name) {
    return Rng(substream_seed(root, name));
}

/// Uniform double in [0, 1) built from the top 53 bits.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n).
std::size_t uniform_index(Rng& rng, std::size_t n);

/// Draw from a Dirichlet with the given concentrations.
std::vector<double> sample_dirichlet(Rng& rng, std::span<const double> alpha);

/// Draw an index from unnormalized nonnegative weights.
std::size_t sample_categorical(Rng& rng, std::span<const double> weights);

}  // namespace adfe
