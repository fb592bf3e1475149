#include "adfe/rng.hpp"

#include "adfe/error.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace adfe {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// FNV-1a
std::uint64_t hash_name(std::string_view name) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : name) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

std::uint64_t substream_seed(std::uint64_t root, std::string_view name) {
    return splitmix64(splitmix64(root) ^ hash_name(name));
}

std::uint64_t substream_seed(std::uint64_t root, std::string_view name, std::uint64_t index) {
    return splitmix64(substream_seed(root, name) + splitmix64(index + 1));
}

std::size_t uniform_index(Rng& rng, std::size_t n) {
    if (n == 0) throw InvalidArgument("uniform_index: empty range");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return static_cast<std::size_t>(x % n);
}

std::vector<double> sample_dirichlet(Rng& rng, std::span<const double> alpha) {
    std::vector<double> out(alpha.size());
    double total = 0.0;
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        if (!(alpha[i] > 0.0)) throw InvalidArgument("sample_dirichlet: concentration must be > 0");
        std::gamma_distribution<double> g(alpha[i], 1.0);
        out[i] = g(rng);
        total += out[i];
    }
    if (!(total > 0.0)) {
        // every gamma draw underflowed; fall back to a point mass at a random index
        std::fill(out.begin(), out.end(), 0.0);
        out[uniform_index(rng, out.size())] = 1.0;
        return out;
    }
    for (double& v : out) v /= total;
    return out;
}

std::size_t sample_categorical(Rng& rng, std::span<const double> weights) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (!(total > 0.0)) throw InvalidArgument("sample_categorical: weights sum to zero");
    const double u = uniform01(rng) * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (u < acc) return i;
    }
    // rounding: return the last index with positive weight
    for (std::size_t i = weights.size(); i-- > 0;)
        if (weights[i] > 0.0) return i;
    return weights.size() - 1;
}

}  // namespace adfe
