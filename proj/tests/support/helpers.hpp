#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "adfe/corpus.hpp"
#include "adfe/model.hpp"
#include "adfe/rng.hpp"

namespace adfe::test {

inline Matrix random_stochastic(Rng& rng, std::size_t rows, std::size_t cols, double conc = 1.0) {
    Matrix m(rows, cols);
    std::vector<double> alpha(cols, conc);
    for (std::size_t r = 0; r < rows; ++r) {
        auto p = sample_dirichlet(rng, alpha);
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = p[c];
    }
    return m;
}

inline PointParams random_point_params(Rng& rng, std::size_t K, std::size_t V1, std::size_t V2,
                                       std::size_t M, double conc = 1.0) {
    PointParams p;
    p.A1 = random_stochastic(rng, K, V1, conc);
    p.A2 = random_stochastic(rng, K, V2, conc);
    for (std::size_t m = 0; m < M; ++m) p.B.push_back(random_stochastic(rng, K, K, conc));
    p.D = sample_dirichlet(rng, std::vector<double>(K, conc));
    return p;
}

/// Concentrations drawn uniformly from [lo, hi].
inline ModelParams random_model(Rng& rng, std::size_t K, std::size_t V1, std::size_t V2,
                                std::size_t M, double lo = 0.5, double hi = 3.0) {
    ModelParams t;
    t.meta = {K, V1, V2, M, kDefaultSegmentSeconds};
    auto fill = [&](Matrix& m, std::size_t r, std::size_t c) {
        m = Matrix(r, c);
        for (auto& x : m.data()) x = lo + (hi - lo) * uniform01(rng);
    };
    fill(t.alpha_A1, K, V1);
    fill(t.alpha_A2, K, V2);
    t.alpha_B.resize(M);
    for (auto& b : t.alpha_B) fill(b, K, K);
    t.alpha_D.resize(K);
    for (auto& x : t.alpha_D) x = lo + (hi - lo) * uniform01(rng);
    return t;
}

inline EncodedSequence make_sequence(std::vector<std::size_t> vis, std::vector<std::size_t> aud,
                                     std::vector<std::size_t> seg = {}) {
    EncodedSequence s;
    s.video_id = "v";
    if (seg.empty()) seg.assign(vis.size(), 0);
    s.obs_visual = std::move(vis);
    s.obs_audio = std::move(aud);
    s.segment_of = std::move(seg);
    return s;
}

/// Random sequence of length T with non-decreasing segment indices in [0, M).
inline EncodedSequence random_sequence(Rng& rng, std::size_t T, std::size_t V1, std::size_t V2,
                                       std::size_t M) {
    EncodedSequence s;
    s.video_id = "r";
    std::size_t seg = 0;
    for (std::size_t t = 0; t < T; ++t) {
        s.obs_visual.push_back(uniform_index(rng, V1));
        s.obs_audio.push_back(uniform_index(rng, V2));
        if (t && seg + 1 < M && uniform01(rng) < 0.5) ++seg;
        s.segment_of.push_back(seg);
    }
    return s;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("adfe_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace adfe::test

namespace adfe::test {

struct Blobs {
    Matrix points;
    std::vector<std::size_t> labels;
};

/// `k` isotropic Gaussian blobs in `dim` dimensions with centres spaced
/// `separation` apart along distinct axes; `per` points each.
inline Blobs planted_blobs(std::size_t k, std::size_t per, std::size_t dim, double separation,
                           std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    Blobs b;
    b.points = Matrix(k * per, dim);
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t i = 0; i < per; ++i) {
            const std::size_t r = c * per + i;
            for (std::size_t d = 0; d < dim; ++d)
                b.points(r, d) = noise(rng) + (d % k == c ? separation : 0.0);
            b.labels.push_back(c);
        }
    return b;
}

}  // namespace adfe::test
