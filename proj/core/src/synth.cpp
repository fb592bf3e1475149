#include "adfe/synth.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include <json.hpp>

#include "adfe/error.hpp"
#include "adfe/rng.hpp"

namespace adfe {

using nlohmann::json;

namespace {

constexpr std::size_t kMaxElementsPerModality = 20;

/// Choose `count` distinct element subsets, the empty set first, favouring
/// small subsets; ties in size are ordered randomly.
std::vector<std::vector<std::string>> choose_sets(const std::vector<std::string>& ids,
                                                  std::size_t count, Rng& rng) {
    const std::size_t n = ids.size();
    const std::size_t total = std::size_t{1} << n;
    std::vector<std::pair<std::pair<int, std::uint64_t>, std::size_t>> keyed;
    keyed.reserve(total);
    for (std::size_t mask = 0; mask < total; ++mask)
        keyed.push_back({{std::popcount(mask), rng()}, mask});
    std::sort(keyed.begin(), keyed.end());
    std::vector<std::vector<std::string>> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::vector<std::string> set;
        for (std::size_t b = 0; b < n; ++b)
            if (keyed[i].second & (std::size_t{1} << b)) set.push_back(ids[b]);
        std::sort(set.begin(), set.end());
        out.push_back(std::move(set));
    }
    return out;
}

Matrix dirichlet_rows(Rng& rng, std::size_t rows, std::size_t cols, double conc) {
    Matrix m(rows, cols);
    std::vector<double> alpha(cols, conc);
    for (std::size_t r = 0; r < rows; ++r) {
        auto p = sample_dirichlet(rng, alpha);
        std::copy(p.begin(), p.end(), m.row(r).begin());
    }
    return m;
}

double round_centis(double x) { return std::round(x * 100.0) / 100.0; }

/// Ensure every symbol in [0, V) occurs; overwrite scenes whose current
/// symbol is duplicated elsewhere.
std::size_t cover_symbols(std::vector<std::vector<std::size_t>>& obs, std::size_t V, Rng& rng) {
    std::vector<std::size_t> counts(V, 0);
    std::size_t scenes = 0;
    for (const auto& v : obs) {
        for (auto o : v) ++counts[o];
        scenes += v.size();
    }
    std::size_t patches = 0;
    for (std::size_t sym = 0; sym < V; ++sym) {
        if (counts[sym]) continue;
        for (std::size_t attempt = 0; attempt < 64 * scenes; ++attempt) {
            auto& video = obs[uniform_index(rng, obs.size())];
            auto& slot = video[uniform_index(rng, video.size())];
            if (counts[slot] < 2) continue;
            --counts[slot];
            slot = sym;
            ++counts[sym];
            ++patches;
            break;
        }
        if (!counts[sym]) throw InvalidArgument("generate_corpus: not enough scenes to cover every symbol");
    }
    return patches;
}

json matrix_json(const Matrix& m) {
    json rows = json::array();
    for (std::size_t r = 0; r < m.rows(); ++r)
        rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
    return rows;
}

}  // namespace

std::size_t GenSpec::segments() const {
    return M ? M : segment_count(duration_sec, segment_seconds);
}

void GenSpec::validate(const ElementRegistry& registry) const {
    if (K == 0) throw InvalidArgument("gen spec: K must be >= 1");
    if (V1 == 0 || V2 == 0) throw InvalidArgument("gen spec: V1 and V2 must be >= 1");
    if (videos == 0) throw InvalidArgument("gen spec: videos must be >= 1");
    if (min_scenes == 0 || max_scenes < min_scenes)
        throw InvalidArgument("gen spec: need 1 <= min_scenes <= max_scenes");
    if (mean_scenes < static_cast<double>(min_scenes) || mean_scenes > static_cast<double>(max_scenes))
        throw InvalidArgument("gen spec: mean_scenes outside [min_scenes, max_scenes]");
    if (!(duration_sec > 0.0) || !(segment_seconds > 0.0))
        throw InvalidArgument("gen spec: duration_sec and segment_seconds must be > 0");
    if (duration_sec / static_cast<double>(max_scenes) < 0.05)
        throw InvalidArgument("gen spec: scenes would be shorter than 0.05 s");
    if (M && M != segment_count(duration_sec, segment_seconds))
        throw InvalidArgument("gen spec: M disagrees with duration_sec / segment_seconds");
    if (!(emission_concentration > 0.0) || !(transition_concentration > 0.0) ||
        !(initial_concentration > 0.0) || self_transition_bias < 0.0)
        throw InvalidArgument("gen spec: concentrations must be > 0");
    const auto nv = registry.ids(Modality::Visual).size();
    const auto na = registry.ids(Modality::Audio).size();
    if (nv > kMaxElementsPerModality || na > kMaxElementsPerModality)
        throw InvalidArgument("gen spec: registry too large for subset enumeration");
    if (V1 > (std::size_t{1} << nv) || V2 > (std::size_t{1} << na))
        throw InvalidArgument("gen spec: more symbols requested than element combinations exist");
}

GenSpec GenSpec::from_json(std::string_view text) {
    GenSpec s;
    try {
        json j = json::parse(text);
        s.K = j.value("K", s.K);
        s.M = j.value("M", s.M);
        s.V1 = j.value("V1", s.V1);
        s.V2 = j.value("V2", s.V2);
        s.videos = j.value("videos", s.videos);
        if (j.contains("T")) s.min_scenes = s.max_scenes = j["T"].get<std::size_t>();
        s.min_scenes = j.value("min_scenes", s.min_scenes);
        s.max_scenes = j.value("max_scenes", s.max_scenes);
        s.mean_scenes = j.value("mean_scenes", j.contains("T") ? static_cast<double>(s.min_scenes)
                                                               : s.mean_scenes);
        s.duration_sec = j.value("duration_sec", s.duration_sec);
        s.segment_seconds = j.value("segment_seconds", s.segment_seconds);
        s.genre = j.value("genre", s.genre);
        s.emission_concentration = j.value("emission_concentration", s.emission_concentration);
        s.transition_concentration = j.value("transition_concentration", s.transition_concentration);
        s.self_transition_bias = j.value("self_transition_bias", s.self_transition_bias);
        s.initial_concentration = j.value("initial_concentration", s.initial_concentration);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("gen spec: ") + e.what());
    }
    return s;
}

std::string GenSpec::to_json() const {
    return json{{"K", K},
                {"M", segments()},
                {"V1", V1},
                {"V2", V2},
                {"videos", videos},
                {"min_scenes", min_scenes},
                {"max_scenes", max_scenes},
                {"mean_scenes", mean_scenes},
                {"duration_sec", duration_sec},
                {"segment_seconds", segment_seconds},
                {"genre", genre},
                {"emission_concentration", emission_concentration},
                {"transition_concentration", transition_concentration},
                {"self_transition_bias", self_transition_bias},
                {"initial_concentration", initial_concentration}}
        .dump(2);
}

std::string GroundTruth::to_json() const {
    json b = json::array();
    for (const auto& m : params.B) b.push_back(matrix_json(m));
    json doc = {{"spec", json::parse(spec.to_json())},
                {"seed", seed},
                {"A1", matrix_json(params.A1)},
                {"A2", matrix_json(params.A2)},
                {"B", b},
                {"D", params.D},
                {"visual_sets", visual_sets},
                {"audio_sets", audio_sets},
                {"states", states},
                {"visual_symbols", visual_symbols},
                {"audio_symbols", audio_symbols},
                {"coverage_patches", coverage_patches}};
    return doc.dump();
}

Generated generate_corpus(const GenSpec& spec, std::uint64_t seed, const ElementRegistry& registry) {
    spec.validate(registry);
    Rng rng(substream_seed(seed, "syngen"));
    const std::size_t K = spec.K, M = spec.segments();

    Generated g;
    GroundTruth& truth = g.truth;
    truth.spec = spec;
    truth.spec.M = M;
    truth.seed = seed;
    truth.visual_sets = choose_sets(registry.ids(Modality::Visual), spec.V1, rng);
    truth.audio_sets = choose_sets(registry.ids(Modality::Audio), spec.V2, rng);

    PointParams& p = truth.params;
    p.A1 = dirichlet_rows(rng, K, spec.V1, spec.emission_concentration);
    p.A2 = dirichlet_rows(rng, K, spec.V2, spec.emission_concentration);
    p.B.resize(M);
    for (auto& b : p.B) {
        b = Matrix(K, K);
        for (std::size_t s = 0; s < K; ++s) {
            std::vector<double> alpha(K, spec.transition_concentration);
            alpha[s] += spec.self_transition_bias;
            auto row = sample_dirichlet(rng, alpha);
            std::copy(row.begin(), row.end(), b.row(s).begin());
        }
    }
    p.D = sample_dirichlet(rng, std::vector<double>(K, spec.initial_concentration));

    const std::size_t span = spec.max_scenes - spec.min_scenes;
    const double success = span ? (spec.mean_scenes - static_cast<double>(spec.min_scenes)) /
                                      static_cast<double>(span)
                                : 0.0;
    std::vector<std::vector<double>> bounds(spec.videos);
    for (std::size_t v = 0; v < spec.videos; ++v) {
        std::size_t T = spec.min_scenes;
        if (span) T += std::binomial_distribution<std::size_t>(span, success)(rng);

        const double min_len = std::min(0.2, spec.duration_sec / (2.0 * static_cast<double>(T)));
        const auto shares = sample_dirichlet(rng, std::vector<double>(T, 2.0));
        auto& edges = bounds[v];
        edges.push_back(0.0);
        double acc = 0.0;
        for (std::size_t t = 0; t + 1 < T; ++t) {
            acc += min_len + (spec.duration_sec - static_cast<double>(T) * min_len) * shares[t];
            edges.push_back(round_centis(acc));
        }
        edges.push_back(spec.duration_sec);

        std::vector<std::size_t> states(T), vis(T), aud(T);
        for (std::size_t t = 0; t < T; ++t) {
            Scene probe;
            probe.start_sec = edges[t];
            probe.end_sec = edges[t + 1];
            const std::size_t m = segment_index(probe, spec.duration_sec, spec.segment_seconds);
            states[t] = t == 0 ? sample_categorical(rng, p.D)
                               : sample_categorical(rng, p.B[m].row(states[t - 1]));
            vis[t] = sample_categorical(rng, p.A1.row(states[t]));
            aud[t] = sample_categorical(rng, p.A2.row(states[t]));
        }
        truth.states.push_back(std::move(states));
        truth.visual_symbols.push_back(std::move(vis));
        truth.audio_symbols.push_back(std::move(aud));
    }
    truth.coverage_patches = cover_symbols(truth.visual_symbols, spec.V1, rng) +
                             cover_symbols(truth.audio_symbols, spec.V2, rng);

    const int width = static_cast<int>(std::to_string(spec.videos).size());
    for (std::size_t v = 0; v < spec.videos; ++v) {
        VideoAnnotation video;
        char id[64];
        std::snprintf(id, sizeof id, "%0*zu", width, v + 1);
        video.video_id = spec.genre + "_" + id;
        video.genre = spec.genre;
        video.duration_sec = spec.duration_sec;
        const auto& edges = bounds[v];
        for (std::size_t t = 0; t + 1 < edges.size(); ++t) {
            Scene s;
            s.index = t;
            s.start_sec = edges[t];
            s.end_sec = edges[t + 1];
            s.active_visual = truth.visual_sets[truth.visual_symbols[v][t]];
            s.active_audio = truth.audio_sets[truth.audio_symbols[v][t]];
            video.scenes.push_back(std::move(s));
        }
        g.corpus.videos.push_back(std::move(video));
    }
    return g;
}

GenSpec food15_spec() {
    GenSpec s;
    s.K = 5;
    s.V1 = 59;
    s.V2 = 226;
    s.videos = 1059;
    s.min_scenes = 1;
    s.max_scenes = 18;
    s.mean_scenes = 9747.0 / 1059.0;
    s.duration_sec = 15.0;
    s.genre = "food15";
    s.M = 5;
    return s;
}

}  // namespace adfe
