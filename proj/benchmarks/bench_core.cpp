#include <benchmark/benchmark.h>

#include "adfe/clustering.hpp"
#include "adfe/emotion.hpp"
#include "adfe/inference.hpp"
#include "adfe/model.hpp"
#include "adfe/rng.hpp"
#include "adfe/synth.hpp"

namespace {

struct Fixture {
    adfe::Corpus corpus;
    adfe::AlphabetPair alphabets;
    std::vector<adfe::EncodedSequence> seqs;
    adfe::ObservationShape shape;

    explicit Fixture(std::size_t videos) {
        auto spec = adfe::food15_spec();
        spec.videos = videos;
        spec.V1 = 30;
        spec.V2 = 60;
        const auto& reg = adfe::ElementRegistry::default_registry();
        corpus = adfe::generate_corpus(spec, 7).corpus;
        alphabets = adfe::build_alphabet(corpus, reg);
        seqs = adfe::encode_corpus(corpus, reg, alphabets, 3.0);
        shape = {alphabets.visual.size(), alphabets.audio.size(), 5, 3.0};
    }
};

const Fixture& fixture() {
    static const Fixture f(400);
    return f;
}

void BM_ForwardFilter(benchmark::State& state) {
    const auto& f = fixture();
    const auto theta = adfe::init_params(static_cast<std::size_t>(state.range(0)), f.shape.V1,
                                         f.shape.V2, f.shape.M, 0.2, 1);
    const auto point = adfe::mean_params(theta);
    std::size_t i = 0;
    for (auto _ : state) {
        auto r = adfe::forward_filter(f.seqs[i++ % f.seqs.size()], point, adfe::ModalityMode::Joint);
        benchmark::DoNotOptimize(r.total_log_evidence);
    }
}
BENCHMARK(BM_ForwardFilter)->Arg(3)->Arg(5)->Arg(8);

void BM_ExpectedStats(benchmark::State& state) {
    const auto& f = fixture();
    const auto theta = adfe::init_params(5, f.shape.V1, f.shape.V2, f.shape.M, 0.2, 1);
    for (auto _ : state) {
        auto s = adfe::expected_stats(f.seqs, theta, static_cast<unsigned>(state.range(0)));
        benchmark::DoNotOptimize(s.log_normalizer);
    }
    state.SetItemsProcessed(state.iterations() * static_cast<long>(f.seqs.size()));
}
BENCHMARK(BM_ExpectedStats)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_ReplayViewings(benchmark::State& state) {
    const auto& f = fixture();
    const auto theta = adfe::init_params(5, f.shape.V1, f.shape.V2, f.shape.M, 0.2, 1);
    std::size_t i = 0;
    for (auto _ : state) {
        auto t = adfe::simulate_viewings(f.seqs[i++ % f.seqs.size()], theta, 5, 10.0,
                                         adfe::ModalityMode::Joint);
        benchmark::DoNotOptimize(t.viewings.size());
    }
}
BENCHMARK(BM_ReplayViewings);

void BM_KMeans(benchmark::State& state) {
    adfe::Rng rng(3);
    const auto n = static_cast<std::size_t>(state.range(0));
    adfe::Matrix pts(n, 12);
    for (auto& x : pts.data()) x = adfe::uniform01(rng);
    for (auto _ : state) {
        auto r = adfe::kmeans(pts, 3, 11);
        benchmark::DoNotOptimize(r.wcss);
    }
}
BENCHMARK(BM_KMeans)->Arg(300)->Arg(1059)->Unit(benchmark::kMillisecond);

void BM_Silhouette(benchmark::State& state) {
    adfe::Rng rng(5);
    const auto n = static_cast<std::size_t>(state.range(0));
    adfe::Matrix pts(n, 12);
    for (auto& x : pts.data()) x = adfe::uniform01(rng);
    std::vector<std::size_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = i % 3;
    for (auto _ : state) benchmark::DoNotOptimize(adfe::silhouette(pts, labels));
}
BENCHMARK(BM_Silhouette)->Arg(1059)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
