#include <gtest/gtest.h>

#include <cmath>

#include "adfe/emotion.hpp"
#include "helpers.hpp"

using namespace adfe;
using adfe::test::make_sequence;
using adfe::test::random_model;
using adfe::test::random_point_params;
using adfe::test::random_sequence;

namespace {

ModelParams single_state_model() {
    auto t = prior_params({1, 3, 3, 1, 3.0}, 1.0);
    return t;
}

}  // namespace

TEST(KlCategorical, KnownValues) {
    std::vector<double> p{0.75, 0.25}, q{0.5, 0.5};
    EXPECT_NEAR(kl_categorical(p, q), 0.75 * std::log(1.5) + 0.25 * std::log(0.5), 1e-15);
    EXPECT_NEAR(kl_categorical(p, q), 0.1308120360, 1e-9);
    EXPECT_DOUBLE_EQ(kl_categorical(p, p), 0.0);
    std::vector<double> r{1.0, 0.0};
    EXPECT_NO_THROW(kl_categorical(r, q));
    EXPECT_THROW(kl_categorical(q, r), InvalidArgument);
}

TEST(SceneMetrics, SurpriseDecomposition) {
    Rng rng(1);
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t K = 1 + uniform_index(rng, 4);
        auto p = random_point_params(rng, K, 4, 5, 2, 0.5);
        auto seq = random_sequence(rng, 1 + uniform_index(rng, 8), 4, 5, 2);
        for (auto mode : {ModalityMode::Visual, ModalityMode::Audio, ModalityMode::Joint}) {
            auto f = forward_filter(seq, p, mode);
            for (const auto& m : scene_metrics(f)) {
                EXPECT_NEAR(m.bs + m.un, m.shannon, 1e-9);
                EXPECT_GE(m.kld, 0.0);
                EXPECT_GE(m.bs, 0.0);
                EXPECT_GE(m.un, 0.0);
            }
        }
    }
}

TEST(SceneMetrics, SingleStateHasNoBeliefUpdate) {
    auto theta = single_state_model();
    auto seq = make_sequence({0, 1, 2}, {2, 2, 2});
    auto f = forward_filter(seq, mean_params(theta), ModalityMode::Joint);
    for (const auto& m : scene_metrics(f)) {
        EXPECT_DOUBLE_EQ(m.kld, 0.0);
        EXPECT_DOUBLE_EQ(m.bs, 0.0);
        EXPECT_NEAR(m.un, m.shannon, 1e-14);
        EXPECT_NEAR(m.un, 2 * std::log(3.0), 1e-14);
    }
}

TEST(SceneMetrics, RecomputedLikelihoodAgrees) {
    Rng rng(2);
    auto p = random_point_params(rng, 3, 3, 3, 1);
    auto seq = random_sequence(rng, 5, 3, 3, 1);
    auto f = forward_filter(seq, p, ModalityMode::Visual);
    auto a = scene_metrics(f);
    auto b = scene_metrics(f, p, seq, ModalityMode::Visual);
    for (std::size_t t = 0; t < a.size(); ++t) EXPECT_DOUBLE_EQ(a[t].un, b[t].un);
    EXPECT_THROW(scene_metrics(f, p, seq, ModalityMode::Audio), InvalidArgument);
}

TEST(Replay, ZeroRateIsIdentityAndMassGrowsByRateTimesThreeT) {
    Rng rng(3);
    auto theta = random_model(rng, 3, 4, 4, 2);
    auto seq = random_sequence(rng, 6, 4, 4, 2);
    auto f = forward_filter(seq, mean_params(theta), ModalityMode::Joint);
    EXPECT_EQ(replay_update(theta, f, seq, 0.0), theta);
    auto next = replay_update(theta, f, seq, 10.0);
    EXPECT_NEAR(next.total_mass() - theta.total_mass(), 10.0 * 3 * 6, 1e-9);
    EXPECT_THROW(replay_update(theta, f, seq, -1.0), InvalidArgument);
}

TEST(Replay, HabituationOnRepeatedSymbol) {
    auto theta = single_state_model();
    auto seq = make_sequence({1, 1, 1, 1}, {0, 0, 0, 0});
    auto trace = simulate_viewings(seq, theta, 5, 10.0, ModalityMode::Joint);
    ASSERT_EQ(trace.count(), 5u);
    for (std::size_t r = 1; r < 5; ++r)
        for (std::size_t t = 0; t < 4; ++t) EXPECT_LT(trace.viewings[r][t].un, trace.viewings[r - 1][t].un);
    auto idx = video_indices(trace);
    ASSERT_TRUE(idx.un.decay);
    EXPECT_GT(*idx.un.decay, 0.0);

    auto frozen = video_indices(simulate_viewings(seq, theta, 5, 0.0, ModalityMode::Joint));
    EXPECT_EQ(*frozen.un.decay, 0.0);
}

TEST(Replay, SingleViewingGivesZeroDecay) {
    Rng rng(4);
    auto theta = random_model(rng, 3, 3, 3, 1);
    auto seq = random_sequence(rng, 5, 3, 3, 1);
    auto idx = video_indices(simulate_viewings(seq, theta, 1, 10.0, ModalityMode::Joint));
    EXPECT_EQ(idx.un.decay.value_or(-1), 0.0);
    EXPECT_EQ(idx.bs.decay.value_or(0.0), 0.0);
}

TEST(Replay, Defaults) {
    EXPECT_EQ(kDefaultViewings, 5u);
    EXPECT_DOUBLE_EQ(kDefaultReplayLearningRate, 10.0);
}

TEST(DecayRate, Formula) {
    std::vector<double> a{1, 1}, b{0.5, 0.5}, z{0, 0};
    EXPECT_DOUBLE_EQ(*decay_rate(a, b), 0.5);
    EXPECT_DOUBLE_EQ(*decay_rate(a, a), 0.0);
    EXPECT_FALSE(decay_rate(z, b));
    EXPECT_THROW(decay_rate(a, std::vector<double>{1}), InvalidArgument);
}

TEST(Skewness, BiasedCoefficient) {
    std::vector<double> v{1, 1, 1, 5};
    auto s = skewness(v);
    EXPECT_FALSE(s.undefined);
    EXPECT_NEAR(s.value, 6.0 / std::pow(3.0, 1.5), 1e-12);
    std::vector<double> sym{1, 2, 3};
    EXPECT_NEAR(skewness(sym).value, 0.0, 1e-15);
    EXPECT_TRUE(skewness(std::vector<double>{1, 2}).undefined);
    EXPECT_TRUE(skewness(std::vector<double>{4, 4, 4}).undefined);
    std::vector<double> neg{-1, -1, -1, -5};
    EXPECT_NEAR(skewness(neg).value, -s.value, 1e-12);
}

TEST(VideoIndices, PeakEndAndColumns) {
    ViewingTrace tr;
    tr.viewings = {{{0.1, 0.2, 0.3, 0.5}, {0.4, 0.1, 0.2, 0.3}, {0.2, 0.3, 0.1, 0.4}}};
    auto idx = video_indices(tr);
    EXPECT_DOUBLE_EQ(idx.kld.peak, 0.4);
    EXPECT_DOUBLE_EQ(idx.kld.end, 0.2);
    EXPECT_DOUBLE_EQ(idx.bs.peak, 0.3);
    EXPECT_DOUBLE_EQ(idx.un.end, 0.1);
    auto names = VideoEmotionIndices::column_names();
    EXPECT_EQ(names[0], "peak_kld");
    EXPECT_EQ(names[7], "decay_bs");
    EXPECT_EQ(names[11], "decay_un");
    auto arr = idx.as_array();
    EXPECT_DOUBLE_EQ(arr[0], 0.4);
    EXPECT_DOUBLE_EQ(arr[3], 0.0);
    EXPECT_THROW(video_indices(ViewingTrace{}), InvalidArgument);
}

TEST(SumTraces, AddsSceneWise) {
    Rng rng(5);
    auto theta = random_model(rng, 2, 3, 3, 1);
    auto seq = random_sequence(rng, 4, 3, 3, 1);
    auto v = simulate_viewings(seq, theta, 2, 10.0, ModalityMode::Visual);
    auto a = simulate_viewings(seq, theta, 2, 10.0, ModalityMode::Audio);
    auto s = sum_traces(v, a);
    EXPECT_DOUBLE_EQ(s.viewings[1][2].un, v.viewings[1][2].un + a.viewings[1][2].un);
    auto short_trace = simulate_viewings(seq, theta, 1, 10.0, ModalityMode::Audio);
    EXPECT_THROW(sum_traces(v, short_trace), InvalidArgument);
}

TEST(Scoring, GeometricParamsAlsoSatisfyIdentity) {
    Rng rng(6);
    auto theta = random_model(rng, 3, 4, 4, 2, 0.1, 1.0);
    auto seq = random_sequence(rng, 6, 4, 4, 2);
    auto tr = simulate_viewings(seq, theta, 3, 10.0, ModalityMode::Joint, ScoringParams::Geometric);
    for (const auto& view : tr.viewings)
        for (const auto& m : view) EXPECT_NEAR(m.bs + m.un, m.shannon, 1e-9);
    EXPECT_EQ(parse_scoring_params("geometric"), ScoringParams::Geometric);
    EXPECT_THROW(parse_scoring_params("mode"), InvalidArgument);
}
