#include <gtest/gtest.h>

#include <set>

#include "adfe/synth.hpp"

using namespace adfe;

namespace {

const ElementRegistry& reg() {
    static const ElementRegistry r = ElementRegistry::default_registry();
    return r;
}

GenSpec small_spec() {
    GenSpec s;
    s.K = 2;
    s.V1 = 3;
    s.V2 = 3;
    s.videos = 10;
    s.min_scenes = s.max_scenes = 6;
    s.mean_scenes = 6;
    return s;
}

}  // namespace

TEST(Synth, ShapeMatchesSpec) {
    auto g = generate_corpus(small_spec(), 1);
    ASSERT_EQ(g.corpus.videos.size(), 10u);
    EXPECT_EQ(g.corpus.scene_count(), 60u);
    auto a = build_alphabet(g.corpus, reg());
    EXPECT_EQ(a.visual.observed_size(), 3u);
    EXPECT_EQ(a.audio.observed_size(), 3u);
    EXPECT_EQ(g.truth.params.K(), 2u);
    EXPECT_EQ(g.truth.params.M(), 5u);
    EXPECT_NO_THROW(g.truth.params.validate());
}

TEST(Synth, SameSeedSameBytes) {
    auto a = generate_corpus(small_spec(), 42);
    auto b = generate_corpus(small_spec(), 42);
    EXPECT_EQ(corpus_to_jsonl(a.corpus), corpus_to_jsonl(b.corpus));
    EXPECT_EQ(a.truth.to_json(), b.truth.to_json());
    auto c = generate_corpus(small_spec(), 43);
    EXPECT_NE(corpus_to_jsonl(a.corpus), corpus_to_jsonl(c.corpus));
}

TEST(Synth, OutputPassesValidation) {
    auto g = generate_corpus(small_spec(), 5);
    auto parsed = parse_corpus_text(corpus_to_jsonl(g.corpus), reg());
    EXPECT_EQ(corpus_to_jsonl(parsed), corpus_to_jsonl(g.corpus));
}

TEST(Synth, EncodeRoundTripPreservesSymbols) {
    auto g = generate_corpus(small_spec(), 9);
    auto a = build_alphabet(g.corpus, reg());
    auto seqs = encode_corpus(g.corpus, reg(), a, 3.0);
    for (std::size_t v = 0; v < seqs.size(); ++v)
        for (std::size_t t = 0; t < seqs[v].length(); ++t) {
            const auto& vis = g.truth.visual_sets[g.truth.visual_symbols[v][t]];
            const auto& aud = g.truth.audio_sets[g.truth.audio_symbols[v][t]];
            EXPECT_EQ(a.visual.symbol(seqs[v].obs_visual[t]), canonical_symbol(reg(), Modality::Visual, vis));
            EXPECT_EQ(a.audio.symbol(seqs[v].obs_audio[t]), canonical_symbol(reg(), Modality::Audio, aud));
        }
}

TEST(Synth, SegmentsFollowScenePositions) {
    auto g = generate_corpus(small_spec(), 3);
    auto a = build_alphabet(g.corpus, reg());
    for (const auto& v : g.corpus.videos) {
        auto seq = encode_video(v, reg(), a, 3.0);
        EXPECT_TRUE(std::is_sorted(seq.segment_of.begin(), seq.segment_of.end()));
        EXPECT_LT(seq.segment_of.back(), 5u);
        EXPECT_DOUBLE_EQ(v.scenes.back().end_sec, 15.0);
    }
}

TEST(Synth, Food15Shape) {
    auto g = generate_corpus(food15_spec(), 1);
    EXPECT_EQ(g.corpus.videos.size(), 1059u);
    std::size_t longest = 0;
    for (const auto& v : g.corpus.videos) longest = std::max(longest, v.scenes.size());
    EXPECT_LE(longest, 18u);
    auto a = build_alphabet(g.corpus, reg());
    EXPECT_EQ(a.visual.observed_size(), 59u);
    EXPECT_EQ(a.audio.observed_size(), 226u);
    const double mean = static_cast<double>(g.corpus.scene_count()) / 1059.0;
    EXPECT_NEAR(mean, 9747.0 / 1059.0, 0.3);
}

TEST(Synth, SpecValidation) {
    auto s = small_spec();
    s.V1 = 1000;
    EXPECT_THROW(generate_corpus(s, 1), InvalidArgument);
    s = small_spec();
    s.M = 4;
    EXPECT_THROW(generate_corpus(s, 1), InvalidArgument);
    s = small_spec();
    s.videos = 1;
    s.min_scenes = s.max_scenes = 1;
    s.mean_scenes = 1;
    s.V1 = 5;
    EXPECT_THROW(generate_corpus(s, 1), InvalidArgument);  // 1 scene cannot cover 5 symbols
}

TEST(Synth, SpecJsonRoundTrip) {
    auto s = GenSpec::from_json(R"({"K":2,"T":6,"V1":3,"V2":3,"videos":10})");
    EXPECT_EQ(s.min_scenes, 6u);
    EXPECT_EQ(s.max_scenes, 6u);
    EXPECT_DOUBLE_EQ(s.mean_scenes, 6.0);
    auto back = GenSpec::from_json(s.to_json());
    EXPECT_EQ(back.to_json(), s.to_json());
    EXPECT_THROW(GenSpec::from_json("{bad"), ValidationError);
}
