#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "adfe/corpus.hpp"
#include "adfe/model.hpp"

namespace adfe {

/// Parameters of a synthetic corpus drawn from a ground-truth HMM.
/// V1/V2 count observable element combinations (no OOV slot).
struct GenSpec {
    std::size_t K = 3;
    std::size_t M = 0;  // 0: derived from duration_sec / segment_seconds
    std::size_t V1 = 8;
    std::size_t V2 = 8;
    std::size_t videos = 100;
    std::size_t min_scenes = 1;
    std::size_t max_scenes = 18;
    double mean_scenes = 9.2;
    double duration_sec = 15.0;
    double segment_seconds = kDefaultSegmentSeconds;
    std::string genre = "synthetic";
    double emission_concentration = 0.3;
    double transition_concentration = 1.0;
    double self_transition_bias = 2.0;
    double initial_concentration = 1.0;

    /// Throws InvalidArgument on a degenerate spec.
    void validate(const ElementRegistry& registry) const;
    std::size_t segments() const;

    static GenSpec from_json(std::string_view text);
    std::string to_json() const;
};

struct GroundTruth {
    GenSpec spec;
    std::uint64_t seed = 0;
    PointParams params;  // A1: K x V1, A2: K x V2 (no OOV column)
    std::vector<std::vector<std::string>> visual_sets;  // symbol -> element ids
    std::vector<std::vector<std::string>> audio_sets;
    std::vector<std::vector<std::size_t>> states;        // per video
    std::vector<std::vector<std::size_t>> visual_symbols;  // per video, ground-truth symbol index
    std::vector<std::vector<std::size_t>> audio_symbols;
    /// Scenes whose symbol was overwritten so every symbol occurs at least once.
    std::size_t coverage_patches = 0;

    std::string to_json() const;
};

struct Generated {
    Corpus corpus;
    GroundTruth truth;
};

Generated generate_corpus(const GenSpec& spec, std::uint64_t seed,
                          const ElementRegistry& registry = ElementRegistry::default_registry());

/// Food 15 s shaped spec: 1059 videos, at most 18 scenes, 59 visual and
/// 226 audio combinations.
GenSpec food15_spec();

}  // namespace adfe
