#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "adfe/corpus.hpp"
#include "adfe/emotion.hpp"
#include "adfe/inference.hpp"
#include "adfe/model.hpp"

namespace adfe {

/// How video-level indices combine modalities.
enum class VideoMode { Joint, Sum };

std::string_view to_string(VideoMode m);
VideoMode parse_video_mode(std::string_view s);

struct PipelineConfig {
    struct Paths {
        std::filesystem::path corpus;
        std::filesystem::path registry;   // empty: built-in registry
        std::filesystem::path model_out;  // empty: <reports_dir>/model.json
        std::filesystem::path reports_dir = "reports";
    } paths;

    TrainConfig train;
    std::uint64_t seed = 0;
    double segment_seconds = kDefaultSegmentSeconds;
    bool merge_adjacent = false;
    std::vector<ModalityMode> modality_modes{ModalityMode::Visual, ModalityMode::Audio,
                                             ModalityMode::Joint};
    VideoMode video_mode = VideoMode::Joint;
    ScoringParams scoring = ScoringParams::Mean;

    struct Replay {
        std::size_t viewings = kDefaultViewings;
        double learning_rate = kDefaultReplayLearningRate;
    } replay;

    struct Clustering {
        std::size_t k_min = 2;
        std::size_t k_max = 10;
        std::size_t repeats = 10;
        std::size_t k = 0;  // 0: most stable k from the selection table
    } clustering;

    struct Bootstrap {
        std::size_t resamples = 2000;
        double level = 0.95;
        std::size_t top_features = 3;
    } bootstrap;

    struct Sweep {
        TrainConfig base;
        std::vector<std::size_t> hidden_states;
        std::vector<double> learning_rates;
        std::vector<double> dirichlet_scales;
        std::size_t seeds = 5;
    } sweep;

    struct Sensitivity {
        std::vector<int> state_offsets{-2, -1, 1, 2};
        std::vector<double> scale_offsets{-0.10, -0.05, 0.05, 0.10};
    } sensitivity;

    unsigned threads = 1;

    PipelineConfig();

    /// Throws ValidationError on out-of-range values.
    void validate() const;
    std::filesystem::path model_path() const;
    ElementRegistry registry() const;

    /// Missing keys keep their defaults.
    static PipelineConfig from_json(std::string_view text);
    static PipelineConfig load(const std::filesystem::path& path);
    std::string to_json() const;
};

struct IngestSummary {
    std::size_t videos = 0;
    std::size_t scenes = 0;
    std::size_t visual_symbols = 0;  // observed, OOV excluded
    std::size_t audio_symbols = 0;
    std::size_t max_scenes = 0;
    std::size_t segments = 0;
    std::size_t duplicate_ids = 0;
    std::vector<std::string> warnings;

    std::string table() const;
    std::string to_json() const;
};

IngestSummary cmd_ingest(const PipelineConfig& config, std::ostream& log);
TrainingTrace cmd_train(const PipelineConfig& config, std::ostream& log);
void cmd_score(const PipelineConfig& config, std::ostream& log);
void cmd_analyze(const PipelineConfig& config, std::ostream& log);
void cmd_sensitivity(const PipelineConfig& config, std::ostream& log);
void cmd_sweep(const PipelineConfig& config, std::ostream& log);
/// Writes <out>.jsonl style corpus and <truth_out> ground truth.
void cmd_syngen(std::string_view spec_json, std::uint64_t seed,
                const std::filesystem::path& corpus_out, const std::filesystem::path& truth_out,
                std::ostream& log);

/// Raised when a pipeline stage is missing an input produced by an earlier one.
class MissingInput : public Error {
public:
    using Error::Error;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace adfe
