// adfe: command-line front end for the scene-level free-energy pipeline.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "adfe/corpus.hpp"
#include "adfe/pipeline.hpp"
#include "adfe/synth.hpp"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitValidation = 2;

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string reports_dir;
    std::optional<unsigned> threads;
    std::string corpus;
    std::string registry;
    std::string model;

    std::optional<std::size_t> hidden_states;
    std::optional<double> learning_rate;
    std::optional<double> dirichlet_scale;
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> batch_size;
    bool full_batch = false;

    std::optional<std::size_t> viewings;
    std::optional<double> replay_lr;
    std::vector<std::string> modes;
    std::string video_mode;
    std::string scoring;
    std::optional<std::size_t> k;
    std::optional<std::size_t> repeats;
};

adfe::PipelineConfig resolve(const Overrides& o) {
    adfe::PipelineConfig cfg = o.config.empty() ? adfe::PipelineConfig{} : adfe::PipelineConfig::load(o.config);
    if (o.seed) {
        cfg.seed = *o.seed;
        cfg.train.seed = *o.seed;
    }
    if (!o.reports_dir.empty()) cfg.paths.reports_dir = o.reports_dir;
    if (o.threads) cfg.threads = *o.threads;
    if (!o.corpus.empty()) cfg.paths.corpus = o.corpus;
    if (!o.registry.empty()) cfg.paths.registry = o.registry;
    if (!o.model.empty()) cfg.paths.model_out = o.model;
    if (o.hidden_states) cfg.train.hidden_states = *o.hidden_states;
    if (o.learning_rate) cfg.train.learning_rate = *o.learning_rate;
    if (o.dirichlet_scale) cfg.train.dirichlet_scale = *o.dirichlet_scale;
    if (o.epochs) cfg.train.epochs = *o.epochs;
    if (o.batch_size) cfg.train.batch_size = *o.batch_size;
    if (o.full_batch) cfg.train.full_batch = true;
    if (o.viewings) cfg.replay.viewings = *o.viewings;
    if (o.replay_lr) cfg.replay.learning_rate = *o.replay_lr;
    if (!o.modes.empty()) {
        cfg.modality_modes.clear();
        for (const auto& m : o.modes) cfg.modality_modes.push_back(adfe::parse_modality_mode(m));
    }
    if (!o.video_mode.empty()) cfg.video_mode = adfe::parse_video_mode(o.video_mode);
    if (!o.scoring.empty()) cfg.scoring = adfe::parse_scoring_params(o.scoring);
    if (o.k) cfg.clustering.k = *o.k;
    if (o.repeats) cfg.clustering.repeats = *o.repeats;
    cfg.validate();
    return cfg;
}

void print_issues(const adfe::CorpusError& e) {
    nlohmann::json issues = nlohmann::json::array();
    for (const auto& i : e.issues())
        issues.push_back({{"kind", std::string(adfe::to_string(i.kind))},
                          {"line", i.line},
                          {"video_id", i.video_id},
                          {"message", i.message}});
    std::cerr << nlohmann::json{{"errors", issues}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Scene-level free-energy analysis of annotated videos"};
    app.require_subcommand(1);
    Overrides o;
    app.add_option("--config", o.config, "Pipeline config (JSON)");
    app.add_option("--seed", o.seed, "Root seed");
    app.add_option("--reports-dir", o.reports_dir, "Output directory");
    app.add_option("--threads", o.threads, "Worker threads");
    app.add_option("--corpus", o.corpus, "Corpus JSONL");
    app.add_option("--registry", o.registry, "Element registry JSON");
    app.add_option("--model", o.model, "Model file");

    auto* ingest = app.add_subcommand("ingest", "Validate a corpus and build observation alphabets");
    auto* train = app.add_subcommand("train", "Fit the variational HMM");
    train->add_option("--hidden-states", o.hidden_states);
    train->add_option("--learning-rate", o.learning_rate);
    train->add_option("--dirichlet-scale", o.dirichlet_scale);
    train->add_option("--epochs", o.epochs);
    train->add_option("--batch-size", o.batch_size);
    train->add_flag("--full-batch", o.full_batch, "Exact coordinate ascent on all training videos");
    auto* score = app.add_subcommand("score", "Scene metrics, replay simulation and video indices");
    for (auto* sub : {score, app.add_subcommand("analyze", "Correlations, clustering, ANOVA, chi-square"),
                      app.add_subcommand("sensitivity", "Retrain around the base settings and compare")}) {
        sub->add_option("--viewings", o.viewings);
        sub->add_option("--replay-lr", o.replay_lr);
        sub->add_option("--modes", o.modes, "visual, audio, joint")->delimiter(',');
        sub->add_option("--video-mode", o.video_mode, "joint or sum");
        sub->add_option("--scoring-params", o.scoring, "mean or geometric");
        sub->add_option("--k", o.k, "Cluster count (default: most stable)");
        sub->add_option("--repeats", o.repeats, "k-means runs per k");
    }
    auto* sweep = app.add_subcommand("sweep", "One-at-a-time hyperparameter search");
    auto* syngen = app.add_subcommand("syngen", "Generate a synthetic corpus from a ground-truth HMM");
    std::string spec_path, preset, out_path, truth_path;
    syngen->add_option("--spec", spec_path, "Generator spec (JSON)");
    syngen->add_option("--preset", preset, "Built-in spec: food15")->check(CLI::IsMember({"food15"}));
    syngen->add_option("--out", out_path, "Corpus JSONL to write")->required();
    syngen->add_option("--truth", truth_path, "Ground-truth JSON (default: <out>.truth.json)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    try {
        if (*syngen) {
            if (spec_path.empty() == preset.empty())
                throw adfe::ValidationError("syngen needs exactly one of --spec or --preset");
            const std::string spec = preset.empty() ? adfe::read_file(spec_path) : adfe::food15_spec().to_json();
            if (truth_path.empty()) truth_path = out_path + ".truth.json";
            adfe::cmd_syngen(spec, o.seed.value_or(0), out_path, truth_path, std::cout);
            return 0;
        }
        adfe::PipelineConfig cfg;
        try {
            cfg = resolve(o);
        } catch (const adfe::InvalidArgument& e) {
            throw adfe::ValidationError(e.what());
        }
        if (*ingest) adfe::cmd_ingest(cfg, std::cout);
        else if (*train) adfe::cmd_train(cfg, std::cout);
        else if (*score) adfe::cmd_score(cfg, std::cout);
        else if (*sweep) adfe::cmd_sweep(cfg, std::cout);
        else if (app.got_subcommand("analyze")) adfe::cmd_analyze(cfg, std::cout);
        else adfe::cmd_sensitivity(cfg, std::cout);
    } catch (const adfe::CorpusError& e) {
        std::cerr << "error: " << e.what() << "\n";
        print_issues(e);
        return kExitValidation;
    } catch (const adfe::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return 0;
}
