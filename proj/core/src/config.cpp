#include <json.hpp>

#include "adfe/error.hpp"
#include "adfe/pipeline.hpp"

namespace adfe {

using nlohmann::json;

std::string_view to_string(VideoMode m) { return m == VideoMode::Joint ? "joint" : "sum"; }

VideoMode parse_video_mode(std::string_view s) {
    if (s == "joint") return VideoMode::Joint;
    if (s == "sum") return VideoMode::Sum;
    throw ValidationError("unknown video mode '" + std::string(s) + "' (joint|sum)");
}

PipelineConfig::PipelineConfig() {
    // One-at-a-time search around K=5, scale 1.0, lr 0.01.
    sweep.base.hidden_states = 5;
    sweep.base.dirichlet_scale = 1.0;
    sweep.base.learning_rate = 0.01;
    sweep.hidden_states = {2, 3, 4, 5, 6, 7, 8};
    sweep.learning_rates = {0.005, 0.01, 0.02, 0.0275, 0.03, 0.05, 0.1};
    sweep.dirichlet_scales = {0.1, 0.2, 0.5, 1.0, 2.0};
}

void PipelineConfig::validate() const {
    try {
        train.validate();
    } catch (const InvalidArgument& e) {
        throw ValidationError(std::string("config.train: ") + e.what());
    }
    if (!(segment_seconds > 0.0)) throw ValidationError("config: segment_seconds must be > 0");
    if (modality_modes.empty()) throw ValidationError("config: modality_modes is empty");
    if (replay.viewings == 0) throw ValidationError("config.replay: viewings must be >= 1");
    if (replay.learning_rate < 0.0) throw ValidationError("config.replay: learning_rate must be >= 0");
    if (clustering.k_min < 2 || clustering.k_max < clustering.k_min)
        throw ValidationError("config.clustering: need 2 <= k_min <= k_max");
    if (clustering.repeats == 0) throw ValidationError("config.clustering: repeats must be >= 1");
    if (clustering.k && clustering.k < 2) throw ValidationError("config.clustering: k must be >= 2");
    if (bootstrap.resamples < 100) throw ValidationError("config.bootstrap: resamples must be >= 100");
    if (!(bootstrap.level > 0.0 && bootstrap.level < 1.0))
        throw ValidationError("config.bootstrap: level must be in (0, 1)");
    if (sweep.seeds == 0) throw ValidationError("config.sweep: seeds must be >= 1");
}

std::filesystem::path PipelineConfig::model_path() const {
    return paths.model_out.empty() ? paths.reports_dir / "model.json" : paths.model_out;
}

ElementRegistry PipelineConfig::registry() const {
    return paths.registry.empty() ? ElementRegistry::default_registry()
                                  : ElementRegistry::load(paths.registry);
}

namespace {

std::vector<ModalityMode> modes_from_json(const json& j) {
    std::vector<ModalityMode> out;
    for (const auto& m : j) out.push_back(parse_modality_mode(m.get<std::string>()));
    return out;
}

}  // namespace

PipelineConfig PipelineConfig::from_json(std::string_view text) {
    PipelineConfig c;
    try {
        const json j = json::parse(text);
        if (j.contains("paths")) {
            const auto& p = j["paths"];
            c.paths.corpus = p.value("corpus", std::string{});
            c.paths.registry = p.value("registry", std::string{});
            c.paths.model_out = p.value("model_out", std::string{});
            c.paths.reports_dir = p.value("reports_dir", c.paths.reports_dir.string());
        }
        if (j.contains("train")) c.train = TrainConfig::from_json(j["train"].dump());
        c.seed = j.value("seed", c.seed);
        if (!j.contains("train") || !j["train"].contains("seed")) c.train.seed = c.seed;
        c.segment_seconds = j.value("segment_seconds", c.segment_seconds);
        c.merge_adjacent = j.value("merge_adjacent", c.merge_adjacent);
        if (j.contains("modality_modes")) c.modality_modes = modes_from_json(j["modality_modes"]);
        if (j.contains("video_mode")) c.video_mode = parse_video_mode(j["video_mode"].get<std::string>());
        if (j.contains("scoring_params"))
            c.scoring = parse_scoring_params(j["scoring_params"].get<std::string>());
        if (j.contains("replay")) {
            const auto& r = j["replay"];
            c.replay.viewings = r.value("viewings", c.replay.viewings);
            c.replay.learning_rate = r.value("learning_rate", c.replay.learning_rate);
        }
        if (j.contains("clustering")) {
            const auto& k = j["clustering"];
            if (k.contains("k_range")) {
                auto range = k["k_range"].get<std::vector<std::size_t>>();
                if (range.size() != 2) throw ValidationError("config.clustering.k_range needs [min, max]");
                c.clustering.k_min = range[0];
                c.clustering.k_max = range[1];
            }
            c.clustering.repeats = k.value("repeats", c.clustering.repeats);
            c.clustering.k = k.value("k", c.clustering.k);
        }
        if (j.contains("bootstrap")) {
            const auto& b = j["bootstrap"];
            c.bootstrap.resamples = b.value("resamples", c.bootstrap.resamples);
            c.bootstrap.level = b.value("level", c.bootstrap.level);
            c.bootstrap.top_features = b.value("top_features", c.bootstrap.top_features);
        }
        if (j.contains("sweep")) {
            const auto& s = j["sweep"];
            if (s.contains("base")) c.sweep.base = TrainConfig::from_json(s["base"].dump());
            if (s.contains("hidden_states"))
                c.sweep.hidden_states = s["hidden_states"].get<std::vector<std::size_t>>();
            if (s.contains("learning_rates"))
                c.sweep.learning_rates = s["learning_rates"].get<std::vector<double>>();
            if (s.contains("dirichlet_scales"))
                c.sweep.dirichlet_scales = s["dirichlet_scales"].get<std::vector<double>>();
            c.sweep.seeds = s.value("seeds", c.sweep.seeds);
        }
        if (j.contains("sensitivity")) {
            const auto& s = j["sensitivity"];
            if (s.contains("state_offsets"))
                c.sensitivity.state_offsets = s["state_offsets"].get<std::vector<int>>();
            if (s.contains("scale_offsets"))
                c.sensitivity.scale_offsets = s["scale_offsets"].get<std::vector<double>>();
        }
        c.threads = j.value("threads", c.threads);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    } catch (const InvalidArgument& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw MissingInput("config file not found: " + path.string());
    return from_json(read_file(path));
}

std::string PipelineConfig::to_json() const {
    json modes = json::array();
    for (auto m : modality_modes) modes.push_back(std::string(adfe::to_string(m)));
    json j = {
        {"paths",
         {{"corpus", paths.corpus.string()},
          {"registry", paths.registry.string()},
          {"model_out", model_path().string()},
          {"reports_dir", paths.reports_dir.string()}}},
        {"train", json::parse(train.to_json())},
        {"seed", seed},
        {"segment_seconds", segment_seconds},
        {"merge_adjacent", merge_adjacent},
        {"modality_modes", modes},
        {"video_mode", std::string(adfe::to_string(video_mode))},
        {"scoring_params", scoring == ScoringParams::Mean ? "mean" : "geometric"},
        {"replay", {{"viewings", replay.viewings}, {"learning_rate", replay.learning_rate}}},
        {"clustering",
         {{"k_range", {clustering.k_min, clustering.k_max}},
          {"repeats", clustering.repeats},
          {"k", clustering.k}}},
        {"bootstrap",
         {{"resamples", bootstrap.resamples},
          {"level", bootstrap.level},
          {"top_features", bootstrap.top_features}}},
        {"sweep",
         {{"base", json::parse(sweep.base.to_json())},
          {"hidden_states", sweep.hidden_states},
          {"learning_rates", sweep.learning_rates},
          {"dirichlet_scales", sweep.dirichlet_scales},
          {"seeds", sweep.seeds}}},
        {"sensitivity",
         {{"state_offsets", sensitivity.state_offsets},
          {"scale_offsets", sensitivity.scale_offsets}}},
        {"threads", threads},
    };
    return j.dump(2);
}

}  // namespace adfe
