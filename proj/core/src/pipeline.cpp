#include "adfe/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "adfe/clustering.hpp"
#include "adfe/csv.hpp"
#include "adfe/features.hpp"
#include "adfe/parallel.hpp"
#include "adfe/rng.hpp"
#include "adfe/stats.hpp"
#include "adfe/synth.hpp"

namespace adfe {

using nlohmann::json;
namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInput("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, std::string_view content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << content;
    if (!out) throw Error("write failed: " + path.string());
}

namespace {

using CsvTable = std::vector<std::vector<std::string>>;

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> cells(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cells.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cells.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            cells.emplace_back();
        } else if (c != '\r') {
            cells.back() += c;
        }
    }
    return cells;
}

/// Header row first.
CsvTable read_csv(const fs::path& path) {
    if (!fs::exists(path)) throw MissingInput("missing input " + path.string() + " (run the earlier stage first)");
    std::istringstream in(read_file(path));
    CsvTable rows;
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) rows.push_back(split_csv_line(line));
    if (rows.empty()) throw ValidationError(path.string() + ": empty CSV");
    return rows;
}

std::size_t column(const CsvTable& t, std::string_view name, const fs::path& path) {
    const auto& h = t.front();
    auto it = std::find(h.begin(), h.end(), name);
    if (it == h.end()) throw ValidationError(path.string() + ": missing column " + std::string(name));
    return static_cast<std::size_t>(it - h.begin());
}

double parse_double(const std::string& s) {
    if (s.empty()) return std::nan("");
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw ValidationError("not a number: '" + s + "'");
    return v;
}

std::size_t parse_size(const std::string& s) {
    std::size_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw ValidationError("not an index: '" + s + "'");
    return v;
}

Corpus load_corpus(const PipelineConfig& cfg, const ElementRegistry& registry) {
    if (cfg.paths.corpus.empty()) throw ValidationError("config.paths.corpus is not set");
    if (!fs::exists(cfg.paths.corpus)) throw MissingInput("corpus not found: " + cfg.paths.corpus.string());
    return parse_corpus(cfg.paths.corpus, registry, {cfg.merge_adjacent});
}

AlphabetPair load_or_build_alphabets(const PipelineConfig& cfg, const Corpus& corpus,
                                     const ElementRegistry& registry) {
    const auto path = cfg.paths.reports_dir / "alphabets.json";
    if (fs::exists(path)) return AlphabetPair::from_json(read_file(path));
    return build_alphabet(corpus, registry);
}

void write_config_echo(const PipelineConfig& cfg) {
    json echo = {{"config", json::parse(cfg.to_json())},
                 {"constants",
                  {{"hidden_states", cfg.train.hidden_states},
                   {"learning_rate", cfg.train.learning_rate},
                   {"dirichlet_scale", cfg.train.dirichlet_scale},
                   {"segment_seconds", cfg.segment_seconds},
                   {"segments_for_15s", segment_count(15.0, cfg.segment_seconds)},
                   {"viewings", cfg.replay.viewings},
                   {"replay_learning_rate", cfg.replay.learning_rate}}}};
    write_file(cfg.paths.reports_dir / "config_echo.json", echo.dump(2) + "\n");
}

TrainConfig runtime_train_config(const PipelineConfig& cfg) {
    TrainConfig t = cfg.train;
    t.threads = cfg.threads;
    return t;
}

struct Encoded {
    ElementRegistry registry;
    Corpus corpus;
    AlphabetPair alphabets;
    std::vector<EncodedSequence> sequences;
    ObservationShape shape;
};

Encoded encode_for_training(const PipelineConfig& cfg) {
    Encoded e;
    e.registry = cfg.registry();
    e.corpus = load_corpus(cfg, e.registry);
    e.alphabets = load_or_build_alphabets(cfg, e.corpus, e.registry);
    e.shape.V1 = e.alphabets.visual.size();
    e.shape.V2 = e.alphabets.audio.size();
    e.shape.M = corpus_segment_count(e.corpus, cfg.segment_seconds);
    e.shape.segment_seconds = cfg.segment_seconds;
    e.sequences = encode_corpus(e.corpus, e.registry, e.alphabets, cfg.segment_seconds);
    return e;
}

struct VideoScore {
    std::vector<ViewingTrace> traces;  // one per configured modality mode
    VideoEmotionIndices indices;
};

VideoScore score_video(const EncodedSequence& seq, const ModelParams& theta, const PipelineConfig& cfg) {
    VideoScore out;
    std::map<ModalityMode, const ViewingTrace*> by_mode;
    for (auto mode : cfg.modality_modes)
        out.traces.push_back(simulate_viewings(seq, theta, cfg.replay.viewings,
                                               cfg.replay.learning_rate, mode, cfg.scoring));
    for (const auto& t : out.traces) by_mode[t.mode] = &t;
    auto trace_for = [&](ModalityMode m) {
        if (auto it = by_mode.find(m); it != by_mode.end()) return *it->second;
        return simulate_viewings(seq, theta, cfg.replay.viewings, cfg.replay.learning_rate, m,
                                 cfg.scoring);
    };
    if (cfg.video_mode == VideoMode::Joint)
        out.indices = video_indices(trace_for(ModalityMode::Joint));
    else
        out.indices = video_indices(sum_traces(trace_for(ModalityMode::Visual),
                                               trace_for(ModalityMode::Audio)));
    return out;
}

std::vector<VideoScore> score_all(const std::vector<EncodedSequence>& seqs, const ModelParams& theta,
                                  const PipelineConfig& cfg) {
    std::vector<VideoScore> scores(seqs.size());
    parallel_for(seqs.size(), cfg.threads,
                 [&](std::size_t i) { scores[i] = score_video(seqs[i], theta, cfg); });
    return scores;
}

inline const std::array<std::string, 4> kSceneMetricNames{"kld", "bs", "un", "shannon"};

/// Scene rows of `features` joined with first-viewing metrics, one matrix per mode.
struct SceneMetricTables {
    std::vector<ModalityMode> modes;
    std::vector<Matrix> metrics;  // rows aligned with scene_features
};

Matrix first_viewing_matrix(const FeatureTable& features,
                            const std::map<std::pair<std::string, std::size_t>, std::array<double, 4>>& rows,
                            std::string_view mode) {
    Matrix m(features.values.rows(), 4);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto it = rows.find({features.video_ids[r], features.scene_positions[r]});
        if (it == rows.end())
            throw ValidationError("scene_metrics.csv has no " + std::string(mode) + " row for " +
                                  features.video_ids[r] + " scene " +
                                  std::to_string(features.scene_positions[r]));
        std::copy(it->second.begin(), it->second.end(), m.row(r).begin());
    }
    return m;
}

SceneMetricTables read_scene_metrics(const fs::path& path, const FeatureTable& features,
                                     const std::vector<ModalityMode>& order) {
    const auto t = read_csv(path);
    const auto c_vid = column(t, "video_id", path), c_scene = column(t, "scene_index", path),
               c_mode = column(t, "modality_mode", path), c_view = column(t, "viewing", path);
    std::array<std::size_t, 4> c_metric{};
    for (std::size_t i = 0; i < 4; ++i) c_metric[i] = column(t, kSceneMetricNames[i], path);

    std::map<ModalityMode, std::map<std::pair<std::string, std::size_t>, std::array<double, 4>>> rows;
    for (std::size_t r = 1; r < t.size(); ++r) {
        const auto& row = t[r];
        if (row.size() != t.front().size()) throw ValidationError(path.string() + ": ragged row " + std::to_string(r + 1));
        if (parse_size(row[c_view]) != 1) continue;
        std::array<double, 4> v{};
        for (std::size_t i = 0; i < 4; ++i) v[i] = parse_double(row[c_metric[i]]);
        rows[parse_modality_mode(row[c_mode])][{row[c_vid], parse_size(row[c_scene])}] = v;
    }
    SceneMetricTables out;
    for (auto mode : order) {
        auto it = rows.find(mode);
        if (it == rows.end()) continue;
        out.modes.push_back(mode);
        out.metrics.push_back(first_viewing_matrix(features, it->second, to_string(mode)));
    }
    if (out.modes.empty()) throw ValidationError(path.string() + ": no rows for the configured modality modes");
    return out;
}

struct IndexTable {
    std::vector<std::string> video_ids;
    Matrix values;  // N x 12, NaN for undefined decay
};

IndexTable read_video_indices(const fs::path& path) {
    const auto t = read_csv(path);
    const auto names = VideoEmotionIndices::column_names();
    const auto c_vid = column(t, "video_id", path);
    std::array<std::size_t, 12> cols{};
    for (std::size_t i = 0; i < 12; ++i) cols[i] = column(t, names[i], path);
    IndexTable out;
    out.values = Matrix(t.size() - 1, 12);
    for (std::size_t r = 1; r < t.size(); ++r) {
        if (t[r].size() != t.front().size()) throw ValidationError(path.string() + ": ragged row " + std::to_string(r + 1));
        out.video_ids.push_back(t[r][c_vid]);
        for (std::size_t i = 0; i < 12; ++i) out.values.row(r - 1)[i] = parse_double(t[r][cols[i]]);
    }
    return out;
}

std::string scene_metrics_csv(const std::vector<EncodedSequence>& seqs, const std::vector<VideoScore>& scores) {
    CsvWriter csv{"video_id", "scene_index", "modality_mode", "viewing", "kld", "bs", "un", "shannon"};
    for (std::size_t v = 0; v < seqs.size(); ++v)
        for (const auto& trace : scores[v].traces)
            for (std::size_t r = 0; r < trace.viewings.size(); ++r)
                for (std::size_t t = 0; t < trace.viewings[r].size(); ++t) {
                    const auto& m = trace.viewings[r][t];
                    csv.row({seqs[v].video_id, std::to_string(t), std::string(to_string(trace.mode)),
                             std::to_string(r + 1), format_number(m.kld), format_number(m.bs),
                             format_number(m.un), format_number(m.shannon)});
                }
    return csv.str();
}

std::string video_indices_csv(const Corpus& corpus, const std::vector<VideoScore>& scores) {
    std::vector<std::string> header{"video_id", "genre"};
    for (const auto& n : VideoEmotionIndices::column_names()) header.push_back(n);
    CsvWriter csv(header);
    for (std::size_t v = 0; v < scores.size(); ++v) {
        std::vector<std::string> row{corpus.videos[v].video_id, corpus.videos[v].genre};
        for (double x : scores[v].indices.as_array()) row.push_back(format_number(x));
        csv.row(row);
    }
    return csv.str();
}

/// Rows whose 12 indices are all finite.
std::vector<std::size_t> complete_rows(const Matrix& values) {
    std::vector<std::size_t> keep;
    for (std::size_t r = 0; r < values.rows(); ++r) {
        auto row = values.row(r);
        if (std::all_of(row.begin(), row.end(), [](double x) { return std::isfinite(x); }))
            keep.push_back(r);
    }
    return keep;
}

Matrix take_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
    Matrix out(rows.size(), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy(m.row(rows[i]).begin(), m.row(rows[i]).end(), out.row(i).begin());
    return out;
}

std::vector<double> column_of(const Matrix& m, std::size_t c) {
    std::vector<double> out(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) out[r] = m.row(r)[c];
    return out;
}

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (double x : m.row(r)) row.push_back(std::isfinite(x) ? json(x) : json(nullptr));
        rows.push_back(row);
    }
    return rows;
}

json opt_number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

/// Lowest-WCSS run among `repeats` seeded k-means runs.
KMeansResult best_kmeans(const Matrix& points, std::size_t k, std::size_t repeats, std::uint64_t seed) {
    KMeansResult best;
    bool have = false;
    for (std::size_t i = 0; i < repeats; ++i) {
        auto run = kmeans(points, k, substream_seed(seed, "kmeans", i));
        if (!have || run.wcss < best.wcss) {
            best = std::move(run);
            have = true;
        }
    }
    return best;
}

void correlations_csv_rows(CsvWriter& csv, std::string_view mode, const CorrelationMatrix& cm,
                                  std::size_t n) {
    for (std::size_t r = 0; r < cm.row_names.size(); ++r)
        for (std::size_t c = 0; c < cm.col_names.size(); ++c) {
            const auto& cell = cm.at(r, c);
            csv.row({std::string(mode), cm.row_names[r], cm.col_names[c], std::to_string(n),
                     cell ? format_number(cell->r) : "", cell ? format_number(cell->p) : ""});
        }
}

std::vector<std::string> scene_metric_names() {
    return {kSceneMetricNames.begin(), kSceneMetricNames.end()};
}

}  // namespace

std::string IngestSummary::table() const {
    std::ostringstream out;
    out << "videos  scenes  visual_symbols  audio_symbols  max_scenes  segments\n"
        << videos << "  " << scenes << "  " << visual_symbols << "  " << audio_symbols << "  "
        << max_scenes << "  " << segments << "\n";
    return out.str();
}

std::string IngestSummary::to_json() const {
    return json{{"videos", videos},
                {"scenes", scenes},
                {"visual_symbols", visual_symbols},
                {"audio_symbols", audio_symbols},
                {"max_scenes", max_scenes},
                {"segments", segments},
                {"duplicate_ids", duplicate_ids},
                {"warnings", warnings}}
        .dump(2);
}

IngestSummary cmd_ingest(const PipelineConfig& cfg, std::ostream& log) {
    const auto registry = cfg.registry();
    const auto corpus = load_corpus(cfg, registry);
    const auto alphabets = build_alphabet(corpus, registry);

    IngestSummary s;
    s.videos = corpus.videos.size();
    s.scenes = corpus.scene_count();
    s.visual_symbols = alphabets.visual.observed_size();
    s.audio_symbols = alphabets.audio.observed_size();
    for (const auto& v : corpus.videos) s.max_scenes = std::max(s.max_scenes, v.scenes.size());
    s.segments = corpus_segment_count(corpus, cfg.segment_seconds);
    s.duplicate_ids = corpus.duplicate_ids;
    s.warnings = corpus.warnings;

    write_file(cfg.paths.reports_dir / "alphabets.json", alphabets.to_json() + "\n");
    write_file(cfg.paths.reports_dir / "ingest_summary.json", s.to_json() + "\n");
    write_config_echo(cfg);
    for (const auto& w : s.warnings) log << "warning: " << w << "\n";
    log << s.table();
    return s;
}

TrainingTrace cmd_train(const PipelineConfig& cfg, std::ostream& log) {
    auto e = encode_for_training(cfg);
    const auto tc = runtime_train_config(cfg);
    TrainResult result;
    try {
        result = train(e.sequences, e.shape, tc);
    } catch (const InvalidArgument& err) {
        throw ValidationError(std::string("training failed: ") + err.what());
    } catch (const Error& err) {
        throw Error(std::string("training failed: ") + err.what());
    }
    ModelFile file{result.params, e.alphabets, tc};
    write_file(cfg.model_path(), file.to_json() + "\n");
    write_file(cfg.paths.reports_dir / "trace.csv", result.trace.to_csv());
    write_config_echo(cfg);
    const auto& tr = result.trace;
    log << "trained K=" << tc.hidden_states << " on " << tr.n_train << " videos ("
        << tr.n_validation << " held out), " << tr.train_elbo.size() << " epochs\n";
    if (!tr.train_elbo.empty()) log << "final train ELBO " << format_number(tr.train_elbo.back()) << "\n";
    log << "model written to " << cfg.model_path().string() << "\n";
    return tr;
}

void cmd_score(const PipelineConfig& cfg, std::ostream& log) {
    if (!fs::exists(cfg.model_path())) throw MissingInput("model not found: " + cfg.model_path().string());
    const auto model = ModelFile::load(cfg.model_path());
    if (!model.alphabets) throw ValidationError("model file carries no alphabets");
    const auto registry = cfg.registry();
    const auto corpus = load_corpus(cfg, registry);
    const auto& meta = model.params.meta;
    const auto seqs = encode_corpus(corpus, registry, *model.alphabets, meta.segment_seconds, meta.M);
    const auto scores = score_all(seqs, model.params, cfg);

    write_file(cfg.paths.reports_dir / "scene_metrics.csv", scene_metrics_csv(seqs, scores));
    write_file(cfg.paths.reports_dir / "video_indices.csv", video_indices_csv(corpus, scores));
    write_config_echo(cfg);
    log << "scored " << seqs.size() << " videos, " << corpus.scene_count() << " scenes, "
        << cfg.modality_modes.size() << " modality modes, " << cfg.replay.viewings << " viewings\n";
}

void cmd_analyze(const PipelineConfig& cfg, std::ostream& log) {
    const auto registry = cfg.registry();
    const auto corpus = load_corpus(cfg, registry);
    const auto& dir = cfg.paths.reports_dir;

    // Scene-level correlations per modality mode.
    const auto features = scene_features(corpus, registry);
    const auto scene = read_scene_metrics(dir / "scene_metrics.csv", features, cfg.modality_modes);
    CsvWriter corr{"modality_mode", "feature", "metric", "n", "r", "p"};
    for (std::size_t i = 0; i < scene.modes.size(); ++i) {
        const auto cm = correlation_matrix(features.values, features.names, scene.metrics[i],
                                           scene_metric_names());
        correlations_csv_rows(corr, to_string(scene.modes[i]), cm, features.values.rows());
    }
    write_file(dir / "correlations.csv", corr.str());

    // Video-level clustering.
    const auto indices = read_video_indices(dir / "video_indices.csv");
    const auto keep = complete_rows(indices.values);
    if (keep.size() < indices.values.rows())
        log << "notice: " << indices.values.rows() - keep.size()
            << " videos with undefined decay rate excluded from clustering\n";
    const auto raw = take_rows(indices.values, keep);
    const auto z = zscore(raw);
    for (const auto& w : z.warnings) log << "warning: " << w << "\n";
    if (z.kept.empty()) throw ValidationError("analyze: every index column is constant");
    if (cfg.clustering.k_max + 1 > keep.size())
        throw ValidationError("analyze: need more than k_max = " + std::to_string(cfg.clustering.k_max) +
                              " videos with complete indices, have " + std::to_string(keep.size()));
    const auto selection = select_k(z.values, cfg.clustering.k_min, cfg.clustering.k_max,
                                    cfg.clustering.repeats, substream_seed(cfg.seed, "kmeans"),
                                    cfg.threads);
    write_file(dir / "selection.csv", selection.to_csv());

    const std::size_t k = cfg.clustering.k ? cfg.clustering.k : selection.most_stable_k();
    std::vector<std::size_t> labels;
    if (k >= cfg.clustering.k_min && k <= cfg.clustering.k_max)
        labels = selection.row_for(k).best_labels;
    else
        labels = best_kmeans(z.values, k, cfg.clustering.repeats, substream_seed(cfg.seed, "kmeans")).labels;
    const auto centroids = cluster_profile(labels, k, z.values);
    const auto profile = cluster_profile(labels, k, raw);

    const auto names = VideoEmotionIndices::column_names();
    std::vector<std::string> kept_names;
    for (auto c : z.kept) kept_names.push_back(names[c]);
    std::vector<std::string> ids;
    for (auto r : keep) ids.push_back(indices.video_ids[r]);
    std::vector<std::string> excluded;
    for (std::size_t r = 0, j = 0; r < indices.video_ids.size(); ++r) {
        if (j < keep.size() && keep[j] == r) ++j;
        else excluded.push_back(indices.video_ids[r]);
    }
    json clusters = {{"k", k},
                     {"selected_by", cfg.clustering.k ? "config" : "mean_ari"},
                     {"video_ids", ids},
                     {"labels", labels},
                     {"excluded_videos", excluded},
                     {"centroid_columns", kept_names},
                     {"centroids", matrix_to_json(centroids.means)},
                     {"profile_columns", names},
                     {"profiles", {{"sizes", profile.sizes}, {"means", matrix_to_json(profile.means)}}}};
    write_file(dir / "clusters.json", clusters.dump(2) + "\n");

    // ANOVA of expression-element counts and FE indices across clusters.
    const auto vfeat = video_features(corpus, registry);
    std::map<std::string, std::size_t> row_of;
    for (std::size_t r = 0; r < vfeat.video_ids.size(); ++r) row_of[vfeat.video_ids[r]] = r;
    CsvWriter anova{"variable", "kind", "F", "p", "eta2", "df_between", "df_within", "infinite_f", "note"};
    auto anova_row = [&](const std::string& name, std::string_view kind, const std::vector<double>& values) {
        std::vector<std::vector<double>> groups(k);
        for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(values[i]);
        try {
            const auto a = anova_oneway(groups);
            anova.row({name, std::string(kind), format_number(a.F), format_number(a.p), format_number(a.eta2),
                       format_number(a.df_between), format_number(a.df_within), a.infinite_f ? "1" : "0", ""});
        } catch (const Error& e) {
            anova.row({name, std::string(kind), "", "", "", "", "", "0", e.what()});
        }
    };
    for (std::size_t c = 0; c < vfeat.names.size(); ++c) {
        std::vector<double> values;
        for (const auto& id : ids) {
            auto it = row_of.find(id);
            if (it == row_of.end()) throw ValidationError("video_indices.csv names unknown video " + id);
            values.push_back(vfeat.values.row(it->second)[c]);
        }
        anova_row(vfeat.names[c], "feature", values);
    }
    for (std::size_t c = 0; c < 12; ++c) anova_row(names[c], "index", column_of(raw, c));
    write_file(dir / "anova.csv", anova.str());

    // Genre x cluster chi-square.
    std::map<std::string, std::string> genre_of;
    for (const auto& v : corpus.videos) genre_of[v.video_id] = v.genre;
    std::vector<std::string> genres;
    for (const auto& id : ids) genres.push_back(genre_of[id]);
    std::vector<std::string> distinct(genres.begin(), genres.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    json chisq;
    if (distinct.size() < 2) {
        chisq = {{"skipped", true}, {"notice", "single genre; chi-square skipped"}};
        log << "notice: single genre; chi-square skipped\n";
    } else {
        Matrix table(distinct.size(), k);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            auto g = std::lower_bound(distinct.begin(), distinct.end(), genres[i]) - distinct.begin();
            table.row(static_cast<std::size_t>(g))[labels[i]] += 1.0;
        }
        try {
            const auto c = chi_square_residuals(table);
            chisq = {{"skipped", false},  {"genres", distinct}, {"observed", matrix_to_json(table)},
                     {"chi2", c.chi2},     {"df", c.df},         {"p", opt_number(c.p)},
                     {"expected", matrix_to_json(c.expected)},
                     {"std_residuals", matrix_to_json(c.std_residuals)}};
        } catch (const Error& e) {
            chisq = {{"skipped", true}, {"notice", e.what()}};
            log << "notice: chi-square skipped: " << e.what() << "\n";
        }
    }
    write_file(dir / "chisq.json", chisq.dump(2) + "\n");
    write_config_echo(cfg);
    log << "k = " << k << " (" << (cfg.clustering.k ? "from config" : "highest mean ARI")
        << "), cluster sizes";
    for (auto s : profile.sizes) log << " " << s;
    log << "\n";
}

void cmd_sensitivity(const PipelineConfig& cfg, std::ostream& log) {
    auto e = encode_for_training(cfg);
    const auto features = scene_features(e.corpus, e.registry);

    struct Setting {
        std::string name;
        std::string kind;
        double offset;
        TrainConfig train;
    };
    std::vector<Setting> settings{{"control", "control", 0.0, runtime_train_config(cfg)}};
    for (int off : cfg.sensitivity.state_offsets) {
        auto t = runtime_train_config(cfg);
        const long k = static_cast<long>(t.hidden_states) + off;
        if (k < 1) {
            log << "notice: hidden-state offset " << off << " skipped (K would be " << k << ")\n";
            continue;
        }
        t.hidden_states = static_cast<std::size_t>(k);
        settings.push_back({"hidden_states" + std::string(off > 0 ? "+" : "") + std::to_string(off),
                            "hidden_states", static_cast<double>(off), t});
    }
    for (double off : cfg.sensitivity.scale_offsets) {
        auto t = runtime_train_config(cfg);
        t.dirichlet_scale += off;
        if (!(t.dirichlet_scale > 0.0)) {
            log << "notice: scale offset " << off << " skipped (scale would be <= 0)\n";
            continue;
        }
        std::string name = "dirichlet_scale" + std::string(off > 0 ? "+" : "") + format_number(off);
        settings.push_back({name, "dirichlet_scale", off, t});
    }

    struct Outcome {
        double val_loss = std::nan("");
        Matrix indices;
        std::vector<Matrix> scene_metrics;  // per modality mode, viewing 1
    };
    auto run = [&](const Setting& s) {
        Outcome o;
        auto result = train(e.sequences, e.shape, s.train);
        if (!result.trace.validation_neg_elbo.empty()) o.val_loss = result.trace.validation_neg_elbo.back();
        const auto scores = score_all(e.sequences, result.params, cfg);
        o.indices = Matrix(scores.size(), 12);
        for (std::size_t v = 0; v < scores.size(); ++v) {
            auto a = scores[v].indices.as_array();
            std::copy(a.begin(), a.end(), o.indices.row(v).begin());
        }
        for (std::size_t m = 0; m < cfg.modality_modes.size(); ++m) {
            Matrix mm(features.values.rows(), 4);
            std::size_t row = 0;
            for (const auto& sc : scores)
                for (const auto& metric : sc.traces[m].viewings.front()) {
                    auto out = mm.row(row++);
                    out[0] = metric.kld;
                    out[1] = metric.bs;
                    out[2] = metric.un;
                    out[3] = metric.shannon;
                }
            o.scene_metrics.push_back(std::move(mm));
        }
        return o;
    };

    const auto control = run(settings.front());
    const auto keep_ref = complete_rows(control.indices);
    const auto z_ref = zscore(take_rows(control.indices, keep_ref));
    if (z_ref.kept.empty()) throw ValidationError("sensitivity: every index column is constant");
    std::size_t k = cfg.clustering.k;
    if (!k) {
        if (cfg.clustering.k_max + 1 > keep_ref.size())
            throw ValidationError("sensitivity: not enough videos for k selection");
        k = select_k(z_ref.values, cfg.clustering.k_min, cfg.clustering.k_max, cfg.clustering.repeats,
                     substream_seed(cfg.seed, "kmeans"), cfg.threads)
                .most_stable_k();
    }
    const auto kmeans_seed = substream_seed(cfg.seed, "kmeans");
    auto cluster = [&](const Matrix& idx, const std::vector<std::size_t>& keep) {
        const auto z = zscore(take_rows(idx, keep));
        if (z.kept.empty() || keep.size() < k) return std::vector<std::size_t>{};
        return best_kmeans(z.values, k, cfg.clustering.repeats, kmeans_seed).labels;
    };
    const auto ref_labels = cluster(control.indices, keep_ref);

    // Top-|r| (feature, metric) pairs per mode from the control run.
    struct Pair {
        std::size_t mode, feature, metric;
    };
    std::vector<Pair> top;
    for (std::size_t m = 0; m < cfg.modality_modes.size(); ++m) {
        const auto cm = correlation_matrix(features.values, features.names, control.scene_metrics[m],
                                           scene_metric_names());
        std::vector<std::tuple<double, std::size_t, std::size_t>> cand;
        for (std::size_t f = 0; f < cm.row_names.size(); ++f)
            for (std::size_t c = 0; c < 3; ++c)
                if (const auto& cell = cm.at(f, c)) cand.emplace_back(-std::abs(cell->r), f, c);
        std::sort(cand.begin(), cand.end());
        for (std::size_t i = 0; i < std::min(cfg.bootstrap.top_features, cand.size()); ++i)
            top.push_back({m, std::get<1>(cand[i]), std::get<2>(cand[i])});
    }

    CsvWriter summary{"setting", "kind", "offset", "hidden_states", "dirichlet_scale", "k", "n_clustered",
                      "ari", "final_validation_loss"};
    CsvWriter corr{"setting", "modality_mode", "feature", "metric", "r", "p", "ci_lo", "ci_hi", "level"};
    for (std::size_t si = 0; si < settings.size(); ++si) {
        const auto& s = settings[si];
        const Outcome o = si == 0 ? control : run(s);
        const auto keep = complete_rows(o.indices);
        const auto labels = cluster(o.indices, keep);

        // ARI over videos clustered in both runs.
        std::vector<std::size_t> a, b;
        for (std::size_t i = 0, j = 0; i < keep_ref.size() && j < keep.size();) {
            if (keep_ref[i] == keep[j]) {
                if (!ref_labels.empty() && !labels.empty()) {
                    a.push_back(ref_labels[i]);
                    b.push_back(labels[j]);
                }
                ++i;
                ++j;
            } else if (keep_ref[i] < keep[j]) {
                ++i;
            } else {
                ++j;
            }
        }
        const double ari = a.size() >= 2 ? adjusted_rand_index(a, b) : std::nan("");
        summary.row({s.name, s.kind, format_number(s.offset), std::to_string(s.train.hidden_states),
                     format_number(s.train.dirichlet_scale), std::to_string(k), std::to_string(a.size()),
                     format_number(ari), format_number(o.val_loss)});

        for (std::size_t p = 0; p < top.size(); ++p) {
            const auto& pr = top[p];
            const auto x = column_of(features.values, pr.feature);
            const auto y = column_of(o.scene_metrics[pr.mode], pr.metric);
            std::vector<std::string> row{s.name, std::string(to_string(cfg.modality_modes[pr.mode])),
                                         features.names[pr.feature], kSceneMetricNames[pr.metric]};
            try {
                const auto c = pearson(x, y);
                const auto ci = bootstrap_ci(x, y, cfg.bootstrap.resamples, cfg.bootstrap.level,
                                             substream_seed(cfg.seed, "bootstrap", p));
                row.insert(row.end(), {format_number(c.r), format_number(c.p), format_number(ci.lo),
                                       format_number(ci.hi), format_number(cfg.bootstrap.level)});
            } catch (const Error&) {
                row.insert(row.end(), {"", "", "", "", format_number(cfg.bootstrap.level)});
            }
            corr.row(row);
        }
        log << s.name << ": ARI vs control " << format_number(ari) << "\n";
    }
    write_file(cfg.paths.reports_dir / "sensitivity.csv", summary.str());
    write_file(cfg.paths.reports_dir / "sensitivity_correlations.csv", corr.str());
    write_config_echo(cfg);
}

void cmd_sweep(const PipelineConfig& cfg, std::ostream& log) {
    auto e = encode_for_training(cfg);
    SweepGrid grid;
    grid.base = cfg.sweep.base;
    grid.base.seed = cfg.seed;
    grid.base.threads = cfg.threads;
    grid.hidden_states = cfg.sweep.hidden_states;
    grid.learning_rates = cfg.sweep.learning_rates;
    grid.dirichlet_scales = cfg.sweep.dirichlet_scales;
    grid.seeds = cfg.sweep.seeds;
    const auto report = hyperparameter_sweep(e.sequences, e.shape, grid);
    write_file(cfg.paths.reports_dir / "sweep.csv", report.to_csv());
    write_config_echo(cfg);
    for (const auto& row : report.rows)
        if (row.best)
            log << "best " << row.axis << " = " << format_number(row.value) << " (mean validation loss "
                << format_number(row.mean_val_loss) << ")\n";
}

void cmd_syngen(std::string_view spec_json, std::uint64_t seed, const fs::path& corpus_out,
                const fs::path& truth_out, std::ostream& log) {
    GenSpec spec;
    try {
        spec = GenSpec::from_json(spec_json);
        spec.validate(ElementRegistry::default_registry());
    } catch (const InvalidArgument& e) {
        throw ValidationError(e.what());
    }
    const auto g = generate_corpus(spec, seed);
    write_corpus(corpus_out, g.corpus);
    write_file(truth_out, g.truth.to_json() + "\n");
    log << "generated " << g.corpus.videos.size() << " videos, " << g.corpus.scene_count()
        << " scenes (" << g.truth.coverage_patches << " coverage patches)\n";
}

}  // namespace adfe
