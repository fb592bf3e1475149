#include "adfe/features.hpp"

namespace adfe {

namespace {

constexpr std::size_t kPerModality = kCategoryCount + 1;  // categories incl. Other, then Total

void write_counts(const CategoryCounts& c, std::span<double> out) {
    for (std::size_t i = 0; i < kCategoryCount; ++i) {
        out[i] = c.visual[i];
        out[kPerModality + i] = c.audio[i];
    }
    out[kCategoryCount] = c.visual_total();
    out[kPerModality + kCategoryCount] = c.audio_total();
}

std::vector<double> column(const Matrix& m, std::size_t j) {
    std::vector<double> v(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) v[i] = m(i, j);
    return v;
}

}  // namespace

std::vector<std::string> feature_names() {
    std::vector<std::string> names;
    for (const char* prefix : {"V", "A"}) {
        for (auto c : {Category::Attract, Category::Brand, Category::Connect, Category::Direct,
                       Category::Other})
            names.push_back(std::string(prefix) + "[" + std::string(to_string(c)) + "]");
        names.push_back(std::string(prefix) + "[Total]");
    }
    return names;
}

FeatureTable scene_features(const Corpus& corpus, const ElementRegistry& registry) {
    FeatureTable t;
    t.names = feature_names();
    t.values = Matrix(corpus.scene_count(), t.names.size());
    std::size_t row = 0;
    for (const auto& v : corpus.videos) {
        for (std::size_t s = 0; s < v.scenes.size(); ++s, ++row) {
            write_counts(category_counts(v.scenes[s], registry), t.values.row(row));
            t.video_ids.push_back(v.video_id);
            t.scene_positions.push_back(s);
        }
    }
    return t;
}

FeatureTable video_features(const Corpus& corpus, const ElementRegistry& registry) {
    FeatureTable t;
    t.names = feature_names();
    t.values = Matrix(corpus.videos.size(), t.names.size(), 0.0);
    std::vector<double> buf(t.names.size());
    for (std::size_t i = 0; i < corpus.videos.size(); ++i) {
        const auto& v = corpus.videos[i];
        for (const auto& s : v.scenes) {
            write_counts(category_counts(s, registry), buf);
            for (std::size_t j = 0; j < buf.size(); ++j) t.values(i, j) += buf[j];
        }
        t.video_ids.push_back(v.video_id);
    }
    return t;
}

std::vector<std::optional<double>> CorrelationMatrix::r_values() const {
    std::vector<std::optional<double>> out;
    out.reserve(cells.size());
    for (const auto& c : cells) out.push_back(c ? std::optional<double>(c->r) : std::nullopt);
    return out;
}

CorrelationMatrix correlation_matrix(const Matrix& features,
                                     const std::vector<std::string>& feature_names,
                                     const Matrix& metrics,
                                     const std::vector<std::string>& metric_names) {
    if (features.rows() != metrics.rows())
        throw InvalidArgument("correlation_matrix: row count mismatch");
    if (feature_names.size() != features.cols() || metric_names.size() != metrics.cols())
        throw InvalidArgument("correlation_matrix: name count mismatch");
    CorrelationMatrix cm;
    cm.row_names = feature_names;
    cm.col_names = metric_names;
    for (std::size_t i = 0; i < features.cols(); ++i) {
        const auto x = column(features, i);
        for (std::size_t j = 0; j < metrics.cols(); ++j) {
            const auto y = column(metrics, j);
            try {
                cm.cells.emplace_back(pearson(x, y));
            } catch (const UndefinedStatistic&) {
                cm.cells.emplace_back(std::nullopt);
            }
        }
    }
    return cm;
}

}  // namespace adfe
