#pragma once

#include <optional>
#include <string>
#include <vector>

#include "adfe/corpus.hpp"
#include "adfe/matrix.hpp"
#include "adfe/stats.hpp"

namespace adfe {

/// Scene-level expression features: per-modality counts for each category,
/// the out-of-category count and the modality total
/// (V[Attract] .. V[Other], V[Total], A[Attract] .. A[Total]).
struct FeatureTable {
    std::vector<std::string> names;
    Matrix values;  // rows x names
    std::vector<std::string> video_ids;
    std::vector<std::size_t> scene_positions;  // position within the video; empty for video tables
};

std::vector<std::string> feature_names();

FeatureTable scene_features(const Corpus& corpus, const ElementRegistry& registry);

/// Per-video sums of the scene features.
FeatureTable video_features(const Corpus& corpus, const ElementRegistry& registry);

/// Feature x metric Pearson table; an undefined cell (constant column) is null.
struct CorrelationMatrix {
    std::vector<std::string> row_names;
    std::vector<std::string> col_names;
    std::vector<std::optional<Correlation>> cells;  // row-major

    const std::optional<Correlation>& at(std::size_t r, std::size_t c) const {
        return cells[r * col_names.size() + c];
    }
    std::vector<std::optional<double>> r_values() const;
};

CorrelationMatrix correlation_matrix(const Matrix& features,
                                     const std::vector<std::string>& feature_names,
                                     const Matrix& metrics,
                                     const std::vector<std::string>& metric_names);

}  // namespace adfe
