#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "adfe/matrix.hpp"

namespace adfe {

struct KMeansResult {
    std::vector<std::size_t> labels;  // relabeled by first appearance
    Matrix centroids;                 // k x d
    double wcss = 0.0;
    std::vector<double> wcss_history;  // after each Lloyd iteration
    std::size_t iterations = 0;
};

/// k-means++ seeding followed by Lloyd iterations until the assignment is a
/// fixpoint or max_iter is reached. An emptied cluster is re-seeded at the
/// point farthest from its centroid.
KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed,
                    std::size_t max_iter = 300);

double wcss(const Matrix& points, std::span<const std::size_t> labels, const Matrix& centroids);

/// Mean silhouette; points in singleton clusters score 0.
double silhouette(const Matrix& points, std::span<const std::size_t> labels);

double adjusted_rand_index(std::span<const std::size_t> a, std::span<const std::size_t> b);

/// Signed vertical distance from the min-max normalized curve to the chord
/// joining its endpoints (positive below the chord). `ks` must be strictly
/// increasing; endpoints are 0.
std::vector<double> kneedle_distance(std::span<const std::size_t> ks,
                                     std::span<const double> wcss_by_k);

struct SelectionRow {
    std::size_t k = 0;
    double silhouette = 0.0;     // of the lowest-WCSS run
    double mean_ari = 1.0;       // mean pairwise ARI among the repeated runs
    bool single_run = false;     // mean_ari defined as 1 with one run
    double mean_wcss = 0.0;
    double kneedle = 0.0;
    std::vector<std::size_t> best_labels;
};

struct SelectionTable {
    std::vector<SelectionRow> rows;

    std::string to_csv() const;
    /// k with the highest mean ARI; ties go to the smaller k.
    std::size_t most_stable_k() const;
    const SelectionRow& row_for(std::size_t k) const;
};

SelectionTable select_k(const Matrix& features, std::size_t k_min, std::size_t k_max,
                        std::size_t repeats, std::uint64_t seed, unsigned threads = 1);

struct ClusterProfile {
    std::vector<std::size_t> sizes;
    Matrix means;  // k x d
};

ClusterProfile cluster_profile(std::span<const std::size_t> labels, std::size_t k,
                               const Matrix& values);

/// Relabel `labels` so each cluster takes the reference label it overlaps
/// most (greedy on the contingency table).
std::vector<std::size_t> match_labels(std::span<const std::size_t> reference,
                                      std::span<const std::size_t> labels);

}  // namespace adfe
