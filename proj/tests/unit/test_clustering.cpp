#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "adfe/clustering.hpp"
#include "helpers.hpp"

using namespace adfe;
using adfe::test::planted_blobs;

namespace {

Matrix points(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(rows.size(), rows.begin()->size());
    std::size_t r = 0;
    for (const auto& row : rows) {
        std::size_t c = 0;
        for (double x : row) m(r, c++) = x;
        ++r;
    }
    return m;
}

/// Pair-counting ARI straight from the definition.
double brute_ari(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    double both = 0, in_a = 0, in_b = 0, pairs = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = i + 1; j < a.size(); ++j) {
            const bool sa = a[i] == a[j], sb = b[i] == b[j];
            both += sa && sb;
            in_a += sa;
            in_b += sb;
            ++pairs;
        }
    const double expected = in_a * in_b / pairs;
    return (both - expected) / (0.5 * (in_a + in_b) - expected);
}

}  // namespace

TEST(KMeans, SingleClusterIsMean) {
    auto p = points({{0, 0}, {2, 0}, {4, 6}});
    auto r = kmeans(p, 1, 1);
    EXPECT_NEAR(r.centroids(0, 0), 2.0, 1e-12);
    EXPECT_NEAR(r.centroids(0, 1), 2.0, 1e-12);
    EXPECT_NEAR(r.wcss, 4 + 4 + 4 + 0 + 4 + 16, 1e-12);
}

TEST(KMeans, TwoSeparatedPairs) {
    auto p = points({{0, 0}, {0, 1}, {10, 10}, {10, 12}});
    auto r = kmeans(p, 2, 3);
    EXPECT_EQ(r.labels[0], r.labels[1]);
    EXPECT_EQ(r.labels[2], r.labels[3]);
    EXPECT_NE(r.labels[0], r.labels[2]);
    EXPECT_NEAR(r.wcss, 0.5 + 2.0, 1e-12);
    EXPECT_EQ(r.labels[0], 0u);  // first-appearance relabeling
}

TEST(KMeans, KEqualsNHasZeroWcss) {
    auto p = points({{0, 0}, {1, 5}, {3, 2}, {7, 7}});
    EXPECT_NEAR(kmeans(p, 4, 2).wcss, 0.0, 1e-12);
    EXPECT_THROW(kmeans(p, 5, 2), InvalidArgument);
    EXPECT_THROW(kmeans(p, 0, 2), InvalidArgument);
}

TEST(KMeans, WcssNonIncreasingAndDeterministic) {
    auto b = planted_blobs(4, 40, 5, 2.0, 7);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto r = kmeans(b.points, 4, seed);
        for (std::size_t i = 1; i < r.wcss_history.size(); ++i)
            EXPECT_LE(r.wcss_history[i], r.wcss_history[i - 1] + 1e-9);
        EXPECT_NEAR(r.wcss, wcss(b.points, r.labels, r.centroids), 1e-9);
        EXPECT_EQ(kmeans(b.points, 4, seed).labels, r.labels);
    }
}

TEST(KMeans, ReorderingPointsKeepsPartition) {
    auto b = planted_blobs(3, 30, 4, 8.0, 2);
    std::vector<std::size_t> perm(b.points.rows());
    std::iota(perm.begin(), perm.end(), 0);
    std::reverse(perm.begin(), perm.end());
    Matrix shuffled(b.points.rows(), b.points.cols());
    for (std::size_t i = 0; i < perm.size(); ++i)
        for (std::size_t c = 0; c < b.points.cols(); ++c) shuffled(i, c) = b.points(perm[i], c);
    auto r1 = kmeans(b.points, 3, 5);
    auto r2 = kmeans(shuffled, 3, 5);
    std::vector<std::size_t> back(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) back[perm[i]] = r2.labels[i];
    EXPECT_DOUBLE_EQ(adjusted_rand_index(r1.labels, back), 1.0);
}

TEST(Silhouette, HandInstances) {
    auto pairs = points({{0, 0}, {0, 0.1}, {100, 100}, {100, 100.1}});
    std::vector<std::size_t> good{0, 0, 1, 1}, mixed{0, 1, 0, 1};
    EXPECT_GT(silhouette(pairs, good), 0.95);
    auto same = points({{1, 1}, {1, 1}, {1, 1}, {1, 1}});
    EXPECT_DOUBLE_EQ(silhouette(same, good), 0.0);
    auto blob = points({{0, 0}, {0, 1}, {1, 0}, {1, 1}});
    std::vector<std::size_t> diag{0, 1, 1, 0};
    EXPECT_LT(silhouette(pairs, mixed), 0.0);
    EXPECT_LE(silhouette(blob, diag), 0.0);
    std::vector<std::size_t> one{0, 0, 0, 0};
    EXPECT_THROW(silhouette(pairs, one), InvalidArgument);
}

TEST(Silhouette, SingletonScoresZeroAndIsometryInvariant) {
    auto p = points({{0, 0}, {0, 1}, {5, 5}});
    std::vector<std::size_t> l{0, 0, 1};
    const double s = silhouette(p, l);
    EXPECT_GE(s, -1.0);
    EXPECT_LE(s, 1.0);
    auto moved = points({{3, -2}, {2, -2}, {-2, 3}});  // rotate 90 degrees then translate
    EXPECT_NEAR(silhouette(moved, l), s, 1e-12);
}

TEST(Ari, GoldenAndProperties) {
    std::vector<std::size_t> a{0, 0, 1, 1}, b{0, 1, 0, 1}, c{1, 1, 0, 0};
    EXPECT_NEAR(adjusted_rand_index(a, b), -0.5, 1e-12);
    EXPECT_NEAR(brute_ari(a, b), -0.5, 1e-12);
    EXPECT_DOUBLE_EQ(adjusted_rand_index(a, a), 1.0);
    EXPECT_DOUBLE_EQ(adjusted_rand_index(a, c), 1.0);
    Rng rng(3);
    for (int rep = 0; rep < 30; ++rep) {
        std::vector<std::size_t> x(25), y(25);
        for (auto& v : x) v = uniform_index(rng, 3);
        for (auto& v : y) v = uniform_index(rng, 4);
        EXPECT_NEAR(adjusted_rand_index(x, y), adjusted_rand_index(y, x), 1e-14);
        EXPECT_NEAR(adjusted_rand_index(x, y), brute_ari(x, y), 1e-12);
    }
    std::vector<std::size_t> shorter{0, 1};
    EXPECT_THROW(adjusted_rand_index(a, shorter), InvalidArgument);
}

TEST(Kneedle, EndpointsLinearAndKnee) {
    std::vector<std::size_t> ks;
    std::vector<double> inv, lin;
    for (std::size_t k = 1; k <= 10; ++k) {
        ks.push_back(k);
        inv.push_back(1.0 / static_cast<double>(k));
        lin.push_back(20.0 - 2.0 * static_cast<double>(k));
    }
    auto d = kneedle_distance(ks, inv);
    EXPECT_DOUBLE_EQ(d.front(), 0.0);
    EXPECT_DOUBLE_EQ(d.back(), 0.0);
    EXPECT_EQ(std::max_element(d.begin(), d.end()) - d.begin() + 1, 3);
    for (double x : kneedle_distance(ks, lin)) EXPECT_NEAR(x, 0.0, 1e-12);
    std::vector<std::size_t> bad{3, 2, 4};
    std::vector<double> y{1, 2, 3};
    EXPECT_THROW(kneedle_distance(bad, y), InvalidArgument);
}

TEST(SelectK, NineRowsAndPlantedOptimum) {
    auto b = planted_blobs(3, 100, 12, 6.0, 11);
    auto t = select_k(b.points, 2, 10, 8, 5, 2);
    ASSERT_EQ(t.rows.size(), 9u);
    EXPECT_EQ(t.most_stable_k(), 3u);
    EXPECT_DOUBLE_EQ(t.rows.front().kneedle, 0.0);
    EXPECT_DOUBLE_EQ(t.rows.back().kneedle, 0.0);
    EXPECT_GE(adjusted_rand_index(t.row_for(3).best_labels, b.labels), 0.95);
    const auto csv = t.to_csv();
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "k,silhouette,mean_ari,kneedle_dist,mean_wcss,single_run");
    EXPECT_EQ(select_k(b.points, 2, 10, 8, 5, 1).to_csv(), csv);
}

TEST(SelectK, SingleRepeatIsFlagged) {
    auto b = planted_blobs(2, 20, 3, 5.0, 1);
    auto t = select_k(b.points, 2, 4, 1, 0);
    for (const auto& r : t.rows) {
        EXPECT_TRUE(r.single_run);
        EXPECT_DOUBLE_EQ(r.mean_ari, 1.0);
    }
    EXPECT_THROW(select_k(b.points, 1, 4, 2, 0), InvalidArgument);
    EXPECT_THROW(select_k(b.points, 2, 40, 2, 0), InvalidArgument);
}

TEST(Profile, MeansAndSizes) {
    auto p = points({{1, 10}, {3, 20}, {5, 30}, {7, 40}});
    std::vector<std::size_t> l{0, 0, 1, 1};
    auto prof = cluster_profile(l, 2, p);
    EXPECT_EQ(prof.sizes, (std::vector<std::size_t>{2, 2}));
    EXPECT_DOUBLE_EQ(prof.means(0, 0), 2.0);
    EXPECT_DOUBLE_EQ(prof.means(1, 1), 35.0);
    std::vector<std::size_t> all(4, 0);
    auto one = cluster_profile(all, 1, p);
    EXPECT_DOUBLE_EQ(one.means(0, 0), 4.0);
    EXPECT_EQ(one.sizes[0], 4u);
}

TEST(Profile, PlantedClustersSeparateOnPlantedAxes) {
    auto b = planted_blobs(3, 50, 3, 6.0, 4);
    auto r = kmeans(b.points, 3, 2);
    auto matched = match_labels(b.labels, r.labels);
    auto prof = cluster_profile(matched, 3, b.points);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t o = 0; o < 3; ++o)
            if (o != c) EXPECT_GT(prof.means(c, c), prof.means(o, c));
}

TEST(MatchLabels, RecoversPermutation) {
    std::vector<std::size_t> ref{0, 0, 1, 1, 2, 2}, perm{2, 2, 0, 0, 1, 1};
    EXPECT_EQ(match_labels(ref, perm), ref);
    std::vector<std::size_t> extra{0, 0, 1, 1, 2, 3};
    auto m = match_labels(ref, extra);
    EXPECT_EQ(m[0], 0u);
    EXPECT_EQ(m[2], 1u);
    EXPECT_GE(m[5], 2u);
}
