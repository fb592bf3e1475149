#include "adfe/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "adfe/csv.hpp"
#include "adfe/error.hpp"
#include "adfe/parallel.hpp"
#include "adfe/rng.hpp"

namespace adfe {

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

std::size_t max_label(std::span<const std::size_t> labels) {
    return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
}

double choose2(double n) { return n * (n - 1.0) / 2.0; }

}  // namespace

double wcss(const Matrix& points, std::span<const std::size_t> labels, const Matrix& centroids) {
    double s = 0.0;
    for (std::size_t i = 0; i < points.rows(); ++i) s += sq_dist(points.row(i), centroids.row(labels[i]));
    return s;
}

KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed, std::size_t max_iter) {
    const std::size_t n = points.rows(), d = points.cols();
    if (k == 0) throw InvalidArgument("kmeans: k must be >= 1");
    if (k > n) throw InvalidArgument("kmeans: k exceeds number of points");
    Rng rng(seed);

    // k-means++ seeding
    Matrix centroids(k, d);
    std::vector<bool> chosen(n, false);
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    std::size_t first = uniform_index(rng, n);
    for (std::size_t c = 0; c < k; ++c) {
        std::size_t pick = first;
        if (c > 0) {
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) total += chosen[i] ? 0.0 : d2[i];
            if (total > 0.0) {
                std::vector<double> w(n);
                for (std::size_t i = 0; i < n; ++i) w[i] = chosen[i] ? 0.0 : d2[i];
                pick = sample_categorical(rng, w);
            } else {
                std::vector<std::size_t> free;
                for (std::size_t i = 0; i < n; ++i)
                    if (!chosen[i]) free.push_back(i);
                pick = free[uniform_index(rng, free.size())];
            }
        }
        chosen[pick] = true;
        std::copy(points.row(pick).begin(), points.row(pick).end(), centroids.row(c).begin());
        for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], sq_dist(points.row(i), centroids.row(c)));
    }

    KMeansResult res;
    std::vector<std::size_t> labels(n, k);  // k = unassigned
    std::vector<std::size_t> counts(k);
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                const double dd = sq_dist(points.row(i), centroids.row(c));
                if (dd < best_d) {
                    best_d = dd;
                    best = c;
                }
            }
            if (labels[i] != best) {
                labels[i] = best;
                changed = true;
            }
        }
        if (!changed) break;
        ++res.iterations;

        std::fill(counts.begin(), counts.end(), 0);
        Matrix sums(k, d, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            ++counts[labels[i]];
            auto row = points.row(i);
            auto s = sums.row(labels[i]);
            for (std::size_t j = 0; j < d; ++j) s[j] += row[j];
        }
        for (std::size_t c = 0; c < k; ++c)
            if (counts[c])
                for (std::size_t j = 0; j < d; ++j) centroids(c, j) = sums(c, j) / static_cast<double>(counts[c]);

        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c]) continue;
            // re-seed at the point farthest from its centroid, taken from a cluster of size > 1
            std::size_t far = n;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (counts[labels[i]] < 2) continue;
                const double dd = sq_dist(points.row(i), centroids.row(labels[i]));
                if (dd > far_d) {
                    far_d = dd;
                    far = i;
                }
            }
            if (far == n) break;
            const std::size_t old = labels[far];
            --counts[old];
            labels[far] = c;
            counts[c] = 1;
            std::copy(points.row(far).begin(), points.row(far).end(), centroids.row(c).begin());
            std::fill(centroids.row(old).begin(), centroids.row(old).end(), 0.0);
            for (std::size_t i = 0; i < n; ++i)
                if (labels[i] == old)
                    for (std::size_t j = 0; j < d; ++j) centroids(old, j) += points(i, j);
            for (std::size_t j = 0; j < d; ++j) centroids(old, j) /= static_cast<double>(counts[old]);
        }
        res.wcss_history.push_back(wcss(points, labels, centroids));
    }

    // relabel by first appearance so equal partitions print equal labels
    std::vector<std::size_t> remap(k, k);
    std::size_t next = 0;
    for (auto l : labels)
        if (remap[l] == k) remap[l] = next++;
    for (std::size_t c = 0; c < k; ++c)
        if (remap[c] == k) remap[c] = next++;
    res.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) res.labels[i] = remap[labels[i]];
    res.centroids = Matrix(k, d);
    for (std::size_t c = 0; c < k; ++c)
        std::copy(centroids.row(c).begin(), centroids.row(c).end(), res.centroids.row(remap[c]).begin());
    res.wcss = wcss(points, res.labels, res.centroids);
    if (res.wcss_history.empty()) res.wcss_history.push_back(res.wcss);
    return res;
}

double silhouette(const Matrix& points, std::span<const std::size_t> labels) {
    const std::size_t n = points.rows();
    if (labels.size() != n) throw InvalidArgument("silhouette: label count mismatch");
    const std::size_t k = max_label(labels) + 1;
    std::vector<std::size_t> sizes(k, 0);
    for (auto l : labels) ++sizes[l];
    std::size_t non_empty = 0;
    for (auto s : sizes) non_empty += s > 0;
    if (non_empty < 2) throw InvalidArgument("silhouette: need at least two clusters");

    double total = 0.0;
    std::vector<double> sum(k);
    for (std::size_t i = 0; i < n; ++i) {
        if (sizes[labels[i]] == 1) continue;  // contributes 0
        std::fill(sum.begin(), sum.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) sum[labels[j]] += std::sqrt(sq_dist(points.row(i), points.row(j)));
        const double a = sum[labels[i]] / static_cast<double>(sizes[labels[i]] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c)
            if (c != labels[i] && sizes[c] > 0) b = std::min(b, sum[c] / static_cast<double>(sizes[c]));
        const double denom = std::max(a, b);
        total += denom > 0.0 ? (b - a) / denom : 0.0;
    }
    return total / static_cast<double>(n);
}

double adjusted_rand_index(std::span<const std::size_t> a, std::span<const std::size_t> b) {
    if (a.size() != b.size()) throw InvalidArgument("adjusted_rand_index: length mismatch");
    const std::size_t n = a.size();
    if (n < 2) return 1.0;
    std::map<std::pair<std::size_t, std::size_t>, double> table;
    std::map<std::size_t, double> ra, rb;
    for (std::size_t i = 0; i < n; ++i) {
        table[{a[i], b[i]}] += 1.0;
        ra[a[i]] += 1.0;
        rb[b[i]] += 1.0;
    }
    double index = 0.0, sa = 0.0, sb = 0.0;
    for (const auto& [key, c] : table) index += choose2(c);
    for (const auto& [key, c] : ra) sa += choose2(c);
    for (const auto& [key, c] : rb) sb += choose2(c);
    const double expected = sa * sb / choose2(static_cast<double>(n));
    const double max_index = 0.5 * (sa + sb);
    if (max_index == expected) return index == max_index ? 1.0 : 0.0;
    return (index - expected) / (max_index - expected);
}

std::vector<double> kneedle_distance(std::span<const std::size_t> ks,
                                     std::span<const double> wcss_by_k) {
    if (ks.size() != wcss_by_k.size()) throw InvalidArgument("kneedle: length mismatch");
    const std::size_t n = ks.size();
    if (n < 3) throw InvalidArgument("kneedle: need at least 3 points");
    for (std::size_t i = 1; i < n; ++i)
        if (ks[i] <= ks[i - 1]) throw InvalidArgument("kneedle: k grid must be strictly increasing");
    const auto [lo, hi] = std::minmax_element(wcss_by_k.begin(), wcss_by_k.end());
    std::vector<double> out(n, 0.0);
    if (*hi == *lo) return out;
    const double x0 = static_cast<double>(ks.front()), x1 = static_cast<double>(ks.back());
    auto ny = [&](std::size_t i) { return (wcss_by_k[i] - *lo) / (*hi - *lo); };
    const double y0 = ny(0), y1 = ny(n - 1);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double x = (static_cast<double>(ks[i]) - x0) / (x1 - x0);
        const double chord = y0 + (y1 - y0) * x;
        out[i] = chord - ny(i);
    }
    return out;
}

std::string SelectionTable::to_csv() const {
    CsvWriter csv({"k", "silhouette", "mean_ari", "kneedle_dist", "mean_wcss", "single_run"});
    for (const auto& r : rows)
        csv.row({std::to_string(r.k), format_number(r.silhouette), format_number(r.mean_ari),
                 format_number(r.kneedle), format_number(r.mean_wcss), r.single_run ? "1" : "0"});
    return csv.str();
}

std::size_t SelectionTable::most_stable_k() const {
    if (rows.empty()) throw InvalidArgument("selection table is empty");
    const SelectionRow* best = &rows.front();
    for (const auto& r : rows)
        if (r.mean_ari > best->mean_ari) best = &r;
    return best->k;
}

const SelectionRow& SelectionTable::row_for(std::size_t k) const {
    for (const auto& r : rows)
        if (r.k == k) return r;
    throw InvalidArgument("selection table has no row for k = " + std::to_string(k));
}

SelectionTable select_k(const Matrix& features, std::size_t k_min, std::size_t k_max,
                        std::size_t repeats, std::uint64_t seed, unsigned threads) {
    const std::size_t n = features.rows();
    if (k_min < 2 || k_max < k_min || k_max + 1 > n)
        throw InvalidArgument("select_k: k range must lie within [2, N-1]");
    if (repeats == 0) throw InvalidArgument("select_k: repeats must be >= 1");
    const std::size_t nk = k_max - k_min + 1;

    std::vector<KMeansResult> runs(nk * repeats);
    parallel_for(runs.size(), threads, [&](std::size_t i) {
        const std::size_t k = k_min + i / repeats;
        runs[i] = kmeans(features, k, substream_seed(seed, "kmeans", i));
    });

    SelectionTable table;
    std::vector<std::size_t> ks;
    std::vector<double> mean_wcss;
    for (std::size_t ki = 0; ki < nk; ++ki) {
        SelectionRow row;
        row.k = k_min + ki;
        const KMeansResult* best = nullptr;
        double wsum = 0.0;
        for (std::size_t r = 0; r < repeats; ++r) {
            const auto& run = runs[ki * repeats + r];
            wsum += run.wcss;
            if (!best || run.wcss < best->wcss) best = &run;
        }
        row.mean_wcss = wsum / static_cast<double>(repeats);
        row.silhouette = silhouette(features, best->labels);
        row.best_labels = best->labels;
        if (repeats == 1) {
            row.single_run = true;
            row.mean_ari = 1.0;
        } else {
            double s = 0.0;
            std::size_t pairs = 0;
            for (std::size_t i = 0; i < repeats; ++i)
                for (std::size_t j = i + 1; j < repeats; ++j, ++pairs)
                    s += adjusted_rand_index(runs[ki * repeats + i].labels, runs[ki * repeats + j].labels);
            row.mean_ari = s / static_cast<double>(pairs);
        }
        ks.push_back(row.k);
        mean_wcss.push_back(row.mean_wcss);
        table.rows.push_back(std::move(row));
    }
    if (nk >= 3) {
        const auto dist = kneedle_distance(ks, mean_wcss);
        for (std::size_t i = 0; i < nk; ++i) table.rows[i].kneedle = dist[i];
    }
    return table;
}

ClusterProfile cluster_profile(std::span<const std::size_t> labels, std::size_t k,
                               const Matrix& values) {
    if (labels.size() != values.rows()) throw InvalidArgument("cluster_profile: size mismatch");
    ClusterProfile p;
    p.sizes.assign(k, 0);
    p.means = Matrix(k, values.cols(), 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= k) throw InvalidArgument("cluster_profile: label out of range");
        ++p.sizes[labels[i]];
        for (std::size_t j = 0; j < values.cols(); ++j) p.means(labels[i], j) += values(i, j);
    }
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t j = 0; j < values.cols(); ++j)
            p.means(c, j) = p.sizes[c] ? p.means(c, j) / static_cast<double>(p.sizes[c])
                                       : std::numeric_limits<double>::quiet_NaN();
    return p;
}

std::vector<std::size_t> match_labels(std::span<const std::size_t> reference,
                                      std::span<const std::size_t> labels) {
    if (reference.size() != labels.size()) throw InvalidArgument("match_labels: length mismatch");
    const std::size_t kr = max_label(reference) + 1, kl = max_label(labels) + 1;
    Matrix overlap(kl, kr, 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) overlap(labels[i], reference[i]) += 1.0;

    std::vector<std::size_t> map(kl, std::numeric_limits<std::size_t>::max());
    std::vector<bool> used_ref(kr, false);
    for (std::size_t step = 0; step < std::min(kl, kr); ++step) {
        double best = -1.0;
        std::size_t bi = 0, bj = 0;
        for (std::size_t i = 0; i < kl; ++i) {
            if (map[i] != std::numeric_limits<std::size_t>::max()) continue;
            for (std::size_t j = 0; j < kr; ++j)
                if (!used_ref[j] && overlap(i, j) > best) {
                    best = overlap(i, j);
                    bi = i;
                    bj = j;
                }
        }
        map[bi] = bj;
        used_ref[bj] = true;
    }
    std::size_t next = kr;
    for (auto& m : map)
        if (m == std::numeric_limits<std::size_t>::max()) m = next++;
    std::vector<std::size_t> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) out[i] = map[labels[i]];
    return out;
}

}  // namespace adfe
