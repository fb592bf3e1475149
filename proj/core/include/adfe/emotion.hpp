#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adfe/inference.hpp"
#include "adfe/model.hpp"

namespace adfe {

/// Free-energy decomposition of one scene, in nats.
struct SceneFeMetrics {
    double kld = 0.0;      // KL(prior || posterior)
    double bs = 0.0;       // KL(posterior || prior), Bayesian surprise
    double un = 0.0;       // -E_posterior[ln l(o | s)], uncertainty
    double shannon = 0.0;  // -ln p(o_t | o_<t); equals bs + un
};

/// Which point estimate of the Dirichlet posterior drives scoring.
enum class ScoringParams { Mean, Geometric };

ScoringParams parse_scoring_params(std::string_view s);
PointParams point_params(const ModelParams& theta, ScoringParams which);

/// KL(p || q) in nats with 0 ln 0 = 0. Throws when q = 0 where p > 0.
double kl_categorical(std::span<const double> p, std::span<const double> q);

std::vector<SceneFeMetrics> scene_metrics(const FilterResult& filtered);

/// Recomputes the likelihood from (params, seq, mode) rather than trusting
/// the copy cached in `filtered`.
std::vector<SceneFeMetrics> scene_metrics(const FilterResult& filtered, const PointParams& params,
                                          const EncodedSequence& seq, ModalityMode mode);

inline constexpr double kDefaultReplayLearningRate = 10.0;
inline constexpr std::size_t kDefaultViewings = 5;

/// Single-sequence Dirichlet increment from filtered posteriors. Emissions
/// of both modalities receive lr * post_t, transitions into scene t receive
/// lr * outer(post_{t-1}, post_t), the initial belief receives lr * post_1.
ModelParams replay_update(const ModelParams& theta, const FilterResult& filtered,
                          const EncodedSequence& seq, double replay_lr);

struct ViewingTrace {
    ModalityMode mode = ModalityMode::Joint;
    double replay_lr = kDefaultReplayLearningRate;
    std::vector<std::vector<SceneFeMetrics>> viewings;  // R x T

    std::size_t count() const noexcept { return viewings.size(); }
};

/// Score the same sequence R times, updating a private copy of theta after
/// each viewing. Viewing 1 uses theta as given.
ViewingTrace simulate_viewings(const EncodedSequence& seq, const ModelParams& theta,
                               std::size_t viewings, double replay_lr, ModalityMode mode,
                               ScoringParams scoring = ScoringParams::Mean);

/// Scene-wise sum of two traces of equal shape (e.g. visual + audio runs).
ViewingTrace sum_traces(const ViewingTrace& a, const ViewingTrace& b);

/// Relative drop of the scene-summed metric between two viewings.
/// nullopt when the first viewing sums to zero.
std::optional<double> decay_rate(std::span<const double> first, std::span<const double> last);

struct Skewness {
    double value = 0.0;
    bool undefined = false;
};

/// Biased Fisher-Pearson coefficient m3 / m2^1.5. Undefined (value 0) for
/// fewer than three values or zero spread.
Skewness skewness(std::span<const double> values);

struct MetricIndices {
    double peak = 0.0;
    double end = 0.0;
    Skewness skew;
    std::optional<double> decay;
};

enum class FeMetric { Kld, Bs, Un };
inline constexpr std::array<FeMetric, 3> kFeMetrics{FeMetric::Kld, FeMetric::Bs, FeMetric::Un};
std::string_view to_string(FeMetric m);
double metric_value(const SceneFeMetrics& s, FeMetric m);

struct VideoEmotionIndices {
    MetricIndices kld;
    MetricIndices bs;
    MetricIndices un;

    const MetricIndices& operator[](FeMetric m) const;
    /// peak, end, skew, decay for KLD, BS, UN in that order; a missing decay is NaN.
    std::array<double, 12> as_array() const;
    static std::array<std::string, 12> column_names();
};

VideoEmotionIndices video_indices(const ViewingTrace& trace);

}  // namespace adfe
