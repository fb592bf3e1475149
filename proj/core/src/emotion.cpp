#include "adfe/emotion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "adfe/error.hpp"

namespace adfe {

ScoringParams parse_scoring_params(std::string_view s) {
    if (s == "mean") return ScoringParams::Mean;
    if (s == "geometric") return ScoringParams::Geometric;
    throw InvalidArgument("unknown scoring params '" + std::string(s) + "'");
}

PointParams point_params(const ModelParams& theta, ScoringParams which) {
    return which == ScoringParams::Mean ? mean_params(theta) : geometric_params(theta);
}

double kl_categorical(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw InvalidArgument("kl_categorical: length mismatch");
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] <= 0.0) continue;
        if (!(q[i] > 0.0)) throw InvalidArgument("kl_categorical: q = 0 where p > 0");
        kl += p[i] * std::log(p[i] / q[i]);
    }
    // rounding can leave a tiny negative value for p ~= q
    return std::max(kl, 0.0);
}

std::vector<SceneFeMetrics> scene_metrics(const FilterResult& f) {
    const std::size_t T = f.length();
    const std::size_t K = f.priors.cols();
    std::vector<SceneFeMetrics> out(T);
    for (std::size_t t = 0; t < T; ++t) {
        auto prior = f.priors.row(t);
        auto post = f.posteriors.row(t);
        SceneFeMetrics& m = out[t];
        m.kld = kl_categorical(prior, post);
        m.bs = kl_categorical(post, prior);
        double un = 0.0;
        for (std::size_t s = 0; s < K; ++s)
            if (post[s] > 0.0) un -= post[s] * f.log_likelihood(t, s);
        m.un = un;
        m.shannon = -f.log_evidence_inc[t];
    }
    return out;
}

std::vector<SceneFeMetrics> scene_metrics(const FilterResult& filtered, const PointParams& params,
                                          const EncodedSequence& seq, ModalityMode mode) {
    if (filtered.mode != mode) throw InvalidArgument("scene_metrics: modality mode mismatch");
    if (filtered.length() != seq.length())
        throw InvalidArgument("scene_metrics: filter result does not match sequence");
    FilterResult f = filtered;
    f.log_likelihood = scene_log_likelihood(seq, params, mode);
    return scene_metrics(f);
}

ModelParams replay_update(const ModelParams& theta, const FilterResult& f,
                          const EncodedSequence& seq, double lr) {
    if (!(lr >= 0.0)) throw InvalidArgument("replay_update: learning rate must be >= 0");
    if (f.length() != seq.length()) throw InvalidArgument("replay_update: length mismatch");
    ModelParams next = theta;
    const std::size_t T = seq.length(), K = theta.meta.K;
    if (f.posteriors.cols() != K) throw InvalidArgument("replay_update: K mismatch");
    for (std::size_t t = 0; t < T; ++t) {
        auto post = f.posteriors.row(t);
        for (std::size_t s = 0; s < K; ++s) {
            next.alpha_A1(s, seq.obs_visual[t]) += lr * post[s];
            next.alpha_A2(s, seq.obs_audio[t]) += lr * post[s];
        }
        if (t == 0) {
            for (std::size_t s = 0; s < K; ++s) next.alpha_D[s] += lr * post[s];
            continue;
        }
        auto prev = f.posteriors.row(t - 1);
        double total = 0.0;
        for (std::size_t i = 0; i < K; ++i)
            for (std::size_t j = 0; j < K; ++j) total += prev[i] * post[j];
        Matrix& b = next.alpha_B[seq.segment_of[t]];
        for (std::size_t i = 0; i < K; ++i)
            for (std::size_t j = 0; j < K; ++j) b(i, j) += lr * prev[i] * post[j] / total;
    }
    return next;
}

ViewingTrace simulate_viewings(const EncodedSequence& seq, const ModelParams& theta,
                               std::size_t viewings, double replay_lr, ModalityMode mode,
                               ScoringParams scoring) {
    if (viewings == 0) throw InvalidArgument("simulate_viewings: need at least one viewing");
    if (!(replay_lr >= 0.0)) throw InvalidArgument("simulate_viewings: learning rate must be >= 0");
    ViewingTrace trace;
    trace.mode = mode;
    trace.replay_lr = replay_lr;
    ModelParams current = theta;
    for (std::size_t r = 0; r < viewings; ++r) {
        const FilterResult f = forward_filter(seq, point_params(current, scoring), mode);
        trace.viewings.push_back(scene_metrics(f));
        if (r + 1 < viewings) current = replay_update(current, f, seq, replay_lr);
    }
    return trace;
}

ViewingTrace sum_traces(const ViewingTrace& a, const ViewingTrace& b) {
    if (a.viewings.size() != b.viewings.size())
        throw InvalidArgument("sum_traces: viewing counts differ");
    ViewingTrace out = a;
    out.mode = ModalityMode::Joint;
    for (std::size_t r = 0; r < a.viewings.size(); ++r) {
        if (a.viewings[r].size() != b.viewings[r].size())
            throw InvalidArgument("sum_traces: scene counts differ");
        for (std::size_t t = 0; t < a.viewings[r].size(); ++t) {
            auto& d = out.viewings[r][t];
            const auto& s = b.viewings[r][t];
            d.kld += s.kld;
            d.bs += s.bs;
            d.un += s.un;
            d.shannon += s.shannon;
        }
    }
    return out;
}

std::optional<double> decay_rate(std::span<const double> first, std::span<const double> last) {
    if (first.size() != last.size()) throw InvalidArgument("decay_rate: length mismatch");
    double denom = 0.0, num = 0.0;
    for (std::size_t i = 0; i < first.size(); ++i) {
        denom += first[i];
        num += first[i] - last[i];
    }
    if (denom == 0.0 || !std::isfinite(denom)) return std::nullopt;
    return num / denom;
}

Skewness skewness(std::span<const double> v) {
    const std::size_t n = v.size();
    if (n < 3) return {0.0, true};
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    if (*lo == *hi) return {0.0, true};
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
    double m2 = 0.0, m3 = 0.0;
    for (double x : v) {
        const double d = x - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= static_cast<double>(n);
    m3 /= static_cast<double>(n);
    if (m2 <= 1e-24 * std::max(1.0, mean * mean)) return {0.0, true};
    return {m3 / std::pow(m2, 1.5), false};
}

std::string_view to_string(FeMetric m) {
    switch (m) {
        case FeMetric::Kld: return "kld";
        case FeMetric::Bs: return "bs";
        case FeMetric::Un: return "un";
    }
    return "kld";
}

double metric_value(const SceneFeMetrics& s, FeMetric m) {
    switch (m) {
        case FeMetric::Kld: return s.kld;
        case FeMetric::Bs: return s.bs;
        case FeMetric::Un: return s.un;
    }
    return 0.0;
}

const MetricIndices& VideoEmotionIndices::operator[](FeMetric m) const {
    switch (m) {
        case FeMetric::Kld: return kld;
        case FeMetric::Bs: return bs;
        case FeMetric::Un: return un;
    }
    return kld;
}

std::array<double, 12> VideoEmotionIndices::as_array() const {
    std::array<double, 12> out{};
    std::size_t i = 0;
    for (FeMetric m : kFeMetrics) {
        const MetricIndices& x = (*this)[m];
        out[i++] = x.peak;
        out[i++] = x.end;
        out[i++] = x.skew.value;
        out[i++] = x.decay.value_or(std::numeric_limits<double>::quiet_NaN());
    }
    return out;
}

std::array<std::string, 12> VideoEmotionIndices::column_names() {
    std::array<std::string, 12> out;
    std::size_t i = 0;
    for (FeMetric m : kFeMetrics) {
        const std::string name(to_string(m));
        out[i++] = "peak_" + name;
        out[i++] = "end_" + name;
        out[i++] = "skew_" + name;
        out[i++] = "decay_" + name;
    }
    return out;
}

VideoEmotionIndices video_indices(const ViewingTrace& trace) {
    if (trace.viewings.empty() || trace.viewings.front().empty())
        throw InvalidArgument("video_indices: empty trace");
    const auto& first = trace.viewings.front();
    const auto& last = trace.viewings.back();
    VideoEmotionIndices out;
    auto fill = [&](FeMetric m, MetricIndices& idx) {
        std::vector<double> v1, vr;
        for (const auto& s : first) v1.push_back(metric_value(s, m));
        for (const auto& s : last) vr.push_back(metric_value(s, m));
        idx.peak = *std::max_element(v1.begin(), v1.end());
        idx.end = v1.back();
        idx.skew = skewness(v1);
        idx.decay = decay_rate(v1, vr);
    };
    fill(FeMetric::Kld, out.kld);
    fill(FeMetric::Bs, out.bs);
    fill(FeMetric::Un, out.un);
    return out;
}

}  // namespace adfe
