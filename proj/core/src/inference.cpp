#include "adfe/inference.hpp"

#include <cmath>
#include <limits>

#include <json.hpp>

#include "adfe/error.hpp"

namespace adfe {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kMaxPaths = 1e6;

void check_inputs(const EncodedSequence& seq, const PointParams& p) {
    const std::size_t T = seq.length();
    if (T == 0) throw InvalidArgument("filter: empty sequence");
    if (seq.obs_audio.size() != T || seq.segment_of.size() != T)
        throw InvalidArgument("filter: ragged sequence");
    const std::size_t K = p.K();
    if (K == 0 || p.A1.rows() != K || p.A2.rows() != K || p.B.empty())
        throw InvalidArgument("filter: malformed parameters");
    for (const auto& b : p.B)
        if (b.rows() != K || b.cols() != K) throw InvalidArgument("filter: malformed B");
    for (std::size_t t = 0; t < T; ++t)
        if (seq.obs_visual[t] >= p.A1.cols() || seq.obs_audio[t] >= p.A2.cols() ||
            seq.segment_of[t] >= p.B.size())
            throw InvalidArgument("filter: sequence does not match parameter shapes");
}

double safe_log(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

}  // namespace

std::string_view to_string(ModalityMode m) {
    switch (m) {
        case ModalityMode::Visual: return "visual";
        case ModalityMode::Audio: return "audio";
        case ModalityMode::Joint: return "joint";
    }
    return "joint";
}

ModalityMode parse_modality_mode(std::string_view s) {
    if (s == "visual") return ModalityMode::Visual;
    if (s == "audio") return ModalityMode::Audio;
    if (s == "joint") return ModalityMode::Joint;
    throw InvalidArgument("unknown modality mode '" + std::string(s) + "'");
}

std::string FilterResult::to_json() const {
    auto rows = [](const Matrix& m) {
        nlohmann::json out = nlohmann::json::array();
        for (std::size_t r = 0; r < m.rows(); ++r)
            out.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
        return out;
    };
    nlohmann::json doc = {{"mode", to_string(mode)},
                          {"priors", rows(priors)},
                          {"posteriors", rows(posteriors)},
                          {"log_evidence_inc", log_evidence_inc},
                          {"total_log_evidence", total_log_evidence}};
    return doc.dump();
}

Matrix scene_log_likelihood(const EncodedSequence& seq, const PointParams& p, ModalityMode mode) {
    check_inputs(seq, p);
    const std::size_t T = seq.length(), K = p.K();
    Matrix ll(T, K);
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t s = 0; s < K; ++s) {
            double v = 0.0;
            if (mode != ModalityMode::Audio) v += safe_log(p.A1(s, seq.obs_visual[t]));
            if (mode != ModalityMode::Visual) v += safe_log(p.A2(s, seq.obs_audio[t]));
            ll(t, s) = v;
        }
    }
    return ll;
}

FilterResult forward_filter(const EncodedSequence& seq, const PointParams& p, ModalityMode mode) {
    FilterResult r;
    r.mode = mode;
    r.log_likelihood = scene_log_likelihood(seq, p, mode);
    const std::size_t T = seq.length(), K = p.K();
    r.priors = Matrix(T, K);
    r.posteriors = Matrix(T, K);
    r.log_evidence_inc.resize(T);

    std::vector<double> log_joint(K);
    for (std::size_t t = 0; t < T; ++t) {
        auto prior = r.priors.row(t);
        if (t == 0) {
            for (std::size_t s = 0; s < K; ++s) prior[s] = p.D[s];
        } else {
            const Matrix& b = p.B[seq.segment_of[t]];
            auto prev = r.posteriors.row(t - 1);
            for (std::size_t j = 0; j < K; ++j) {
                double acc = 0.0;
                for (std::size_t i = 0; i < K; ++i) acc += prev[i] * b(i, j);
                prior[j] = acc;
            }
        }
        double mx = kNegInf;
        for (std::size_t s = 0; s < K; ++s) {
            log_joint[s] = safe_log(prior[s]) + r.log_likelihood(t, s);
            mx = std::max(mx, log_joint[s]);
        }
        if (mx == kNegInf)
            throw NumericalError("filter: zero likelihood at scene " + std::to_string(t) + " of '" +
                                 seq.video_id + "'");
        double z = 0.0;
        for (std::size_t s = 0; s < K; ++s) z += std::exp(log_joint[s] - mx);
        const double log_z = mx + std::log(z);
        auto post = r.posteriors.row(t);
        for (std::size_t s = 0; s < K; ++s) post[s] = std::exp(log_joint[s] - log_z);
        r.log_evidence_inc[t] = log_z;
    }
    r.total_log_evidence = 0.0;
    for (double inc : r.log_evidence_inc) r.total_log_evidence += inc;
    return r;
}

FilterResult brute_force_posterior(const EncodedSequence& seq, const PointParams& p,
                                   ModalityMode mode) {
    check_inputs(seq, p);
    const std::size_t T = seq.length(), K = p.K();
    if (std::pow(static_cast<double>(K), static_cast<double>(T)) > kMaxPaths)
        throw InvalidArgument("brute_force_posterior: K^T exceeds 10^6 paths");

    const Matrix ll = scene_log_likelihood(seq, p, mode);
    FilterResult r;
    r.mode = mode;
    r.log_likelihood = ll;
    r.priors = Matrix(T, K);
    r.posteriors = Matrix(T, K);
    r.log_evidence_inc.resize(T);

    // For each prefix length L = t + 1, enumerate all K^L paths s_1..s_L and
    // accumulate p(s_L, o_<L) (prior, without the last emission) and
    // p(s_L, o_1..L) (posterior, with it).
    double prev_evidence = 1.0;
    std::vector<std::size_t> path;
    for (std::size_t t = 0; t < T; ++t) {
        const std::size_t len = t + 1;
        std::vector<double> prior_mass(K, 0.0), post_mass(K, 0.0);
        path.assign(len, 0);
        while (true) {
            double w = p.D[path[0]];
            for (std::size_t u = 1; u < len; ++u) w *= p.B[seq.segment_of[u]](path[u - 1], path[u]);
            for (std::size_t u = 0; u + 1 < len; ++u) w *= std::exp(ll(u, path[u]));
            prior_mass[path[t]] += w;
            post_mass[path[t]] += w * std::exp(ll(t, path[t]));

            std::size_t pos = 0;
            while (pos < len && ++path[pos] == K) path[pos++] = 0;
            if (pos == len) break;
        }
        double prior_total = 0.0, evidence = 0.0;
        for (std::size_t s = 0; s < K; ++s) {
            prior_total += prior_mass[s];
            evidence += post_mass[s];
        }
        if (!(evidence > 0.0)) throw NumericalError("brute_force_posterior: zero evidence");
        for (std::size_t s = 0; s < K; ++s) {
            r.priors(t, s) = prior_mass[s] / prior_total;
            r.posteriors(t, s) = post_mass[s] / evidence;
        }
        r.log_evidence_inc[t] = std::log(evidence) - std::log(prev_evidence);
        prev_evidence = evidence;
    }
    r.total_log_evidence = 0.0;
    for (double inc : r.log_evidence_inc) r.total_log_evidence += inc;
    return r;
}

}  // namespace adfe
