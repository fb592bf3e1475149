#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "adfe/corpus.hpp"
#include "adfe/matrix.hpp"
#include "adfe/model.hpp"

namespace adfe {

/// Which emission streams enter the per-scene likelihood.
enum class ModalityMode { Visual, Audio, Joint };

std::string_view to_string(ModalityMode m);
ModalityMode parse_modality_mode(std::string_view s);

/// Per-scene output of causal filtering.
struct FilterResult {
    ModalityMode mode = ModalityMode::Joint;
    Matrix priors;      // T x K, predictive distribution before scene t
    Matrix posteriors;  // T x K, after observing scene t
    Matrix log_likelihood;  // T x K, ln l_t(s) under `mode`
    std::vector<double> log_evidence_inc;  // ln p(o_t | o_<t)
    double total_log_evidence = 0.0;

    std::size_t length() const noexcept { return log_evidence_inc.size(); }
    std::string to_json() const;
};

/// Per-scene log-likelihood ln l_t(s) for the chosen modality mode.
Matrix scene_log_likelihood(const EncodedSequence& seq, const PointParams& params,
                            ModalityMode mode);

/// Exact forward filtering over the segment-indexed chain:
/// prior_1 = D, prior_t = post_{t-1} B[m_t], post_t proportional to prior_t * l_t.
FilterResult forward_filter(const EncodedSequence& seq, const PointParams& params,
                            ModalityMode mode);

/// Same quantities by explicit enumeration of every state path prefix.
/// Throws InvalidArgument when K^T exceeds 10^6.
FilterResult brute_force_posterior(const EncodedSequence& seq, const PointParams& params,
                                   ModalityMode mode);

}  // namespace adfe
