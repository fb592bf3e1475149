#include "adfe/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <json.hpp>

#include "adfe/csv.hpp"
#include "adfe/error.hpp"
#include "adfe/parallel.hpp"
#include "adfe/rng.hpp"

namespace adfe {

using nlohmann::json;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double digamma(double x) { return boost::math::digamma(x); }
double lgamma(double x) { return boost::math::lgamma(x); }

double log_sum_exp(std::span<const double> v) {
    double mx = kNegInf;
    for (double x : v) mx = std::max(mx, x);
    if (mx == kNegInf) return kNegInf;
    double s = 0.0;
    for (double x : v) s += std::exp(x - mx);
    return mx + std::log(s);
}

void check_matrix(const Matrix& m, std::size_t rows, std::size_t cols, const char* name) {
    if (m.rows() != rows || m.cols() != cols)
        throw InvalidArgument(std::string("shape mismatch in ") + name);
}

template <class Fn>
void for_each_row(const ModelParams& theta, Fn&& fn) {
    for (std::size_t k = 0; k < theta.meta.K; ++k) fn(theta.alpha_A1.row(k));
    for (std::size_t k = 0; k < theta.meta.K; ++k) fn(theta.alpha_A2.row(k));
    for (const auto& b : theta.alpha_B)
        for (std::size_t k = 0; k < theta.meta.K; ++k) fn(b.row(k));
    fn(std::span<const double>(theta.alpha_D));
}

void digamma_rows(const Matrix& alpha, Matrix& out) {
    out = Matrix(alpha.rows(), alpha.cols());
    for (std::size_t r = 0; r < alpha.rows(); ++r) {
        auto row = alpha.row(r);
        const double total = std::accumulate(row.begin(), row.end(), 0.0);
        const double dg_total = digamma(total);
        for (std::size_t c = 0; c < alpha.cols(); ++c) out(r, c) = digamma(row[c]) - dg_total;
    }
}

void normalize_rows(const Matrix& alpha, Matrix& out) {
    out = Matrix(alpha.rows(), alpha.cols());
    for (std::size_t r = 0; r < alpha.rows(); ++r) {
        auto row = alpha.row(r);
        const double total = std::accumulate(row.begin(), row.end(), 0.0);
        for (std::size_t c = 0; c < alpha.cols(); ++c) out(r, c) = row[c] / total;
    }
}

void exp_normalize_rows(const Matrix& logs, Matrix& out) {
    out = Matrix(logs.rows(), logs.cols());
    for (std::size_t r = 0; r < logs.rows(); ++r) {
        const double lse = log_sum_exp(logs.row(r));
        for (std::size_t c = 0; c < logs.cols(); ++c) out(r, c) = std::exp(logs(r, c) - lse);
    }
}

void check_sequence(const EncodedSequence& seq, const ModelMeta& meta) {
    const std::size_t t = seq.length();
    if (t == 0) throw InvalidArgument("sequence '" + seq.video_id + "' is empty");
    if (seq.obs_audio.size() != t || seq.segment_of.size() != t)
        throw InvalidArgument("sequence '" + seq.video_id + "' has ragged streams");
    for (std::size_t i = 0; i < t; ++i) {
        if (seq.obs_visual[i] >= meta.V1 || seq.obs_audio[i] >= meta.V2 ||
            seq.segment_of[i] >= meta.M)
            throw InvalidArgument("sequence '" + seq.video_id +
                                  "' does not match the model's alphabets/segments");
    }
}

double mean(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double mu = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - mu) * (x - mu);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

// ---------------------------------------------------------------------------

void ModelParams::validate() const {
    const auto& m = meta;
    if (m.K == 0 || m.V1 == 0 || m.V2 == 0 || m.M == 0)
        throw InvalidArgument("model dimensions must be >= 1");
    check_matrix(alpha_A1, m.K, m.V1, "alpha_A1");
    check_matrix(alpha_A2, m.K, m.V2, "alpha_A2");
    if (alpha_B.size() != m.M) throw InvalidArgument("shape mismatch in alpha_B");
    for (const auto& b : alpha_B) check_matrix(b, m.K, m.K, "alpha_B");
    if (alpha_D.size() != m.K) throw InvalidArgument("shape mismatch in alpha_D");
    for_each_row(*this, [](std::span<const double> row) {
        for (double x : row)
            if (!(x > 0.0) || !std::isfinite(x))
                throw InvalidArgument("concentrations must be finite and > 0");
    });
}

double ModelParams::total_mass() const {
    double s = 0.0;
    for_each_row(*this, [&](std::span<const double> row) {
        for (double x : row) s += x;
    });
    return s;
}

void PointParams::validate(double tol) const {
    auto check_row = [tol](std::span<const double> row, const char* name) {
        double s = 0.0;
        for (double x : row) {
            if (!(x >= 0.0)) throw InvalidArgument(std::string(name) + ": negative entry");
            s += x;
        }
        if (std::abs(s - 1.0) > tol) throw InvalidArgument(std::string(name) + ": row does not sum to 1");
    };
    const std::size_t k = K();
    if (k == 0) throw InvalidArgument("PointParams: K = 0");
    if (A1.rows() != k || A2.rows() != k) throw InvalidArgument("PointParams: emission rows != K");
    for (std::size_t r = 0; r < k; ++r) {
        check_row(A1.row(r), "A1");
        check_row(A2.row(r), "A2");
    }
    if (B.empty()) throw InvalidArgument("PointParams: no transition matrices");
    for (const auto& b : B) {
        check_matrix(b, k, k, "B");
        for (std::size_t r = 0; r < k; ++r) check_row(b.row(r), "B");
    }
    check_row(D, "D");
}

// ---------------------------------------------------------------------------

ModelParams init_params(std::size_t K, std::size_t V1, std::size_t V2, std::size_t M,
                        double scale, std::uint64_t seed, double jitter_fraction) {
    if (K == 0 || V1 == 0 || V2 == 0 || M == 0)
        throw InvalidArgument("init_params: dimensions must be >= 1");
    if (!(scale > 0.0) || !std::isfinite(scale))
        throw InvalidArgument("init_params: dirichlet scale must be > 0");
    if (!(jitter_fraction >= 0.0)) throw InvalidArgument("init_params: negative jitter");

    ModelParams theta = prior_params({K, V1, V2, M, kDefaultSegmentSeconds}, scale);
    if (jitter_fraction == 0.0) return theta;

    Rng rng(seed);
    const double amp = jitter_fraction * scale;
    auto jitter = [&](std::span<double> row) {
        for (double& x : row) x += amp * uniform01(rng);
    };
    for (std::size_t k = 0; k < K; ++k) jitter(theta.alpha_A1.row(k));
    for (std::size_t k = 0; k < K; ++k) jitter(theta.alpha_A2.row(k));
    for (auto& b : theta.alpha_B)
        for (std::size_t k = 0; k < K; ++k) jitter(b.row(k));
    jitter(theta.alpha_D);
    return theta;
}

ModelParams prior_params(const ModelMeta& meta, double scale) {
    ModelParams p;
    p.meta = meta;
    p.alpha_A1 = Matrix(meta.K, meta.V1, scale);
    p.alpha_A2 = Matrix(meta.K, meta.V2, scale);
    p.alpha_B.assign(meta.M, Matrix(meta.K, meta.K, scale));
    p.alpha_D.assign(meta.K, scale);
    return p;
}

LogParams expected_log_params(const ModelParams& theta) {
    LogParams out;
    digamma_rows(theta.alpha_A1, out.A1);
    digamma_rows(theta.alpha_A2, out.A2);
    out.B.resize(theta.alpha_B.size());
    for (std::size_t m = 0; m < theta.alpha_B.size(); ++m) digamma_rows(theta.alpha_B[m], out.B[m]);
    const double total = std::accumulate(theta.alpha_D.begin(), theta.alpha_D.end(), 0.0);
    out.D.resize(theta.alpha_D.size());
    for (std::size_t k = 0; k < out.D.size(); ++k)
        out.D[k] = digamma(theta.alpha_D[k]) - digamma(total);
    return out;
}

PointParams mean_params(const ModelParams& theta) {
    PointParams out;
    normalize_rows(theta.alpha_A1, out.A1);
    normalize_rows(theta.alpha_A2, out.A2);
    out.B.resize(theta.alpha_B.size());
    for (std::size_t m = 0; m < theta.alpha_B.size(); ++m) normalize_rows(theta.alpha_B[m], out.B[m]);
    const double total = std::accumulate(theta.alpha_D.begin(), theta.alpha_D.end(), 0.0);
    out.D.resize(theta.alpha_D.size());
    for (std::size_t k = 0; k < out.D.size(); ++k) out.D[k] = theta.alpha_D[k] / total;
    return out;
}

PointParams geometric_params(const ModelParams& theta) {
    const LogParams lp = expected_log_params(theta);
    PointParams out;
    exp_normalize_rows(lp.A1, out.A1);
    exp_normalize_rows(lp.A2, out.A2);
    out.B.resize(lp.B.size());
    for (std::size_t m = 0; m < lp.B.size(); ++m) exp_normalize_rows(lp.B[m], out.B[m]);
    const double lse = log_sum_exp(lp.D);
    out.D.resize(lp.D.size());
    for (std::size_t k = 0; k < out.D.size(); ++k) out.D[k] = std::exp(lp.D[k] - lse);
    return out;
}

double dirichlet_kl(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw InvalidArgument("dirichlet_kl: length mismatch");
    const double sa = std::accumulate(a.begin(), a.end(), 0.0);
    const double sb = std::accumulate(b.begin(), b.end(), 0.0);
    const double dg_sa = digamma(sa);
    double kl = lgamma(sa) - lgamma(sb);
    for (std::size_t i = 0; i < a.size(); ++i) {
        kl += lgamma(b[i]) - lgamma(a[i]);
        if (a[i] != b[i]) kl += (a[i] - b[i]) * (digamma(a[i]) - dg_sa);
    }
    return kl;
}

double parameter_kl(const ModelParams& theta, double prior_scale) {
    if (!(prior_scale > 0.0)) throw InvalidArgument("prior scale must be > 0");
    double kl = 0.0;
    std::vector<double> prior;
    for_each_row(theta, [&](std::span<const double> row) {
        prior.assign(row.size(), prior_scale);
        kl += dirichlet_kl(row, prior);
    });
    return kl;
}

// ---------------------------------------------------------------------------
// E-step

SufficientStats SufficientStats::zeros(const ModelMeta& meta) {
    SufficientStats s;
    s.A1 = Matrix(meta.K, meta.V1);
    s.A2 = Matrix(meta.K, meta.V2);
    s.B.assign(meta.M, Matrix(meta.K, meta.K));
    s.D.assign(meta.K, 0.0);
    return s;
}

void SufficientStats::add(const SufficientStats& o) {
    auto acc = [](std::vector<double>& a, const std::vector<double>& b) {
        for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    };
    acc(A1.data(), o.A1.data());
    acc(A2.data(), o.A2.data());
    for (std::size_t m = 0; m < B.size(); ++m) acc(B[m].data(), o.B[m].data());
    acc(D, o.D);
    log_normalizer += o.log_normalizer;
}

SufficientStats expected_stats(const EncodedSequence& seq, const LogParams& lp,
                               const ModelMeta& meta) {
    check_sequence(seq, meta);
    const std::size_t T = seq.length();
    const std::size_t K = meta.K;

    Matrix log_lik(T, K);
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t s = 0; s < K; ++s)
            log_lik(t, s) = lp.A1(s, seq.obs_visual[t]) + lp.A2(s, seq.obs_audio[t]);

    Matrix la(T, K), lb(T, K, 0.0);
    std::vector<double> buf(K);
    for (std::size_t s = 0; s < K; ++s) la(0, s) = lp.D[s] + log_lik(0, s);
    for (std::size_t t = 1; t < T; ++t) {
        const Matrix& lB = lp.B[seq.segment_of[t]];
        for (std::size_t j = 0; j < K; ++j) {
            for (std::size_t i = 0; i < K; ++i) buf[i] = la(t - 1, i) + lB(i, j);
            la(t, j) = log_sum_exp(buf) + log_lik(t, j);
        }
    }
    const double log_z = log_sum_exp(la.row(T - 1));
    if (!std::isfinite(log_z))
        throw NumericalError("non-finite log normalizer for sequence '" + seq.video_id + "'");

    for (std::size_t t = T - 1; t-- > 0;) {
        const Matrix& lB = lp.B[seq.segment_of[t + 1]];
        for (std::size_t i = 0; i < K; ++i) {
            for (std::size_t j = 0; j < K; ++j) buf[j] = lB(i, j) + log_lik(t + 1, j) + lb(t + 1, j);
            lb(t, i) = log_sum_exp(buf);
        }
    }

    SufficientStats st = SufficientStats::zeros(meta);
    st.log_normalizer = log_z;
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t s = 0; s < K; ++s) {
            const double g = std::exp(la(t, s) + lb(t, s) - log_z);
            st.A1(s, seq.obs_visual[t]) += g;
            st.A2(s, seq.obs_audio[t]) += g;
            if (t == 0) st.D[s] += g;
        }
        if (t == 0) continue;
        const Matrix& lB = lp.B[seq.segment_of[t]];
        Matrix& sB = st.B[seq.segment_of[t]];
        for (std::size_t i = 0; i < K; ++i)
            for (std::size_t j = 0; j < K; ++j)
                sB(i, j) += std::exp(la(t - 1, i) + lB(i, j) + log_lik(t, j) + lb(t, j) - log_z);
    }
    return st;
}

SufficientStats expected_stats(const std::vector<EncodedSequence>& seqs, const ModelParams& theta,
                               unsigned threads) {
    const LogParams lp = expected_log_params(theta);
    std::vector<SufficientStats> per(seqs.size());
    parallel_for(seqs.size(), threads,
                 [&](std::size_t i) { per[i] = expected_stats(seqs[i], lp, theta.meta); });
    SufficientStats total = SufficientStats::zeros(theta.meta);
    for (const auto& s : per) total.add(s);  // fixed order keeps results thread-count independent
    return total;
}

double elbo(const ModelParams& theta, double prior_scale,
            const std::vector<EncodedSequence>& sequences, unsigned threads) {
    theta.validate();
    double data = 0.0;
    if (!sequences.empty()) {
        const LogParams lp = expected_log_params(theta);
        std::vector<double> log_z(sequences.size());
        parallel_for(sequences.size(), threads, [&](std::size_t i) {
            log_z[i] = expected_stats(sequences[i], lp, theta.meta).log_normalizer;
        });
        for (double z : log_z) data += z;
    }
    return data - parameter_kl(theta, prior_scale);
}

// ---------------------------------------------------------------------------
// Training

void TrainConfig::validate() const {
    if (hidden_states == 0) throw InvalidArgument("hidden_states must be >= 1");
    if (!(dirichlet_scale > 0.0)) throw InvalidArgument("dirichlet_scale must be > 0");
    if (!full_batch && !(learning_rate > 0.0 && learning_rate <= 1.0))
        throw InvalidArgument("learning_rate must be in (0, 1] for mini-batch training");
    if (!full_batch && batch_size == 0) throw InvalidArgument("batch_size must be >= 1");
    if (!(validation_ratio >= 0.0 && validation_ratio < 1.0))
        throw InvalidArgument("validation_ratio must be in [0, 1)");
}

std::string TrainingTrace::to_csv() const {
    CsvWriter csv({"epoch", "train_elbo", "validation_neg_elbo", "hidden_states",
                   "learning_rate", "dirichlet_scale", "batch_size", "full_batch", "n_train",
                   "n_validation"});
    auto row = [&](std::string epoch, double tr, double val) {
        csv.row({std::move(epoch), format_number(tr), format_number(val),
                 std::to_string(config.hidden_states), format_number(config.learning_rate),
                 format_number(config.dirichlet_scale), std::to_string(config.batch_size),
                 config.full_batch ? "1" : "0", std::to_string(n_train),
                 std::to_string(n_validation)});
    };
    row("0", initial_train_elbo, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t e = 0; e < train_elbo.size(); ++e)
        row(std::to_string(e + 1), train_elbo[e], validation_neg_elbo[e]);
    return csv.str();
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
split_indices(std::size_t n, double validation_ratio, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(substream_seed(seed, "split"));
    for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[uniform_index(rng, i)]);
    auto n_val = static_cast<std::size_t>(std::llround(validation_ratio * static_cast<double>(n)));
    if (n_val >= n) n_val = n - std::min<std::size_t>(n, 1);
    std::vector<std::size_t> val(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> tr(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
    std::sort(val.begin(), val.end());
    std::sort(tr.begin(), tr.end());
    return {tr, val};
}

ModelParams natural_gradient_step(const ModelParams& theta,
                                  const std::vector<EncodedSequence>& batch, std::size_t n_total,
                                  double prior_scale, double rho, unsigned threads) {
    if (!(rho >= 0.0 && rho <= 1.0)) throw InvalidArgument("step size must be in [0, 1]");
    if (batch.empty()) throw InvalidArgument("empty mini-batch");
    const SufficientStats st = expected_stats(batch, theta, threads);
    const double scale = static_cast<double>(n_total) / static_cast<double>(batch.size());

    ModelParams next = theta;
    auto blend = [&](std::vector<double>& dst, const std::vector<double>& src,
                     const std::vector<double>& stats) {
        for (std::size_t i = 0; i < dst.size(); ++i)
            dst[i] = (1.0 - rho) * src[i] + rho * (prior_scale + scale * stats[i]);
    };
    blend(next.alpha_A1.data(), theta.alpha_A1.data(), st.A1.data());
    blend(next.alpha_A2.data(), theta.alpha_A2.data(), st.A2.data());
    for (std::size_t m = 0; m < next.alpha_B.size(); ++m)
        blend(next.alpha_B[m].data(), theta.alpha_B[m].data(), st.B[m].data());
    blend(next.alpha_D, theta.alpha_D, st.D);
    return next;
}

TrainResult train(const std::vector<EncodedSequence>& sequences, const ObservationShape& shape,
                  const TrainConfig& config) {
    config.validate();
    if (sequences.empty()) throw InvalidArgument("train: empty corpus");

    auto [train_idx, val_idx] = split_indices(sequences.size(), config.validation_ratio,
                                            config.split_seed.value_or(config.seed));
    std::vector<EncodedSequence> train_set, val_set;
    for (auto i : train_idx) train_set.push_back(sequences[i]);
    for (auto i : val_idx) val_set.push_back(sequences[i]);

    const std::size_t batch_size = config.full_batch ? train_set.size() : config.batch_size;
    if (batch_size > train_set.size())
        throw InvalidArgument("batch_size exceeds training-set size (" +
                              std::to_string(train_set.size()) + ")");
    const double rho = config.full_batch ? 1.0 : config.learning_rate;

    TrainResult result;
    result.params = init_params(config.hidden_states, shape.V1, shape.V2, shape.M,
                                config.dirichlet_scale, substream_seed(config.seed, "init"));
    result.params.meta.segment_seconds = shape.segment_seconds;
    ModelParams& theta = result.params;
    for (const auto& s : sequences) check_sequence(s, theta.meta);

    TrainingTrace& trace = result.trace;
    trace.config = config;
    trace.n_train = train_set.size();
    trace.n_validation = val_set.size();
    trace.initial_train_elbo = elbo(theta, config.dirichlet_scale, train_set, config.threads);

    Rng rng(substream_seed(config.seed, "train"));
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    const auto t0 = std::chrono::steady_clock::now();

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        if (!config.full_batch)
            for (std::size_t i = order.size(); i > 1; --i)
                std::swap(order[i - 1], order[uniform_index(rng, i)]);
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const std::size_t stop = std::min(order.size(), start + batch_size);
            std::vector<EncodedSequence> batch;
            batch.reserve(stop - start);
            for (std::size_t i = start; i < stop; ++i) batch.push_back(train_set[order[i]]);
            theta = natural_gradient_step(theta, batch, train_set.size(), config.dirichlet_scale,
                                          rho, config.threads);
        }
        const double tr = elbo(theta, config.dirichlet_scale, train_set, config.threads);
        const double val = val_set.empty()
                               ? std::numeric_limits<double>::quiet_NaN()
                               : -elbo(theta, config.dirichlet_scale, val_set, config.threads);
        if (!std::isfinite(tr) || (!val_set.empty() && !std::isfinite(val))) {
            std::ostringstream os;
            os << "training diverged at epoch " << epoch + 1 << ": train ELBO " << tr
               << ", validation -ELBO " << val << ", concentration mass " << theta.total_mass();
            throw NumericalError(os.str());
        }
        trace.train_elbo.push_back(tr);
        trace.validation_neg_elbo.push_back(val);
        trace.wall_seconds.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return result;
}

// ---------------------------------------------------------------------------
// Sweep

std::string SweepReport::to_csv() const {
    CsvWriter csv({"axis", "value", "hidden_states", "learning_rate", "dirichlet_scale", "seeds",
                   "mean_val_loss", "sd", "best"});
    for (const auto& r : rows)
        csv.row({r.axis, format_number(r.value), std::to_string(r.config.hidden_states),
                 format_number(r.config.learning_rate), format_number(r.config.dirichlet_scale),
                 std::to_string(r.losses.size()), format_number(r.mean_val_loss),
                 format_number(r.sd), r.best ? "1" : "0"});
    return csv.str();
}

SweepReport hyperparameter_sweep(const std::vector<EncodedSequence>& sequences,
                                 const ObservationShape& shape, const SweepGrid& grid) {
    if (grid.hidden_states.empty() && grid.learning_rates.empty() && grid.dirichlet_scales.empty())
        throw InvalidArgument("hyperparameter_sweep: empty grid");
    if (grid.seeds == 0) throw InvalidArgument("hyperparameter_sweep: seeds must be >= 1");
    if (!(grid.base.validation_ratio > 0.0))
        throw InvalidArgument("hyperparameter_sweep: needs a validation split");

    SweepReport report;
    for (auto k : grid.hidden_states) {
        SweepRow row;
        row.axis = "hidden_states";
        row.value = static_cast<double>(k);
        row.config = grid.base;
        row.config.hidden_states = k;
        report.rows.push_back(row);
    }
    for (auto lr : grid.learning_rates) {
        SweepRow row;
        row.axis = "learning_rate";
        row.value = lr;
        row.config = grid.base;
        row.config.learning_rate = lr;
        report.rows.push_back(row);
    }
    for (auto sc : grid.dirichlet_scales) {
        SweepRow row;
        row.axis = "dirichlet_scale";
        row.value = sc;
        row.config = grid.base;
        row.config.dirichlet_scale = sc;
        report.rows.push_back(row);
    }

    for (auto& row : report.rows) {
        for (std::size_t s = 0; s < grid.seeds; ++s) {
            TrainConfig cfg = row.config;
            cfg.seed = substream_seed(grid.base.seed, "sweep", s);
            cfg.split_seed = grid.base.split_seed.value_or(grid.base.seed);
            TrainResult res = train(sequences, shape, cfg);
            row.losses.push_back(res.trace.validation_neg_elbo.empty()
                                     ? std::numeric_limits<double>::quiet_NaN()
                                     : res.trace.validation_neg_elbo.back());
        }
        row.mean_val_loss = mean(row.losses);
        row.sd = sample_sd(row.losses);
    }
    // Lowest mean validation loss within each axis.
    std::map<std::string, SweepRow*> best;
    for (auto& row : report.rows) {
        auto [it, fresh] = best.emplace(row.axis, &row);
        if (!fresh && row.mean_val_loss < it->second->mean_val_loss) it->second = &row;
    }
    for (auto& [axis, row] : best) row->best = true;
    return report;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

constexpr int kModelFormatVersion = 1;

json matrix_json(const Matrix& m) {
    json rows = json::array();
    for (std::size_t r = 0; r < m.rows(); ++r)
        rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
    return rows;
}

Matrix matrix_from_json(const json& j, std::size_t rows, std::size_t cols, const char* name) {
    if (!j.is_array() || j.size() != rows)
        throw ValidationError(std::string("model file: bad shape for ") + name);
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        const auto row = j[r].get<std::vector<double>>();
        if (row.size() != cols) throw ValidationError(std::string("model file: bad shape for ") + name);
        std::copy(row.begin(), row.end(), m.row(r).begin());
    }
    return m;
}

json config_json(const TrainConfig& c) {
    json j = {{"hidden_states", c.hidden_states}, {"dirichlet_scale", c.dirichlet_scale},
            {"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
            {"epochs", c.epochs},               {"seed", c.seed},
            {"validation_ratio", c.validation_ratio}, {"full_batch", c.full_batch}};
    if (c.split_seed) j["split_seed"] = *c.split_seed;
    return j;
}

TrainConfig config_from_json(const json& j) {
    TrainConfig c;
    c.hidden_states = j.value("hidden_states", c.hidden_states);
    c.dirichlet_scale = j.value("dirichlet_scale", c.dirichlet_scale);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.seed = j.value("seed", c.seed);
    c.validation_ratio = j.value("validation_ratio", c.validation_ratio);
    c.full_batch = j.value("full_batch", c.full_batch);
    if (j.contains("split_seed")) c.split_seed = j["split_seed"].get<std::uint64_t>();
    return c;
}

}  // namespace

std::string TrainConfig::to_json() const { return config_json(*this).dump(); }

TrainConfig TrainConfig::from_json(std::string_view text) {
    try {
        return config_from_json(json::parse(text));
    } catch (const json::exception& e) {
        throw ValidationError(std::string("train config: ") + e.what());
    }
}

std::string ModelFile::to_json() const {
    const auto& p = params;
    json b = json::array();
    for (const auto& m : p.alpha_B) b.push_back(matrix_json(m));
    json doc = {
        {"format", "adfe-model"},
        {"version", kModelFormatVersion},
        {"meta",
         {{"K", p.meta.K}, {"V1", p.meta.V1}, {"V2", p.meta.V2}, {"M", p.meta.M},
          {"segment_seconds", p.meta.segment_seconds}}},
        {"alpha_A1", matrix_json(p.alpha_A1)},
        {"alpha_A2", matrix_json(p.alpha_A2)},
        {"alpha_B", b},
        {"alpha_D", p.alpha_D},
    };
    if (alphabets) doc["alphabets"] = json::parse(alphabets->to_json());
    if (config) doc["train_config"] = config_json(*config);
    return doc.dump(1);
}

ModelFile ModelFile::from_json(std::string_view text) {
    ModelFile f;
    try {
        json doc = json::parse(text);
        if (doc.value("format", std::string{}) != "adfe-model")
            throw ValidationError("model file: missing format tag");
        if (doc.value("version", 0) != kModelFormatVersion)
            throw ValidationError("model file: unsupported version");
        const json& meta = doc.at("meta");
        auto& p = f.params;
        p.meta = {meta.at("K").get<std::size_t>(), meta.at("V1").get<std::size_t>(),
                  meta.at("V2").get<std::size_t>(), meta.at("M").get<std::size_t>(),
                  meta.value("segment_seconds", kDefaultSegmentSeconds)};
        p.alpha_A1 = matrix_from_json(doc.at("alpha_A1"), p.meta.K, p.meta.V1, "alpha_A1");
        p.alpha_A2 = matrix_from_json(doc.at("alpha_A2"), p.meta.K, p.meta.V2, "alpha_A2");
        const json& b = doc.at("alpha_B");
        if (!b.is_array() || b.size() != p.meta.M)
            throw ValidationError("model file: bad shape for alpha_B");
        for (const auto& m : b) p.alpha_B.push_back(matrix_from_json(m, p.meta.K, p.meta.K, "alpha_B"));
        p.alpha_D = doc.at("alpha_D").get<std::vector<double>>();
        if (doc.contains("alphabets")) f.alphabets = AlphabetPair::from_json(doc["alphabets"].dump());
        if (doc.contains("train_config")) f.config = config_from_json(doc["train_config"]);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("model file: ") + e.what());
    }
    try {
        f.params.validate();
    } catch (const InvalidArgument& e) {
        throw ValidationError(std::string("model file: ") + e.what());
    }
    if (f.alphabets && (f.alphabets->visual.size() != f.params.meta.V1 ||
                        f.alphabets->audio.size() != f.params.meta.V2))
        throw ValidationError("model file: alphabets do not match V1/V2");
    return f;
}

void ModelFile::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << to_json() << '\n';
}

ModelFile ModelFile::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open model file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

}  // namespace adfe
