#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "adfe/corpus.hpp"
#include "adfe/matrix.hpp"

namespace adfe {

struct ModelMeta {
    std::size_t K = 0;   // hidden states
    std::size_t V1 = 0;  // visual symbols, OOV included
    std::size_t V2 = 0;  // audio symbols, OOV included
    std::size_t M = 0;   // segments, one transition matrix each
    double segment_seconds = kDefaultSegmentSeconds;

    friend bool operator==(const ModelMeta&, const ModelMeta&) = default;
};

/// Dirichlet concentrations of the variational posterior over emissions
/// (A1 visual, A2 audio), per-segment transitions B[m] and initial belief D.
struct ModelParams {
    ModelMeta meta;
    Matrix alpha_A1;             // K x V1
    Matrix alpha_A2;             // K x V2
    std::vector<Matrix> alpha_B;  // M x (K x K), row s -> next state
    std::vector<double> alpha_D;  // K

    /// Throws InvalidArgument on shape mismatch or a non-positive entry.
    void validate() const;
    double total_mass() const;

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Row-stochastic categorical parameters with the same layout as ModelParams.
struct PointParams {
    Matrix A1;
    Matrix A2;
    std::vector<Matrix> B;
    std::vector<double> D;

    std::size_t K() const noexcept { return D.size(); }
    std::size_t M() const noexcept { return B.size(); }
    /// Rows must sum to 1 within `tol` and entries be non-negative.
    void validate(double tol = 1e-9) const;
};

/// Digamma-domain parameters E_q[ln A], E_q[ln B], E_q[ln D].
struct LogParams {
    Matrix A1;
    Matrix A2;
    std::vector<Matrix> B;
    std::vector<double> D;
};

inline constexpr double kDefaultDirichletScale = 0.2;
inline constexpr double kDefaultLearningRate = 0.0275;
inline constexpr std::size_t kDefaultHiddenStates = 5;
inline constexpr double kInitJitterFraction = 0.01;

/// Concentrations all equal to `scale` plus seeded jitter in
/// [0, jitter_fraction * scale].
ModelParams init_params(std::size_t K, std::size_t V1, std::size_t V2, std::size_t M,
                        double scale, std::uint64_t seed,
                        double jitter_fraction = kInitJitterFraction);

/// Symmetric prior with every concentration equal to `scale`.
ModelParams prior_params(const ModelMeta& meta, double scale);

LogParams expected_log_params(const ModelParams& theta);
PointParams mean_params(const ModelParams& theta);
/// exp(expected_log_params) renormalized per row.
PointParams geometric_params(const ModelParams& theta);

/// Dirichlet KL divergence KL(Dir(a) || Dir(b)).
double dirichlet_kl(std::span<const double> a, std::span<const double> b);

/// Sum of KL(q || prior) over every Dirichlet row of theta.
double parameter_kl(const ModelParams& theta, double prior_scale);

/// Expected sufficient statistics collected by forward-backward.
struct SufficientStats {
    Matrix A1;
    Matrix A2;
    std::vector<Matrix> B;
    std::vector<double> D;
    double log_normalizer = 0.0;  // sum of ln Z~ over sequences

    static SufficientStats zeros(const ModelMeta& meta);
    void add(const SufficientStats& other);
};

/// Forward-backward on one sequence under digamma-domain parameters.
SufficientStats expected_stats(const EncodedSequence& seq, const LogParams& log_params,
                               const ModelMeta& meta);

SufficientStats expected_stats(const std::vector<EncodedSequence>& seqs, const ModelParams& theta,
                               unsigned threads = 1);

/// Evidence lower bound: sum of per-sequence ln Z~ minus parameter KL.
double elbo(const ModelParams& theta, double prior_scale,
            const std::vector<EncodedSequence>& sequences, unsigned threads = 1);

struct TrainConfig {
    std::size_t hidden_states = kDefaultHiddenStates;
    double dirichlet_scale = kDefaultDirichletScale;
    double learning_rate = kDefaultLearningRate;
    std::size_t batch_size = 32;
    std::size_t epochs = 50;
    std::uint64_t seed = 0;
    /// Seed for the train/validation split; defaults to `seed`.
    std::optional<std::uint64_t> split_seed;
    double validation_ratio = 0.2;
    /// One batch holding every training sequence, step size 1 (plain CAVI).
    bool full_batch = false;
    unsigned threads = 1;

    void validate() const;
    std::string to_json() const;  // threads is a runtime setting and not serialized
    static TrainConfig from_json(std::string_view text);
};

struct TrainingTrace {
    TrainConfig config;
    std::size_t n_train = 0;
    std::size_t n_validation = 0;
    double initial_train_elbo = 0.0;
    std::vector<double> train_elbo;            // per epoch
    std::vector<double> validation_neg_elbo;   // per epoch; NaN when no validation split
    std::vector<double> wall_seconds;          // per epoch, cumulative

    std::string to_csv() const;
};

struct ObservationShape {
    std::size_t V1 = 0;
    std::size_t V2 = 0;
    std::size_t M = 0;
    double segment_seconds = kDefaultSegmentSeconds;
};

struct TrainResult {
    ModelParams params;
    TrainingTrace trace;
};

/// One stochastic natural-gradient step:
/// theta <- (1 - rho) theta + rho (prior + (n_total / |batch|) stats).
ModelParams natural_gradient_step(const ModelParams& theta,
                                  const std::vector<EncodedSequence>& batch, std::size_t n_total,
                                  double prior_scale, double rho, unsigned threads = 1);

TrainResult train(const std::vector<EncodedSequence>& sequences, const ObservationShape& shape,
                  const TrainConfig& config);

/// Deterministic 80:20-style split. Returns (train indices, validation indices).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
split_indices(std::size_t n, double validation_ratio, std::uint64_t seed);

struct SweepGrid {
    TrainConfig base;
    std::vector<std::size_t> hidden_states;
    std::vector<double> learning_rates;
    std::vector<double> dirichlet_scales;
    std::size_t seeds = 5;
};

struct SweepRow {
    std::string axis;   // "hidden_states" | "learning_rate" | "dirichlet_scale"
    double value = 0.0;
    TrainConfig config;
    std::vector<double> losses;  // final validation negative ELBO per seed
    double mean_val_loss = 0.0;
    double sd = 0.0;
    bool best = false;  // lowest mean loss on its axis
};

struct SweepReport {
    std::vector<SweepRow> rows;
    std::string to_csv() const;
};

/// Varies one axis at a time around grid.base; each config trained
/// grid.seeds times.
SweepReport hyperparameter_sweep(const std::vector<EncodedSequence>& sequences,
                                 const ObservationShape& shape, const SweepGrid& grid);

/// Versioned on-disk model: concentrations plus the alphabets they index.
struct ModelFile {
    ModelParams params;
    std::optional<AlphabetPair> alphabets;
    std::optional<TrainConfig> config;

    std::string to_json() const;
    static ModelFile from_json(std::string_view text);
    void save(const std::filesystem::path& path) const;
    static ModelFile load(const std::filesystem::path& path);
};

}  // namespace adfe
