#include <gtest/gtest.h>

#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <numeric>

#include "adfe/model.hpp"
#include "adfe/synth.hpp"
#include "helpers.hpp"

using namespace adfe;
using adfe::test::make_sequence;
using adfe::test::random_model;
using adfe::test::random_sequence;

namespace {

double log_beta(const std::vector<double>& a) {
    double s = 0.0, l = 0.0;
    for (double x : a) {
        l += std::lgamma(x);
        s += x;
    }
    return l - std::lgamma(s);
}

/// ln p(O) under symmetric Dirichlet(scale) priors, by summing the
/// Dirichlet-multinomial joint over every state path of every sequence.
double log_marginal_likelihood(const std::vector<EncodedSequence>& seqs, const ModelMeta& meta,
                               double scale) {
    std::size_t total_len = 0;
    for (const auto& s : seqs) total_len += s.length();
    std::size_t paths = 1;
    for (std::size_t i = 0; i < total_len; ++i) paths *= meta.K;

    std::vector<double> terms;
    std::vector<std::size_t> z(total_len);
    for (std::size_t code = 0; code < paths; ++code) {
        std::size_t c = code;
        for (auto& zi : z) {
            zi = c % meta.K;
            c /= meta.K;
        }
        SufficientStats n = SufficientStats::zeros(meta);
        std::size_t pos = 0;
        for (const auto& s : seqs)
            for (std::size_t t = 0; t < s.length(); ++t, ++pos) {
                n.A1(z[pos], s.obs_visual[t]) += 1;
                n.A2(z[pos], s.obs_audio[t]) += 1;
                if (t == 0) n.D[z[pos]] += 1;
                else n.B[s.segment_of[t]](z[pos - 1], z[pos]) += 1;
            }
        double lp = 0.0;
        auto rows = [&](const Matrix& counts) {
            for (std::size_t r = 0; r < counts.rows(); ++r) {
                std::vector<double> post(counts.row(r).begin(), counts.row(r).end());
                for (auto& x : post) x += scale;
                lp += log_beta(post) - log_beta(std::vector<double>(counts.cols(), scale));
            }
        };
        rows(n.A1);
        rows(n.A2);
        for (const auto& b : n.B) rows(b);
        std::vector<double> d = n.D;
        for (auto& x : d) x += scale;
        lp += log_beta(d) - log_beta(std::vector<double>(meta.K, scale));
        terms.push_back(lp);
    }
    const double mx = *std::max_element(terms.begin(), terms.end());
    double s = 0.0;
    for (double t : terms) s += std::exp(t - mx);
    return mx + std::log(s);
}

/// ln Z~ by enumerating the K^T state paths under digamma-domain parameters.
double brute_log_normalizer(const EncodedSequence& s, const LogParams& lp, std::size_t K) {
    const std::size_t T = s.length();
    std::size_t paths = 1;
    for (std::size_t i = 0; i < T; ++i) paths *= K;
    double acc = 0.0;
    for (std::size_t code = 0; code < paths; ++code) {
        std::vector<std::size_t> z(T);
        std::size_t c = code;
        for (auto& zi : z) {
            zi = c % K;
            c /= K;
        }
        double l = lp.D[z[0]];
        for (std::size_t t = 0; t < T; ++t) {
            l += lp.A1(z[t], s.obs_visual[t]) + lp.A2(z[t], s.obs_audio[t]);
            if (t) l += lp.B[s.segment_of[t]](z[t - 1], z[t]);
        }
        acc += std::exp(l);
    }
    return std::log(acc);
}

ModelParams permute_states(const ModelParams& t, const std::vector<std::size_t>& perm) {
    ModelParams out = t;
    const auto K = t.meta.K;
    for (std::size_t i = 0; i < K; ++i) {
        for (std::size_t v = 0; v < t.meta.V1; ++v) out.alpha_A1(perm[i], v) = t.alpha_A1(i, v);
        for (std::size_t v = 0; v < t.meta.V2; ++v) out.alpha_A2(perm[i], v) = t.alpha_A2(i, v);
        out.alpha_D[perm[i]] = t.alpha_D[i];
        for (std::size_t m = 0; m < t.meta.M; ++m)
            for (std::size_t j = 0; j < K; ++j) out.alpha_B[m](perm[i], perm[j]) = t.alpha_B[m](i, j);
    }
    return out;
}

std::vector<EncodedSequence> synthetic_sequences(std::size_t videos, std::size_t K, std::uint64_t seed,
                                                 ObservationShape& shape) {
    GenSpec spec;
    spec.K = K;
    spec.V1 = 6;
    spec.V2 = 8;
    spec.videos = videos;
    spec.max_scenes = 10;
    spec.mean_scenes = 6;
    auto g = generate_corpus(spec, seed);
    const auto& reg = ElementRegistry::default_registry();
    auto a = build_alphabet(g.corpus, reg);
    shape = {a.visual.size(), a.audio.size(), 5, 3.0};
    return encode_corpus(g.corpus, reg, a, 3.0);
}

}  // namespace

TEST(Params, InitWithinJitterBand) {
    auto t = init_params(3, 4, 5, 2, 0.2, 7);
    EXPECT_NO_THROW(t.validate());
    for (double x : t.alpha_A1.data()) {
        EXPECT_GE(x, 0.2);
        EXPECT_LE(x, 0.2 * (1 + kInitJitterFraction));
    }
    EXPECT_EQ(init_params(3, 4, 5, 2, 0.2, 7), t);
    EXPECT_NE(init_params(3, 4, 5, 2, 0.2, 8), t);
    EXPECT_EQ(init_params(3, 4, 5, 2, 0.2, 7, 0.0), prior_params({3, 4, 5, 2, 3.0}, 0.2));
    EXPECT_THROW(init_params(0, 4, 5, 2, 0.2, 7), InvalidArgument);
    EXPECT_THROW(init_params(3, 4, 5, 2, 0.0, 7), InvalidArgument);
}

TEST(Params, Defaults) {
    TrainConfig c;
    EXPECT_EQ(c.hidden_states, 5u);
    EXPECT_DOUBLE_EQ(c.learning_rate, 0.0275);
    EXPECT_DOUBLE_EQ(c.dirichlet_scale, 0.2);
}

TEST(Params, MeanAndGeometricAreStochastic) {
    Rng rng(1);
    auto t = random_model(rng, 3, 4, 5, 2);
    EXPECT_NO_THROW(mean_params(t).validate(1e-12));
    EXPECT_NO_THROW(geometric_params(t).validate(1e-12));
    auto bad = t;
    bad.alpha_A1(0, 0) = -1.0;
    EXPECT_THROW(bad.validate(), InvalidArgument);
}

TEST(DirichletKl, KnownValueAndZeroAtEquality) {
    std::vector<double> a{1, 1}, b{2, 2};
    EXPECT_NEAR(dirichlet_kl(a, b), 2.0 - std::log(6.0), 1e-12);
    EXPECT_NEAR(dirichlet_kl(b, b), 0.0, 1e-14);
    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
        std::vector<double> x(4), y(4);
        for (auto& v : x) v = 0.1 + 5 * uniform01(rng);
        for (auto& v : y) v = 0.1 + 5 * uniform01(rng);
        EXPECT_GE(dirichlet_kl(x, y), -1e-12);
    }
}

TEST(EStep, StatisticsSumToCounts) {
    Rng rng(4);
    auto t = random_model(rng, 3, 4, 5, 3);
    auto seq = random_sequence(rng, 7, 4, 5, 3);
    auto st = expected_stats(seq, expected_log_params(t), t.meta);
    auto sum = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); };
    EXPECT_NEAR(sum(st.A1.data()), 7.0, 1e-10);
    EXPECT_NEAR(sum(st.A2.data()), 7.0, 1e-10);
    EXPECT_NEAR(sum(st.D), 1.0, 1e-12);
    double b = 0.0;
    for (const auto& m : st.B) b += sum(m.data());
    EXPECT_NEAR(b, 6.0, 1e-10);
}

TEST(EStep, LogNormalizerMatchesEnumeration) {
    Rng rng(5);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t K = 1 + uniform_index(rng, 3);
        auto t = random_model(rng, K, 3, 4, 2);
        auto seq = random_sequence(rng, 1 + uniform_index(rng, 5), 3, 4, 2);
        const auto lp = expected_log_params(t);
        EXPECT_NEAR(expected_stats(seq, lp, t.meta).log_normalizer, brute_log_normalizer(seq, lp, K), 1e-10);
    }
}

TEST(EStep, RejectsOutOfRangeSymbols) {
    auto t = init_params(2, 3, 3, 1, 1.0, 1);
    auto seq = make_sequence({0, 3}, {0, 0});
    EXPECT_THROW(expected_stats(seq, expected_log_params(t), t.meta), InvalidArgument);
}

TEST(Elbo, BoundedByExactLogMarginal) {
    Rng rng(6);
    const ModelMeta meta{2, 2, 2, 2, 3.0};
    std::vector<EncodedSequence> seqs{make_sequence({0, 1, 1}, {1, 0, 1}, {0, 0, 1}),
                                      make_sequence({1, 1, 0}, {0, 0, 1}, {0, 1, 1})};
    const double scale = 0.7;
    const double exact = log_marginal_likelihood(seqs, meta, scale);
    for (int rep = 0; rep < 20; ++rep) {
        auto t = random_model(rng, 2, 2, 2, 2, 0.2, 4.0);
        EXPECT_LE(elbo(t, scale, seqs), exact + 1e-10);
    }
    auto t = init_params(2, 2, 2, 2, scale, 9, 0.5);
    const double start = elbo(t, scale, seqs);
    for (int it = 0; it < 200; ++it) t = natural_gradient_step(t, seqs, seqs.size(), scale, 1.0);
    const double fitted = elbo(t, scale, seqs);
    EXPECT_LE(fitted, exact + 1e-10);
    EXPECT_GT(fitted, start);
}

TEST(Elbo, SingleStateClosedForm) {
    auto t = init_params(1, 3, 2, 2, 0.5, 2, 0.8);
    std::vector<EncodedSequence> seqs{make_sequence({0, 2, 2}, {1, 1, 0}, {0, 1, 1})};
    auto dg = [](double x) { return boost::math::digamma(x); };
    auto row_sum = [](std::span<const double> r) { return std::accumulate(r.begin(), r.end(), 0.0); };
    const double s1 = row_sum(t.alpha_A1.row(0)), s2 = row_sum(t.alpha_A2.row(0));
    double data = 0.0;
    for (std::size_t v : {0, 2, 2}) data += dg(t.alpha_A1(0, v)) - dg(s1);
    for (std::size_t v : {1, 1, 0}) data += dg(t.alpha_A2(0, v)) - dg(s2);
    EXPECT_NEAR(elbo(t, 0.5, seqs), data - parameter_kl(t, 0.5), 1e-10);
}

TEST(Elbo, InvariantUnderStatePermutation) {
    Rng rng(8);
    auto t = random_model(rng, 3, 4, 4, 2);
    std::vector<EncodedSequence> seqs;
    for (int i = 0; i < 5; ++i) seqs.push_back(random_sequence(rng, 6, 4, 4, 2));
    const double base = elbo(t, 0.3, seqs);
    EXPECT_NEAR(elbo(permute_states(t, {2, 0, 1}), 0.3, seqs), base, 1e-9);
    EXPECT_NEAR(elbo(permute_states(t, {1, 0, 2}), 0.3, seqs), base, 1e-9);
}

TEST(NaturalGradient, ZeroStepIsIdentityFullStepIsPriorPlusStats) {
    Rng rng(9);
    auto t = random_model(rng, 2, 3, 3, 2);
    std::vector<EncodedSequence> batch{random_sequence(rng, 4, 3, 3, 2), random_sequence(rng, 5, 3, 3, 2)};
    EXPECT_EQ(natural_gradient_step(t, batch, 10, 0.2, 0.0), t);
    auto full = natural_gradient_step(t, batch, 10, 0.2, 1.0);
    auto st = expected_stats(batch, t);
    EXPECT_NEAR(full.alpha_A1(1, 2), 0.2 + 5.0 * st.A1(1, 2), 1e-12);
    EXPECT_NEAR(full.alpha_D[0], 0.2 + 5.0 * st.D[0], 1e-12);
    EXPECT_THROW(natural_gradient_step(t, batch, 10, 0.2, 1.5), InvalidArgument);
}

TEST(Train, FullBatchElboNeverDecreases) {
    ObservationShape shape;
    auto seqs = synthetic_sequences(40, 3, 11, shape);
    TrainConfig c;
    c.hidden_states = 3;
    c.full_batch = true;
    c.epochs = 30;
    c.seed = 4;
    auto r = train(seqs, shape, c);
    double prev = r.trace.initial_train_elbo;
    for (double e : r.trace.train_elbo) {
        EXPECT_GE(e - prev, -1e-8);
        prev = e;
    }
}

TEST(Train, DeterministicAndThreadIndependent) {
    ObservationShape shape;
    auto seqs = synthetic_sequences(60, 3, 12, shape);
    TrainConfig c;
    c.hidden_states = 3;
    c.epochs = 5;
    c.batch_size = 8;
    c.seed = 21;
    auto a = train(seqs, shape, c);
    auto b = train(seqs, shape, c);
    c.threads = 4;
    auto d = train(seqs, shape, c);
    EXPECT_EQ(a.params, b.params);
    EXPECT_EQ(a.params, d.params);
    EXPECT_EQ(a.trace.n_train, 48u);
    EXPECT_EQ(a.trace.n_validation, 12u);
    EXPECT_EQ(a.trace.train_elbo.size(), 5u);
}

TEST(Train, Validation) {
    ObservationShape shape;
    auto seqs = synthetic_sequences(10, 2, 13, shape);
    TrainConfig c;
    c.batch_size = 100;
    EXPECT_THROW(train(seqs, shape, c), InvalidArgument);
    c = {};
    c.learning_rate = 0.0;
    EXPECT_THROW(train(seqs, shape, c), InvalidArgument);
    EXPECT_THROW(train({}, shape, TrainConfig{}), InvalidArgument);
}

TEST(Split, EightyTwentyDisjoint) {
    auto [tr, val] = split_indices(100, 0.2, 3);
    EXPECT_EQ(tr.size(), 80u);
    EXPECT_EQ(val.size(), 20u);
    std::vector<std::size_t> all(tr);
    all.insert(all.end(), val.begin(), val.end());
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(all[i], i);
    EXPECT_EQ(split_indices(100, 0.2, 3), split_indices(100, 0.2, 3));
}

TEST(Sweep, OneRowPerValueAndOneBestPerAxis) {
    ObservationShape shape;
    auto seqs = synthetic_sequences(30, 2, 14, shape);
    SweepGrid g;
    g.base.epochs = 2;
    g.base.batch_size = 8;
    g.hidden_states = {2, 3};
    g.learning_rates = {0.01, 0.05};
    g.dirichlet_scales = {0.2};
    g.seeds = 2;
    auto rep = hyperparameter_sweep(seqs, shape, g);
    ASSERT_EQ(rep.rows.size(), 5u);
    std::map<std::string, int> best;
    for (const auto& r : rep.rows) {
        EXPECT_EQ(r.losses.size(), 2u);
        best[r.axis] += r.best;
    }
    EXPECT_EQ(best["hidden_states"], 1);
    EXPECT_EQ(best["learning_rate"], 1);
    EXPECT_EQ(best["dirichlet_scale"], 1);
    EXPECT_NE(rep.to_csv().find("axis,value"), std::string::npos);
}

TEST(ModelFile, RoundTripIsExact) {
    Rng rng(15);
    ModelFile f{random_model(rng, 3, 4, 5, 2), std::nullopt, TrainConfig{}};
    auto back = ModelFile::from_json(f.to_json());
    EXPECT_EQ(back.params, f.params);
    ASSERT_TRUE(back.config);
    EXPECT_EQ(back.config->hidden_states, 5u);
    EXPECT_EQ(back.to_json(), f.to_json());
}

TEST(ModelFile, RejectsBadDocuments) {
    EXPECT_THROW(ModelFile::from_json("{}"), ValidationError);
    EXPECT_THROW(ModelFile::from_json("not json"), ValidationError);
    Rng rng(16);
    ModelFile f{random_model(rng, 2, 2, 2, 1), std::nullopt, std::nullopt};
    auto text = f.to_json();
    text.replace(text.find("\"version\": 1"), 12, "\"version\": 9");
    EXPECT_THROW(ModelFile::from_json(text), ValidationError);
}
