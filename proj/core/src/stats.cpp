#include "adfe/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "adfe/rng.hpp"

namespace adfe {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// r from centered sums; nullopt when either side has zero spread
std::optional<double> pearson_r(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    const double mx = mean_of(x), my = mean_of(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) return std::nullopt;
    const double r = sxy / std::sqrt(sxx * syy);
    return std::clamp(r, -1.0, 1.0);
}

bool has_spread(std::span<const double> v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *lo != *hi;
}

double quantile_sorted(const std::vector<double>& s, double q) {
    const double pos = q * static_cast<double>(s.size() - 1);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(i);
    if (i + 1 >= s.size()) return s.back();
    return s[i] + frac * (s[i + 1] - s[i]);
}

}  // namespace

double mean_of(std::span<const double> v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double student_t_two_sided_p(double t, double df) {
    if (std::isinf(t)) return 0.0;
    boost::math::students_t dist(df);
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

double f_upper_p(double f, double df1, double df2) {
    if (std::isinf(f)) return 0.0;
    if (f <= 0.0) return 1.0;
    boost::math::fisher_f dist(df1, df2);
    return boost::math::cdf(boost::math::complement(dist, f));
}

double chi_square_upper_p(double x, double df) {
    if (x <= 0.0) return 1.0;
    boost::math::chi_squared dist(df);
    return boost::math::cdf(boost::math::complement(dist, x));
}

Correlation pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw InvalidArgument("pearson: length mismatch");
    const std::size_t n = x.size();
    if (n < 3) throw UndefinedStatistic("pearson: need at least 3 observations");
    if (!has_spread(x) || !has_spread(y)) throw UndefinedStatistic("pearson: zero variance");
    const auto r = pearson_r(x, y);
    if (!r) throw UndefinedStatistic("pearson: zero variance");
    Correlation c;
    c.r = *r;
    const double df = static_cast<double>(n - 2);
    const double one_minus = 1.0 - c.r * c.r;
    const double t = one_minus <= 0.0 ? kInf : c.r * std::sqrt(df / one_minus);
    c.p = student_t_two_sided_p(t, df);
    return c;
}

Interval bootstrap_ci(std::span<const double> x, std::span<const double> y, std::size_t B,
                      double level, std::uint64_t seed) {
    pearson(x, y);  // same preconditions
    if (B < 100) throw InvalidArgument("bootstrap_ci: need B >= 100");
    if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("bootstrap_ci: level in (0, 1)");
    const std::size_t n = x.size();
    Rng rng(seed);
    std::vector<double> rs;
    rs.reserve(B);
    std::vector<double> bx(n), by(n);
    const std::size_t max_attempts = 100 * B;
    std::size_t attempts = 0;
    while (rs.size() < B) {
        if (++attempts > max_attempts)
            throw UndefinedStatistic("bootstrap_ci: too many degenerate resamples");
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t j = uniform_index(rng, n);
            bx[i] = x[j];
            by[i] = y[j];
        }
        if (!has_spread(bx) || !has_spread(by)) continue;
        if (auto r = pearson_r(bx, by)) rs.push_back(*r);
    }
    std::sort(rs.begin(), rs.end());
    const double alpha = 1.0 - level;
    return {quantile_sorted(rs, alpha / 2.0), quantile_sorted(rs, 1.0 - alpha / 2.0)};
}

double matrix_correlation(const std::vector<std::optional<double>>& a,
                          const std::vector<std::optional<double>>& b) {
    if (a.size() != b.size()) throw InvalidArgument("matrix_correlation: shape mismatch");
    std::vector<double> xa, xb;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!a[i] || !b[i]) continue;
        xa.push_back(*a[i]);
        xb.push_back(*b[i]);
    }
    if (xa.size() < 3) throw UndefinedStatistic("matrix_correlation: fewer than 3 comparable cells");
    return pearson(xa, xb).r;
}

ZScoreResult zscore(const Matrix& features) {
    ZScoreResult out;
    const std::size_t n = features.rows(), d = features.cols();
    std::vector<double> mu(d, 0.0), sd(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += features(i, j);
        mu[j] = n ? s / static_cast<double>(n) : 0.0;
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) ss += (features(i, j) - mu[j]) * (features(i, j) - mu[j]);
        sd[j] = n ? std::sqrt(ss / static_cast<double>(n)) : 0.0;
        bool constant = true;
        for (std::size_t i = 1; i < n && constant; ++i) constant = features(i, j) == features(0, j);
        if (constant || !(sd[j] > 0.0) || !std::isfinite(sd[j]))
            out.warnings.push_back("column " + std::to_string(j) + " has zero variance; dropped");
        else
            out.kept.push_back(j);
    }
    out.values = Matrix(n, out.kept.size());
    for (std::size_t c = 0; c < out.kept.size(); ++c) {
        const std::size_t j = out.kept[c];
        for (std::size_t i = 0; i < n; ++i) out.values(i, c) = (features(i, j) - mu[j]) / sd[j];
    }
    return out;
}

AnovaResult anova_oneway(const std::vector<std::vector<double>>& groups) {
    if (groups.size() < 2) throw UndefinedStatistic("anova: need at least 2 groups");
    std::size_t n = 0;
    double grand = 0.0;
    for (const auto& g : groups) {
        if (g.size() < 2) throw UndefinedStatistic("anova: every group needs n >= 2");
        n += g.size();
        for (double x : g) grand += x;
    }
    grand /= static_cast<double>(n);
    double ss_between = 0.0, ss_within = 0.0;
    for (const auto& g : groups) {
        const double m = mean_of(g);
        ss_between += static_cast<double>(g.size()) * (m - grand) * (m - grand);
        for (double x : g) ss_within += (x - m) * (x - m);
    }
    const double ss_total = ss_between + ss_within;
    if (!(ss_total > 0.0)) throw UndefinedStatistic("anova: total variance is zero");

    AnovaResult r;
    r.df_between = static_cast<double>(groups.size() - 1);
    r.df_within = static_cast<double>(n - groups.size());
    r.eta2 = ss_between / ss_total;
    if (ss_within == 0.0) {
        r.F = kInf;
        r.infinite_f = true;
        r.p = 0.0;
        return r;
    }
    r.F = (ss_between / r.df_between) / (ss_within / r.df_within);
    r.p = r.df_within > 0 ? f_upper_p(r.F, r.df_between, r.df_within) : 1.0;
    return r;
}

ChiSquareResult chi_square_residuals(const Matrix& observed) {
    const std::size_t R = observed.rows(), C = observed.cols();
    if (R < 2 || C < 2) throw UndefinedStatistic("chi-square: need at least a 2x2 table");
    std::vector<double> row(R, 0.0), col(C, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < R; ++i)
        for (std::size_t j = 0; j < C; ++j) {
            const double o = observed(i, j);
            if (!(o >= 0.0)) throw InvalidArgument("chi-square: negative count");
            row[i] += o;
            col[j] += o;
            total += o;
        }
    for (double m : row)
        if (!(m > 0.0)) throw UndefinedStatistic("chi-square: zero row margin");
    for (double m : col)
        if (!(m > 0.0)) throw UndefinedStatistic("chi-square: zero column margin");

    ChiSquareResult r;
    r.df = (R - 1) * (C - 1);
    r.expected = Matrix(R, C);
    r.std_residuals = Matrix(R, C);
    for (std::size_t i = 0; i < R; ++i)
        for (std::size_t j = 0; j < C; ++j) {
            const double e = row[i] * col[j] / total;
            const double diff = observed(i, j) - e;
            r.expected(i, j) = e;
            r.chi2 += diff * diff / e;
            const double denom = std::sqrt(e * (1.0 - row[i] / total) * (1.0 - col[j] / total));
            r.std_residuals(i, j) = denom > 0.0 ? diff / denom : 0.0;
        }
    r.p = chi_square_upper_p(r.chi2, static_cast<double>(r.df));
    return r;
}

}  // namespace adfe
