#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adfe/error.hpp"
#include "adfe/matrix.hpp"

namespace adfe {

/// Raised when a statistic is mathematically undefined for the input
/// (zero variance, too few observations).
class UndefinedStatistic : public Error {
public:
    using Error::Error;
};

struct Correlation {
    double r = 0.0;
    double p = 1.0;  // two-sided, Student-t with n - 2 df
};

Correlation pearson(std::span<const double> x, std::span<const double> y);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

/// Percentile bootstrap interval of Pearson r over paired resamples.
Interval bootstrap_ci(std::span<const double> x, std::span<const double> y, std::size_t B,
                      double level, std::uint64_t seed);

/// Two-sided p-value of a t statistic.
double student_t_two_sided_p(double t, double df);
/// Upper-tail p-value of an F statistic.
double f_upper_p(double f, double df1, double df2);
/// Upper-tail p-value of a chi-square statistic.
double chi_square_upper_p(double x, double df);

/// Pearson r between two equally shaped matrices of correlations, ignoring
/// any cell that is null in either.
double matrix_correlation(const std::vector<std::optional<double>>& a,
                          const std::vector<std::optional<double>>& b);

struct ZScoreResult {
    Matrix values;                     // N x kept columns
    std::vector<std::size_t> kept;     // indices into the input columns
    std::vector<std::string> warnings; // one per dropped column
};

/// Column-wise (x - mean) / population SD; constant columns are dropped.
ZScoreResult zscore(const Matrix& features);

struct AnovaResult {
    double F = 0.0;
    double p = 1.0;
    double eta2 = 0.0;
    double df_between = 0.0;
    double df_within = 0.0;
    bool infinite_f = false;  // within-group SS was zero
};

AnovaResult anova_oneway(const std::vector<std::vector<double>>& groups);

struct ChiSquareResult {
    double chi2 = 0.0;
    std::size_t df = 0;
    double p = 1.0;
    Matrix expected;
    Matrix std_residuals;  // adjusted (Haberman) residuals
};

ChiSquareResult chi_square_residuals(const Matrix& observed);

double mean_of(std::span<const double> v);

}  // namespace adfe
