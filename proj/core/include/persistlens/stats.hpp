#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace persistlens {

// ---------------------------------------------------------------------------
// Special functions

/// Regularized incomplete beta I_x(a, b).
///
/// Evaluated by the modified Lentz continued fraction, using the symmetry
/// I_x(a,b) = 1 - I_{1-x}(b,a) when x > (a+1)/(a+b+2) so the fraction
/// converges quickly. Absolute error is below 1e-10 for a, b up to ~1e4.
/// Throws ArgumentError unless 0 <= x <= 1, a > 0 and b > 0.
double reg_inc_beta(double x, double a, double b);

/// Two-sided Student-t tail 2·P(T >= |t|) with `df` degrees of freedom.
double student_t_sf2(double t, double df);

/// t > 0 with student_t_sf2(t, df) == alpha, i.e. the 1 - alpha/2 quantile.
double student_t_critical(double alpha, double df);

/// Upper tail P(F >= f) of the F(df1, df2) distribution.
double f_sf(double f, double df1, double df2);

/// Standard normal quantile, solved against std::erfc to full double precision.
double normal_quantile(double p);

/// Type-7 (linear interpolation) sample quantile of already sorted data.
double quantile_type7(std::span<const double> sorted, double p);

// ---------------------------------------------------------------------------
// Correlation

struct CorrelationResult {
    double r = 0.0;
    std::size_t n = 0;
    double p_value = 1.0;
    double ci_lower = 0.0;
    double ci_upper = 0.0;
};

/// Sample Pearson coefficient. Requires equal lengths n >= 3 and non-constant
/// inputs; a constant vector raises DegenerateInputError rather than returning NaN.
double pearson_r(std::span<const double> x, std::span<const double> y);

/// t-test p-value and Fisher-z confidence interval at level 1 - alpha.
/// Requires |r| < 1 and n >= 4.
CorrelationResult pearson_inference(double r, std::size_t n, double alpha = 0.05);

// ---------------------------------------------------------------------------
// Ordinary least squares

struct NamedColumn {
    std::string name;
    std::vector<double> values;
};

struct RegressionTerm {
    std::string name;
    double estimate = 0.0;
    // Absent when inference is undefined (perfect fit).
    std::optional<double> std_error;
    std::optional<double> t_value;
    std::optional<double> p_value;
};

struct RegressionResult {
    std::vector<RegressionTerm> terms;
    double r_squared = 0.0;
    double adj_r_squared = 0.0;
    std::optional<double> f_stat;
    std::optional<double> f_p_value;
    std::size_t df_model = 0;
    std::size_t df_resid = 0;
    std::size_t n = 0;
    double rss = 0.0;
    double tss = 0.0;
    bool has_intercept = true;
    double alpha = 0.05;

    bool inference_defined() const noexcept { return !terms.empty() && terms.front().std_error.has_value(); }
    const RegressionTerm* find(const std::string& name) const;
};

inline constexpr const char* kInterceptName = "(Intercept)";

/// Least-squares fit of y on the given columns (plus an intercept column first
/// when include_intercept), solved by Householder QR.
///
/// A column whose QR diagonal falls below 1e-10 times its own norm is linearly
/// dependent on the earlier columns: SingularDesignError names it. n <= p raises
/// InsufficientDataError. A residual sum of squares of (numerically) zero yields
/// estimates and R² with SE/t/p/F left undefined.
RegressionResult ols_fit(std::span<const double> y, const std::vector<NamedColumn>& columns,
                         bool include_intercept = true, double alpha = 0.05);

/// 1 - (1 - r2)(n - 1)/(n - k - 1); requires n > k + 1.
double adj_r_squared(double r2, std::size_t n, std::size_t k);

/// estimate ± t_{1-alpha/2, df} · SE, or nullopt when the SE is undefined.
std::optional<std::pair<double, double>> confidence_interval(const RegressionTerm& term,
                                                             std::size_t df_resid, double alpha);

}  // namespace persistlens
