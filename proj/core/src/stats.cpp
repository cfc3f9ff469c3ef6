#include "persistlens/stats.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "persistlens/error.hpp"

namespace persistlens {

double pearson_r(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ArgumentError("pearson_r: vectors differ in length");
    const std::size_t n = x.size();
    if (n < 3) throw ArgumentError("pearson_r: need at least 3 observations");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw ArgumentError("pearson_r: non-finite input");
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0) throw DegenerateInputError("x", "pearson_r: x is constant");
    if (syy == 0.0) throw DegenerateInputError("y", "pearson_r: y is constant");
    const double r = sxy / std::sqrt(sxx * syy);
    return std::clamp(r, -1.0, 1.0);
}

CorrelationResult pearson_inference(double r, std::size_t n, double alpha) {
    if (!std::isfinite(r) || std::fabs(r) > 1.0) throw ArgumentError("pearson_inference: r must lie in [-1, 1]");
    if (std::fabs(r) == 1.0) throw DegenerateInputError("r", "pearson_inference: |r| = 1 has no finite interval");
    if (n < 4) throw ArgumentError("pearson_inference: need n >= 4");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("pearson_inference: alpha must lie in (0, 1)");
    CorrelationResult out;
    out.r = r;
    out.n = n;
    const double df = static_cast<double>(n - 2);
    out.p_value = student_t_sf2(r * std::sqrt(df / (1.0 - r * r)), df);
    const double z = std::atanh(r);
    const double half_width = normal_quantile(1.0 - alpha / 2.0) / std::sqrt(static_cast<double>(n - 3));
    out.ci_lower = std::tanh(z - half_width);
    out.ci_upper = std::tanh(z + half_width);
    return out;
}

const RegressionTerm* RegressionResult::find(const std::string& name) const {
    for (const auto& t : terms) {
        if (t.name == name) return &t;
    }
    return nullptr;
}

double adj_r_squared(double r2, std::size_t n, std::size_t k) {
    if (n <= k + 1) throw ArgumentError("adj_r_squared: need n > k + 1");
    return 1.0 - (1.0 - r2) * static_cast<double>(n - 1) / static_cast<double>(n - k - 1);
}

std::optional<std::pair<double, double>> confidence_interval(const RegressionTerm& term,
                                                             std::size_t df_resid, double alpha) {
    if (!term.std_error || df_resid == 0) return std::nullopt;
    const double crit = student_t_critical(alpha, static_cast<double>(df_resid));
    return std::pair{term.estimate - crit * *term.std_error, term.estimate + crit * *term.std_error};
}

RegressionResult ols_fit(std::span<const double> y, const std::vector<NamedColumn>& columns,
                         bool include_intercept, double alpha) {
    const std::size_t n = y.size();
    const std::size_t p = columns.size() + (include_intercept ? 1 : 0);
    if (p == 0) throw ArgumentError("ols_fit: no columns to fit");
    for (const auto& c : columns) {
        if (c.values.size() != n) {
            throw ArgumentError("ols_fit: column '" + c.name + "' has " + std::to_string(c.values.size()) +
                                " values, expected " + std::to_string(n));
        }
    }
    if (n <= p) {
        throw InsufficientDataError("ols_fit: " + std::to_string(n) + " observations for " +
                                    std::to_string(p) + " parameters (need n > p)");
    }

    std::vector<std::string> names;
    Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    Eigen::VectorXd Y(static_cast<Eigen::Index>(n));
    Eigen::Index col = 0;
    if (include_intercept) {
        X.col(col++).setOnes();
        names.emplace_back(kInterceptName);
    }
    for (const auto& c : columns) {
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::isfinite(c.values[i])) throw ArgumentError("ols_fit: column '" + c.name + "' has a non-finite value");
            X(static_cast<Eigen::Index>(i), col) = c.values[i];
        }
        ++col;
        names.push_back(c.name);
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(y[i])) throw ArgumentError("ols_fit: response has a non-finite value");
        Y(static_cast<Eigen::Index>(i)) = y[i];
    }

    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
    const Eigen::MatrixXd R = qr.matrixQR().topLeftCorner(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p))
                                  .triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(p); ++j) {
        const double norm = X.col(j).norm();
        if (!(std::fabs(R(j, j)) > 1e-10 * norm)) {
            throw SingularDesignError(names[static_cast<std::size_t>(j)],
                                      "ols_fit: column '" + names[static_cast<std::size_t>(j)] +
                                          "' is constant or a linear combination of earlier columns");
        }
    }
    const Eigen::VectorXd qty = (qr.householderQ().transpose() * Y).head(static_cast<Eigen::Index>(p));
    const Eigen::VectorXd beta = R.triangularView<Eigen::Upper>().solve(qty);
    const Eigen::VectorXd resid = Y - X * beta;

    RegressionResult out;
    out.n = n;
    out.has_intercept = include_intercept;
    out.alpha = alpha;
    out.df_resid = n - p;
    out.df_model = include_intercept ? p - 1 : p;
    out.rss = resid.squaredNorm();
    const double mean = Y.mean();
    out.tss = include_intercept ? (Y.array() - mean).square().sum() : Y.squaredNorm();
    if (out.tss == 0.0) throw DegenerateInputError("y", "ols_fit: response has no variation");
    const bool perfect_fit = out.rss <= 1e-20 * Y.squaredNorm();
    if (perfect_fit) out.rss = 0.0;
    out.r_squared = std::clamp(1.0 - out.rss / out.tss, 0.0, 1.0);
    out.adj_r_squared = 1.0 - (1.0 - out.r_squared) * static_cast<double>(include_intercept ? n - 1 : n) /
                                  static_cast<double>(out.df_resid);

    const double df = static_cast<double>(out.df_resid);
    const double sigma2 = out.rss / df;
    Eigen::MatrixXd r_inv;
    if (!perfect_fit) {
        r_inv = R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(R.rows(), R.cols()));
    }
    for (std::size_t j = 0; j < p; ++j) {
        RegressionTerm term;
        term.name = names[j];
        term.estimate = beta(static_cast<Eigen::Index>(j));
        if (!perfect_fit) {
            // diag((X'X)^-1) = squared row norms of R^-1
            const double var = sigma2 * r_inv.row(static_cast<Eigen::Index>(j)).squaredNorm();
            term.std_error = std::sqrt(var);
            term.t_value = term.estimate / *term.std_error;
            term.p_value = student_t_sf2(*term.t_value, df);
        }
        out.terms.push_back(std::move(term));
    }
    if (!perfect_fit && out.df_model > 0) {
        out.f_stat = ((out.tss - out.rss) / static_cast<double>(out.df_model)) / sigma2;
        out.f_p_value = f_sf(std::max(*out.f_stat, 0.0), static_cast<double>(out.df_model), df);
    }
    return out;
}

}  // namespace persistlens
