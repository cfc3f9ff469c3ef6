#include <algorithm>
#include <cmath>
#include <limits>

#include "persistlens/error.hpp"
#include "persistlens/stats.hpp"

namespace persistlens {

namespace {

constexpr double kTiny = 1e-300;
constexpr double kEps = 1e-16;
constexpr int kMaxIterations = 20000;

// Continued fraction for I_x(a,b) without the front factor (modified Lentz).
double beta_continued_fraction(double x, double a, double b) {
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIterations; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < kEps) return h;
    }
    throw Error("incomplete beta continued fraction did not converge");
}

// x^a (1-x)^b / (a B(a,b)), in log space.
double front_factor(double x, double a, double b) {
    const double log_beta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    return std::exp(a * std::log(x) + b * std::log1p(-x) - log_beta) / a;
}

}  // namespace

double reg_inc_beta(double x, double a, double b) {
    if (!(x >= 0.0 && x <= 1.0)) throw ArgumentError("reg_inc_beta: x must lie in [0, 1]");
    if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
        throw ArgumentError("reg_inc_beta: a and b must be positive and finite");
    }
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    if (a == b && x == 0.5) return 0.5;  // exact by symmetry
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front_factor(x, a, b) * beta_continued_fraction(x, a, b);
    }
    return 1.0 - front_factor(1.0 - x, b, a) * beta_continued_fraction(1.0 - x, b, a);
}

double student_t_sf2(double t, double df) {
    if (!(df >= 1.0) || !std::isfinite(df)) throw ArgumentError("student_t_sf2: df must be >= 1");
    if (std::isnan(t)) throw ArgumentError("student_t_sf2: t is NaN");
    if (std::isinf(t)) return 0.0;
    if (t == 0.0) return 1.0;
    const double t2 = t * t;
    return reg_inc_beta(df / (df + t2), df / 2.0, 0.5);
}

double student_t_critical(double alpha, double df) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("student_t_critical: alpha must lie in (0, 1)");
    double lo = 0.0;
    double hi = 1.0;
    while (student_t_sf2(hi, df) > alpha) {
        hi *= 2.0;
        if (hi > 1e12) throw Error("student_t_critical: no bracket");
    }
    for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (student_t_sf2(mid, df) > alpha) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

double f_sf(double f, double df1, double df2) {
    if (!(df1 > 0.0) || !(df2 > 0.0)) throw ArgumentError("f_sf: degrees of freedom must be positive");
    if (!(f >= 0.0)) throw ArgumentError("f_sf: f must be >= 0");
    if (std::isinf(f)) return 0.0;
    if (f == 0.0) return 1.0;
    return reg_inc_beta(df2 / (df2 + df1 * f), df2 / 2.0, df1 / 2.0);
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw ArgumentError("normal_quantile: p must lie in (0, 1)");
    // lower-tail CDF via erfc keeps precision in both tails
    auto cdf = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
    double lo = -40.0;
    double hi = 40.0;
    for (int i = 0; i < 300; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        if (cdf(mid) < p) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

double quantile_type7(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw ArgumentError("quantile of empty data");
    if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("quantile level must lie in [0, 1]");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace persistlens
