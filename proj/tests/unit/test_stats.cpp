#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "persistlens/error.hpp"
#include "persistlens/stats.hpp"

using namespace persistlens;

namespace {

// Table 1 and Table 2 as printed.
struct PrintedCorrelation {
    double r, p, lo, hi;
};
constexpr PrintedCorrelation kTable1[] = {
    {-0.43151994, 0.065070683, -0.74057605, 0.0282206},
    {-0.09360824, 0.703079390, -0.52547550, 0.3766138},
    {-0.19870651, 0.414774546, -0.59886558, 0.2808508},
};
constexpr std::size_t kDerivedN = 19;

}  // namespace

TEST(IncompleteBeta, Boundaries) {
    EXPECT_EQ(reg_inc_beta(0.0, 2.5, 3.0), 0.0);
    EXPECT_EQ(reg_inc_beta(1.0, 2.5, 3.0), 1.0);
    EXPECT_DOUBLE_EQ(reg_inc_beta(0.5, 1.0, 1.0), 0.5);
    EXPECT_NEAR(reg_inc_beta(0.3, 1.0, 1.0), 0.3, 1e-15);
}

TEST(IncompleteBeta, DomainErrors) {
    EXPECT_THROW(reg_inc_beta(-0.1, 1, 1), ArgumentError);
    EXPECT_THROW(reg_inc_beta(1.1, 1, 1), ArgumentError);
    EXPECT_THROW(reg_inc_beta(0.5, 0, 1), ArgumentError);
    EXPECT_THROW(reg_inc_beta(0.5, 1, -2), ArgumentError);
    EXPECT_THROW(reg_inc_beta(std::nan(""), 1, 1), ArgumentError);
}

TEST(IncompleteBeta, SymmetryRelation) {
    for (double x : {0.05, 0.3, 0.5, 0.77, 0.99}) {
        EXPECT_NEAR(reg_inc_beta(x, 3.5, 1.25), 1.0 - reg_inc_beta(1.0 - x, 1.25, 3.5), 1e-14);
    }
}

TEST(IncompleteBeta, MatchesQuadratureOracle) {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> ux(0.0, 1.0), ua(0.5, 20.0);
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
        const double x = ux(gen), a = ua(gen), b = ua(gen);
        worst = std::max(worst, std::fabs(reg_inc_beta(x, a, b) - oracle::inc_beta_quadrature(x, a, b)));
    }
    EXPECT_LE(worst, 1e-8);
}

TEST(StudentT, KnownValues) {
    EXPECT_EQ(student_t_sf2(0.0, 5), 1.0);
    EXPECT_DOUBLE_EQ(student_t_sf2(1.0, 1), 0.5);
    EXPECT_NEAR(student_t_sf2(-2.0, 7), student_t_sf2(2.0, 7), 1e-16);
    EXPECT_THROW(student_t_sf2(1.0, 0.5), ArgumentError);
}

TEST(StudentT, TableTwoPValues) {
    // estimate / SE from the printed table, df = 14
    const double t[] = {25.021 / 6.175, 3.869 / 2.345, -2.454 / 2.230, -4.421 / 2.008, -4.775 / 2.791};
    const double printed_t[] = {4.052, 1.650, -1.100, -2.202, -1.711};
    const double printed_p[] = {0.001, 0.121, 0.290, 0.045, 0.109};
    for (int i = 0; i < 5; ++i) {
        EXPECT_NEAR(t[i], printed_t[i], 1e-3);
        EXPECT_NEAR(student_t_sf2(t[i], 14), printed_p[i], 5e-3);
    }
    EXPECT_NEAR(student_t_sf2(4.052, 14), 0.00119, 1e-5);
}

TEST(StudentT, CriticalValueInvertsTail) {
    const double c = student_t_critical(0.05, 14);
    EXPECT_NEAR(c, 2.1447866879, 1e-8);
    EXPECT_NEAR(student_t_sf2(c, 14), 0.05, 1e-12);
}

TEST(FDistribution, KnownValues) {
    EXPECT_EQ(f_sf(0.0, 4, 14), 1.0);
    EXPECT_NEAR(f_sf(2.11, 4, 14), 0.133, 5e-3);
    EXPECT_NEAR(f_sf(2.11, 4, 14), 0.13365, 1e-5);
    for (double m : {3.0, 10.0, 40.0}) {
        EXPECT_NEAR(f_sf(1.0, 1, m), student_t_sf2(1.0, m), 1e-13);
    }
    EXPECT_THROW(f_sf(-1.0, 1, 1), ArgumentError);
    EXPECT_THROW(f_sf(1.0, 0, 1), ArgumentError);
}

TEST(NormalQuantile, Values) {
    EXPECT_NEAR(normal_quantile(0.975), 1.959963984540054, 1e-13);
    EXPECT_NEAR(normal_quantile(0.5), 0.0, 1e-15);
    EXPECT_NEAR(normal_quantile(0.025), -1.959963984540054, 1e-13);
}

TEST(Pearson, PerfectLines) {
    EXPECT_DOUBLE_EQ(pearson_r(std::vector<double>{1, 2, 3}, std::vector<double>{2, 4, 6}), 1.0);
    EXPECT_DOUBLE_EQ(pearson_r(std::vector<double>{1, 2, 3}, std::vector<double>{6, 4, 2}), -1.0);
}

TEST(Pearson, ConstantInputIsDegenerate) {
    try {
        pearson_r(std::vector<double>{2, 2, 2}, std::vector<double>{1, 2, 3});
        FAIL();
    } catch (const DegenerateInputError& e) {
        EXPECT_EQ(e.column(), "x");
    }
    EXPECT_THROW(pearson_r(std::vector<double>{1, 2}, std::vector<double>{1, 2}), ArgumentError);
    EXPECT_THROW(pearson_r(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2}), ArgumentError);
}

TEST(Pearson, MatchesExtendedPrecisionOracle) {
    std::mt19937_64 gen(5);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 3 + trial % 40;
        std::vector<double> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = nd(gen) * 10 + 3;
            y[i] = 0.5 * x[i] + nd(gen);
        }
        EXPECT_NEAR(pearson_r(x, y), oracle::pearson(x, y), 1e-12);
    }
}

TEST(PearsonInference, TableOneRows) {
    for (const auto& row : kTable1) {
        const auto res = pearson_inference(row.r, kDerivedN);
        EXPECT_NEAR(res.p_value, row.p, 5e-4);
        EXPECT_NEAR(res.ci_lower, row.lo, 5e-4);
        EXPECT_NEAR(res.ci_upper, row.hi, 5e-4);
        // tighter than the printed precision demands
        EXPECT_NEAR(res.p_value, row.p, 1e-7);
        EXPECT_NEAR(res.ci_lower, row.lo, 1e-6);
    }
}

TEST(PearsonInference, DerivedSampleSizeIsUnique) {
    int matches = 0;
    for (std::size_t n = 4; n <= 100; ++n) {
        bool all = true;
        for (const auto& row : kTable1) {
            const auto res = pearson_inference(row.r, n);
            all = all && std::fabs(res.p_value - row.p) < 5e-4 && std::fabs(res.ci_lower - row.lo) < 5e-4 &&
                  std::fabs(res.ci_upper - row.hi) < 5e-4;
        }
        if (all) {
            ++matches;
            EXPECT_EQ(n, kDerivedN);
        }
    }
    EXPECT_EQ(matches, 1);
}

TEST(PearsonInference, ZeroCorrelation) {
    const auto res = pearson_inference(0.0, 19);
    EXPECT_EQ(res.p_value, 1.0);
    EXPECT_NEAR(res.ci_upper, std::tanh(1.959964 / 4.0), 1e-6);
    EXPECT_NEAR(res.ci_lower, -res.ci_upper, 1e-15);
}

TEST(PearsonInference, Contracts) {
    EXPECT_THROW(pearson_inference(1.0, 10), DegenerateInputError);
    EXPECT_THROW(pearson_inference(-1.0, 10), DegenerateInputError);
    EXPECT_THROW(pearson_inference(0.2, 3), ArgumentError);
    EXPECT_THROW(pearson_inference(1.2, 10), ArgumentError);
}

TEST(PearsonInference, IntervalNarrowsWithN) {
    double width = 10.0;
    for (std::size_t n = 4; n < 200; n += 7) {
        const auto res = pearson_inference(0.3, n);
        EXPECT_LT(res.ci_upper - res.ci_lower, width);
        EXPECT_LE(res.ci_lower, 0.3);
        EXPECT_GE(res.ci_upper, 0.3);
        width = res.ci_upper - res.ci_lower;
    }
}

TEST(AdjustedR2, Values) {
    EXPECT_NEAR(adj_r_squared(0.376, 19, 4), 0.198, 1e-3);
    EXPECT_DOUBLE_EQ(adj_r_squared(1.0, 12, 3), 1.0);
    EXPECT_DOUBLE_EQ(adj_r_squared(0.0, 19, 4), 1.0 - 18.0 / 14.0);
    EXPECT_THROW(adj_r_squared(0.5, 5, 4), ArgumentError);
}

TEST(ModelFit, PrintedFStatistic) {
    const double f = (0.376 / 4) / (0.624 / 14);
    EXPECT_NEAR(f, 2.11, 0.01);
    EXPECT_NEAR(f_sf(f, 4, 14), 0.133, 5e-3);
}

TEST(Ols, InterceptOnlyIsMean) {
    const auto res = ols_fit(std::vector<double>{1, 2, 3}, {});
    ASSERT_EQ(res.terms.size(), 1u);
    EXPECT_NEAR(res.terms[0].estimate, 2.0, 1e-15);
    EXPECT_NEAR(res.r_squared, 0.0, 1e-15);
}

TEST(Ols, PerfectFitLeavesInferenceUndefined) {
    const auto res = ols_fit(std::vector<double>{2, 5, 8, 11, 14}, {{"x", {0, 1, 2, 3, 4}}});
    EXPECT_NEAR(res.terms[0].estimate, 2.0, 1e-12);
    EXPECT_NEAR(res.terms[1].estimate, 3.0, 1e-12);
    EXPECT_EQ(res.r_squared, 1.0);
    EXPECT_EQ(res.rss, 0.0);
    EXPECT_FALSE(res.inference_defined());
    EXPECT_FALSE(res.terms[1].std_error);
    EXPECT_FALSE(res.f_stat);
}

TEST(Ols, SingularDesignNamesColumn) {
    try {
        ols_fit(std::vector<double>{1, 3, 2, 5, 4}, {{"a", {1, 2, 3, 4, 5}}, {"twice a", {2, 4, 6, 8, 10}}});
        FAIL();
    } catch (const SingularDesignError& e) {
        EXPECT_EQ(e.column(), "twice a");
    }
    try {
        ols_fit(std::vector<double>{1, 3, 2, 5, 4}, {{"flat", {7, 7, 7, 7, 7}}});
        FAIL();
    } catch (const SingularDesignError& e) {
        EXPECT_EQ(e.column(), "flat");
    }
}

TEST(Ols, NeedsMoreRowsThanParameters) {
    EXPECT_THROW(ols_fit(std::vector<double>{1, 2, 3}, {{"a", {1, 2, 4}}, {"b", {3, 1, 2}}}), InsufficientDataError);
}

TEST(Ols, InvariantsHold) {
    std::mt19937_64 gen(3);
    std::normal_distribution<double> nd;
    const std::size_t n = 30;
    std::vector<double> y(n), a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = nd(gen);
        b[i] = nd(gen);
        y[i] = 1 + 2 * a[i] - b[i] + nd(gen);
    }
    const auto base = ols_fit(y, {{"a", a}, {"b", b}});
    EXPECT_EQ(base.df_model + base.df_resid, n - 1);
    EXPECT_LE(base.adj_r_squared, base.r_squared);
    for (const auto& t : base.terms) EXPECT_NEAR(*t.t_value, t.estimate / *t.std_error, 1e-12);

    // scale one predictor
    std::vector<double> a3(a);
    for (auto& v : a3) v *= 3.0;
    const auto scaled = ols_fit(y, {{"a", a3}, {"b", b}});
    EXPECT_NEAR(scaled.terms[1].estimate, base.terms[1].estimate / 3.0, 1e-9 * std::fabs(base.terms[1].estimate));
    EXPECT_NEAR(*scaled.terms[1].std_error, *base.terms[1].std_error / 3.0, 1e-9 * *base.terms[1].std_error);
    EXPECT_NEAR(*scaled.terms[1].t_value, *base.terms[1].t_value, 1e-9);
    EXPECT_NEAR(scaled.r_squared, base.r_squared, 1e-9);
    EXPECT_NEAR(*scaled.f_stat, *base.f_stat, 1e-9 * *base.f_stat);

    // shift the response
    std::vector<double> y5(y);
    for (auto& v : y5) v += 5.0;
    const auto shifted = ols_fit(y5, {{"a", a}, {"b", b}});
    EXPECT_NEAR(shifted.terms[0].estimate, base.terms[0].estimate + 5.0, 1e-9);
    EXPECT_NEAR(shifted.terms[1].estimate, base.terms[1].estimate, 1e-9);
    EXPECT_NEAR(*shifted.terms[2].std_error, *base.terms[2].std_error, 1e-9);
}

TEST(Ols, SinglePredictorFEqualsTSquared) {
    const auto res = ols_fit(std::vector<double>{3, 1, 4, 1, 5, 9, 2, 6}, {{"x", {1, 2, 3, 4, 5, 6, 7, 8}}});
    const double t = *res.terms[1].t_value;
    EXPECT_NEAR(*res.f_stat, t * t, 1e-9 * t * t);
    EXPECT_NEAR(*res.f_p_value, *res.terms[1].p_value, 1e-12);
}

TEST(Ols, MatchesNormalEquationsOracle) {
    std::mt19937_64 gen(17);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t k = 1 + trial % 5;
        const std::size_t n = k + 3 + (trial * 7) % 40;
        std::vector<std::vector<double>> cols(k, std::vector<double>(n));
        std::vector<NamedColumn> named;
        std::vector<double> y(n);
        for (std::size_t j = 0; j < k; ++j) {
            for (auto& v : cols[j]) v = nd(gen) * (j + 1);
            named.push_back({"c" + std::to_string(j), cols[j]});
        }
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = 0.7 + nd(gen);
            for (std::size_t j = 0; j < k; ++j) y[i] += (0.5 - j * 0.3) * cols[j][i];
        }
        const auto res = ols_fit(y, named);
        const auto ref = oracle::ols_normal_equations(y, cols, true);
        for (std::size_t j = 0; j <= k; ++j) {
            EXPECT_NEAR(res.terms[j].estimate, ref.beta[j], 1e-9 * std::max(1.0, std::fabs(ref.beta[j])));
            EXPECT_NEAR(*res.terms[j].std_error, ref.se[j], 1e-9 * ref.se[j]);
        }
    }
}

TEST(Quantile, TypeSeven) {
    const std::vector<double> v{1, 2, 3, 4, 5};
    EXPECT_EQ(quantile_type7(v, 0.25), 2.0);
    EXPECT_EQ(quantile_type7(v, 0.5), 3.0);
    EXPECT_EQ(quantile_type7(std::vector<double>{1, 2, 3, 4}, 0.5), 2.5);
    EXPECT_THROW(quantile_type7(std::vector<double>{}, 0.5), ArgumentError);
}
