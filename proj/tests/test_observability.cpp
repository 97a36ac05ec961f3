#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>

#include "kolmo/observability.hpp"

using namespace kolmo;

namespace {

ObservationSetup heat_setup(int cells, double dt) {
    ObservationSetup s;
    s.profile = QProfile::linear(1.0, 1.0);
    s.T = 1.0;
    s.tau1 = 0.1;
    s.tau2 = 1.0;
    s.grid = Grid1D::uniform(-1.0, 1.0, cells);
    s.dt = dt;
    return s;
}

ObservationSetup short_window(const QProfile& p, long n, double dt) {
    ObservationSetup s;
    s.profile = p;
    s.T = 0.05;
    s.tau1 = 0.01;
    s.tau2 = 0.05;
    s.grid = observability_grid(p, n);
    s.dt = dt;
    return s;
}

}  // namespace

TEST(WindowWeights, AlignedNodesGiveTrapezoid) {
    rvec t{0.0, 0.1, 0.2, 0.3, 0.4};
    auto w = window_weights(t, 0.1, 0.3);
    EXPECT_DOUBLE_EQ(w[0], 0.0);
    EXPECT_NEAR(w[1], 0.05, 1e-15);
    EXPECT_NEAR(w[2], 0.1, 1e-15);
    EXPECT_NEAR(w[3], 0.05, 1e-15);
    EXPECT_DOUBLE_EQ(w[4], 0.0);
}

TEST(WindowWeights, ClippedWindowIntegratesLinearFunctionsExactly) {
    rvec t;
    for (int k = 0; k <= 10; ++k) t.push_back(0.1 * k);
    auto w = window_weights(t, 0.137, 0.812);
    double one = 0.0, lin = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) {
        one += w[k];
        lin += w[k] * (2.0 * t[k] + 1.0);
    }
    EXPECT_NEAR(one, 0.812 - 0.137, 1e-14);
    EXPECT_NEAR(lin, (0.812 * 0.812 + 0.812) - (0.137 * 0.137 + 0.137), 1e-14);
}

TEST(ObservabilityConstant, HeatModeConvergesUnderHalving) {
    auto a = observability_constant(heat_setup(50, 1e-2), 0);
    auto b = observability_constant(heat_setup(100, 5e-3), 0);
    EXPECT_TRUE(std::isfinite(a.constant));
    EXPECT_GT(a.constant, 0.0);
    EXPECT_LT(std::abs(b.constant / a.constant - 1.0), 0.2);
    RecordProperty("heat_constant", fmt(b.constant));
}

TEST(ObservabilityConstant, EigenfunctionQuotientIsLowerBound) {
    for (long n : {0L, 25L, 100L}) {
        ObservationSetup s = heat_setup(80, 2e-3);
        s.T = 0.3;
        s.tau1 = 0.05;
        s.tau2 = 0.3;
        auto maps = observation_maps(s, n);
        auto c = observability_constant(maps);
        auto pair = smallest_real_eigenpair(assemble_kn(s.profile, n, s.grid));
        EXPECT_LE(observation_quotient(maps, pair.vector), c.constant * (1 + 1e-8)) << n;
        // the maximizer attains the constant
        EXPECT_NEAR(observation_quotient(maps, c.maximizer), c.constant, 1e-6 * c.constant) << n;
    }
}

TEST(ObservabilityConstant, RegularizationSweepIsMonotone) {
    ObservationSetup s = heat_setup(60, 5e-3);
    s.T = 0.5;
    s.tau1 = 0.1;
    s.tau2 = 0.5;
    auto maps = observation_maps(s, 25);
    double prev = 0.0;
    for (double rel : {1e-10, 1e-12, 1e-14}) {
        auto c = observability_constant(maps, rel);
        EXPECT_GE(c.constant, prev * (1 - 1e-9)) << rel;
        prev = c.constant;
    }
    EXPECT_THROW(observability_constant(maps, 0.0), ValidationError);
}

TEST(ObservabilityConstant, ConjugateModesAgree) {
    ObservationSetup s = heat_setup(60, 5e-3);
    s.T = 0.4;
    s.tau1 = 0.1;
    s.tau2 = 0.4;
    const double a = observability_constant(s, 49).constant, b = observability_constant(s, -49).constant;
    EXPECT_NEAR(a, b, 1e-6 * a);
}

TEST(ObservabilityConstant, EigenRatioBelowFullWindowConstant) {
    const auto p = QProfile::linear(1.0, 1.0);
    for (long n : {25L, 100L}) {
        ObservationSetup s;
        s.profile = p;
        s.T = 0.3;
        s.tau1 = 0.0;
        s.tau2 = 0.3;
        s.grid = observability_grid(p, n);
        s.dt = 1e-3;
        const double c = observability_constant(s, n).constant;
        const double r = eigenfunction_ratio(p, n, 0.3).ratio();
        EXPECT_LE(r, 1.1 * c) << n;
    }
}

TEST(ObservabilityConstant, ThreadsDoNotChangeMaps) {
    ObservationSetup s = heat_setup(40, 1e-2);
    auto a = observation_maps(s, 9, 1), b = observation_maps(s, 9, 4);
    EXPECT_EQ((a.final_gram - b.final_gram).norm(), 0.0);
    EXPECT_EQ((a.flux_gram - b.flux_gram).norm(), 0.0);
}

TEST(ObservabilityConstant, InputValidation) {
    ObservationSetup s = heat_setup(40, 1e-2);
    s.tau1 = 0.5;
    s.tau2 = 0.4;
    EXPECT_THROW(observation_maps(s, 1), ValidationError);
    s = heat_setup(402, 1e-2);
    EXPECT_THROW(observation_maps(s, 1), ValidationError);
    s = heat_setup(40, 1e-2);
    s.tau2 = 1.5;
    EXPECT_THROW(observation_maps(s, 1), ValidationError);
}

TEST(ObservabilityGrid, ResolutionRuleAndCap) {
    const auto p = QProfile::linear(1.0, 1.0);
    bool capped = true;
    auto g = observability_grid(p, 400, &capped);
    EXPECT_FALSE(capped);
    EXPECT_LE(g.h, 1.0 / (5.0 * 20.0) + 1e-15);
    auto big = observability_grid(QProfile::linear(1.0, 2.0), 1600, &capped);
    EXPECT_TRUE(capped);
    EXPECT_EQ(big.interior(), max_observation_dim);
}

TEST(EigenRatio, HeatClosedForm) {
    // n = 0 on [-pi/2, pi/2]: lambda = 1, psi = sqrt(2/pi) cos y, flux^2 = 4/pi
    const auto p = QProfile::linear(pi / 2, pi / 2);
    for (double T : {0.1, 1.0, 3.0}) {
        auto r = eigenfunction_ratio(p, 0, T, 400.0);
        const double expect = 2.0 * std::exp(-2.0 * T) / ((1.0 - std::exp(-2.0 * T)) * 4.0 / pi);
        EXPECT_NEAR(r.ratio(), expect, 1e-4 * expect) << T;
    }
}

TEST(EigenRatio, LongTimeLimitVanishes) {
    const auto p = QProfile::linear(1.0, 1.0);
    auto pair = ratio_eigenpair(p, 100);
    double prev = 1e300;
    for (double T : {1.0, 10.0, 100.0}) {
        const double r = eigen_ratio_from_pair(pair, T).ratio();
        EXPECT_LT(r, prev);
        prev = r;
    }
    EXPECT_LT(prev, 1e-100);
    EXPECT_THROW(eigen_ratio_from_pair(pair, 0.0), ValidationError);
}

TEST(EigenRatio, BeyondUpperTimeSlopeIsSmallOrNegative) {
    const auto p = QProfile::linear(1.0, 1.0);
    rvec x, y;
    for (long n : {100L, 400L, 900L, 1600L}) {
        x.push_back(std::sqrt(double(n)));
        y.push_back(eigenfunction_ratio(p, n, 0.75).log_ratio);
    }
    EXPECT_LT(fit_line(x, y).slope, 0.1);
}

TEST(Classify, ThresholdsAndTieRule) {
    EXPECT_EQ(classify(0.2, {0.0, 1.0}), Verdict::blow_up);
    EXPECT_EQ(classify(-0.2, {0.0, -1.0}), Verdict::bounded);
    EXPECT_EQ(classify(0.01, {-3.0, -3.5, -3.1}), Verdict::bounded);
    EXPECT_EQ(classify(0.01, {-3.7, -4.0, -3.6}), Verdict::inconclusive);
}

TEST(CriticalTime, SymmetricTransitionContainsHalf) {
    auto r = critical_time_scan(QProfile::linear(1.0, 1.0), {0.3, 0.4, 0.45, 0.55, 0.6, 0.7}, {100, 400, 900, 1600}, 4);
    ASSERT_TRUE(r.has_transition);
    EXPECT_TRUE(r.monotone);
    EXPECT_GE(r.transition_lo, 0.4);
    EXPECT_LE(r.transition_hi, 0.6);
    EXPECT_LE(r.transition_lo, 0.5);
    EXPECT_GE(r.transition_hi, 0.5);
    EXPECT_TRUE(r.intersects_bracket);
}

TEST(CriticalTime, AsymmetricOutsideBracket) {
    auto r = critical_time_scan(QProfile::linear(1.0, 2.0), {0.3, 0.4, 1.0, 2.25, 2.5}, {100, 400, 900, 1600}, 4);
    EXPECT_DOUBLE_EQ(r.bracket.t_min, 0.5);
    EXPECT_DOUBLE_EQ(r.bracket.t_max, 2.0);
    for (const auto& v : r.verdicts) {
        if (v.T < 0.5) EXPECT_EQ(v.verdict, Verdict::blow_up) << v.T;
        if (v.T > 2.0) EXPECT_EQ(v.verdict, Verdict::bounded) << v.T;
    }
    EXPECT_TRUE(r.monotone);
}

TEST(CriticalTime, SingleTimeClaimsNoTransition) {
    auto r = critical_time_scan(QProfile::linear(1.0, 1.0), {0.5}, {100, 400});
    EXPECT_EQ(r.verdicts.size(), 1u);
    EXPECT_FALSE(r.has_transition);
    EXPECT_THROW(critical_time_scan(QProfile::linear(1.0, 1.0), {}, {100, 400}), ValidationError);
}

TEST(CriticalTime, ReportJsonAndCsv) {
    auto r = critical_time_scan(QProfile::linear(1.0, 1.0), {0.3, 0.7}, {100, 400});
    auto j = to_json(r);
    EXPECT_EQ(j["verdicts"].size(), 2u);
    EXPECT_EQ(j["modes"].size(), 2u);
    write_scan_csv("scan_test.csv", r);
    std::ifstream f("scan_test.csv");
    std::string line;
    std::getline(f, line);
    EXPECT_EQ(line, "T,n,C_n,log_r_n,slope,verdict");
    int rows = 0;
    while (std::getline(f, line)) ++rows;
    EXPECT_EQ(rows, 4);
    std::remove("scan_test.csv");
}

TEST(CostLaw, RejectsShortModeList) {
    auto s = short_window(QProfile::linear(1.0, 1.0), 25, 1e-4);
    EXPECT_THROW(cost_law_fit(s, {25}, 1e-4), ValidationError);
    EXPECT_THROW(cost_law_fit(s, {100, 25, 225, 400}, 1e-4), ValidationError);
}

TEST(CostLaw, DeskScaleSlopeWithinBand) {
    const auto p = QProfile::linear(1.0, 1.0);
    auto f = cost_law_fit(short_window(p, 25, 5e-5), {25, 100, 225, 400}, 5e-5, 4);
    RecordProperty("kappa_hat", fmt(f.kappa_hat));
    EXPECT_TRUE(f.within_bound);
    const double mid = 0.5 / std::sqrt(2.0);
    EXPECT_GE(f.kappa_hat, 0.5 * mid);
    EXPECT_LE(f.kappa_hat, 1.5 * mid);
}

TEST(CostLaw, SlopeGrowsWithUpperTime) {
    auto a = cost_law_fit(short_window(QProfile::linear(1.0, 1.0), 25, 5e-5), {25, 100, 225, 400}, 5e-5, 4);
    auto b = cost_law_fit(short_window(QProfile::linear(1.0, 2.0), 25, 5e-5), {25, 100, 225, 400}, 5e-5, 4);
    RecordProperty("kappa_hat_l1", fmt(a.kappa_hat));
    RecordProperty("kappa_hat_l2", fmt(b.kappa_hat));
    EXPECT_GT(b.kappa_hat, a.kappa_hat);
}
