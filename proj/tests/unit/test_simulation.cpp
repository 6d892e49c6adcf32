#include "odaa/econometrics.hpp"
#include "odaa/errors.hpp"
#include "odaa/simulation.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace odaa;
using namespace odaa::testing;

namespace {

SimulationConfig paths(long n, std::uint64_t seed = 7) {
    SimulationConfig cfg;
    cfg.n_paths = n;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST(Simulation, RisklessAllocationAlwaysSucceeds) {
    const MixtureModel mm = case_study_model();
    const auto ts = TargetSequence::terminal_goal(52, 1.02);
    const SimulationResult r = simulate(Eigen::Vector3d(1, 0, 0), mm, ts, 1.0, paths(2000));
    EXPECT_EQ(r.success_count, 2000);
    EXPECT_DOUBLE_EQ(r.standard_error, 0.0);
}

TEST(Simulation, OnePeriodMatchesClosedForm) {
    const MixtureModel mm = case_study_model();
    const Eigen::Vector3d u(0.1, 0.3, 0.6);
    const auto ts = TargetSequence::terminal_goal(1, 1.01);
    const SimulationResult r = simulate(u, mm, ts, 1.0, paths(400000));
    const double p = one_period_tail(mm, u, 1.0, 1.01);
    EXPECT_NEAR(r.probability, p, 4 * std::sqrt(p * (1 - p) / 4e5));
    EXPECT_NEAR(r.standard_error, std::sqrt(r.probability * (1 - r.probability) / 4e5), 1e-15);
}

TEST(Simulation, ConstantMixCompoundsExpectedGrowth) {
    const MixtureModel mm = case_study_model();
    const Eigen::Vector3d u(0.2, 0.3, 0.5);
    SimulationConfig cfg = paths(200000);
    cfg.histogram_bins = 4000;
    cfg.histogram_range = std::make_pair(0.5, 2.0);
    const SimulationResult r = simulate(u, mm, TargetSequence::terminal_goal(26, 0.0), 1.0, cfg);
    double mean = 0.0;
    long total = 0;
    for (std::size_t b = 0; b < r.histogram.counts.size(); ++b) {
        mean += r.histogram.counts[b] * 0.5 * (r.histogram.edges[b] + r.histogram.edges[b + 1]);
        total += r.histogram.counts[b];
    }
    EXPECT_EQ(total, 200000);
    EXPECT_NEAR(mean / total, std::pow(1.0 + u.dot(mm.mean()), 26), 2e-3);
}

TEST(Simulation, SingleAssetModesAgree) {
    const MixtureModel mm({1.0}, {{Eigen::VectorXd::Constant(1, 0.001), Eigen::MatrixXd::Constant(1, 1, 4e-4)}});
    const auto ts = TargetSequence::terminal_goal(20, 1.01);
    const Eigen::VectorXd u = Eigen::VectorXd::Ones(1);
    const SimulationResult a = simulate(u, mm, ts, 1.0, paths(50000), StaticMode::kConstantMix);
    const SimulationResult b = simulate(u, mm, ts, 1.0, paths(50000), StaticMode::kBuyAndHold);
    EXPECT_NEAR(a.probability, b.probability, 5 * std::hypot(a.standard_error, b.standard_error));
}

TEST(Simulation, IsDeterministicAcrossThreadCounts) {
    const SuiteOutcome s = thread_determinism_suite(2, 99);
    EXPECT_EQ(s.failures, 0) << s.first_failure;
}

TEST(Simulation, SeedChangesTheSample) {
    const MixtureModel mm = case_study_model();
    const auto ts = TargetSequence::terminal_goal(10, 1.01);
    const Eigen::Vector3d u(0, 0.3, 0.7);
    const auto a = simulate(u, mm, ts, 1.0, paths(20000, 1));
    const auto b = simulate(u, mm, ts, 1.0, paths(20000, 1));
    const auto c = simulate(u, mm, ts, 1.0, paths(20000, 2));
    EXPECT_EQ(a.success_count, b.success_count);
    EXPECT_NE(a.histogram.counts, c.histogram.counts);
    EXPECT_NE(path_seed(1, 0), path_seed(1, 1));
    EXPECT_NE(path_seed(1, 0), path_seed(2, 0));
}

TEST(Simulation, TighterIntermediateTargetsNeverHelp) {
    const MixtureModel mm = case_study_model();
    TargetSequence loose = TargetSequence::terminal_goal(12, 1.0);
    TargetSequence tight = loose;
    for (int k = 1; k < 12; ++k) tight.sets[static_cast<std::size_t>(k)] = {0.99, kInfinity};
    const Eigen::Vector3d u(0, 0.2, 0.8);
    const auto a = simulate(u, mm, loose, 1.0, paths(50000));
    const auto b = simulate(u, mm, tight, 1.0, paths(50000));
    EXPECT_LE(b.success_count, a.success_count);
}

TEST(Simulation, DynamicPolicyMassAboveGoalEqualsSuccess) {
    const MixtureModel mm = case_study_model();
    const auto ts = TargetSequence::terminal_goal(6, 1.01);
    SolverConfig sc;
    sc.grid_size = 200;
    sc.grid_lo = 0.7;
    sc.grid_hi = 1.5;
    const SolveResult r = solve(ts, ConstraintSet{}, mm, 1.0, sc);
    SimulationConfig cfg = paths(100000);
    cfg.histogram_bins = 2;
    cfg.histogram_range = std::make_pair(1.01 - 0.5, 1.01 + 0.5);
    const SimulationResult s = simulate(r.policy, mm, ts, 1.0, cfg);
    EXPECT_EQ(s.histogram.counts[1], s.success_count);
    EXPECT_NEAR(s.probability, r.p_star, 0.02);
}

TEST(Simulation, RejectsMismatchedInput) {
    const MixtureModel mm = case_study_model();
    const auto ts = TargetSequence::terminal_goal(2, 1.0);
    EXPECT_THROW((void)simulate(Eigen::Vector2d(0.5, 0.5), mm, ts, 1.0, paths(10)), InputError);
    EXPECT_THROW((void)simulate(Eigen::Vector3d(1, 0, 0), mm, ts, 1.0, paths(0)), InputError);
}

TEST(Simulation, IntervalIsClipped) {
    SimulationResult r;
    r.probability = 0.99;
    r.standard_error = 0.01;
    const auto [lo, hi] = r.interval();
    EXPECT_NEAR(lo, 0.99 - 1.959963984540054 * 0.01, 1e-15);
    EXPECT_DOUBLE_EQ(hi, 1.0);
}

TEST(HistogramTest, EqualBinsAndEdgeClamping) {
    std::vector<double> v(100);
    std::iota(v.begin(), v.end(), 1.0);
    const Histogram h = histogram(v, 10, 0.5, 100.5);
    ASSERT_EQ(h.edges.size(), 11u);
    for (long c : h.counts) EXPECT_EQ(c, 10);
    const Histogram e = histogram({-5.0, 0.2, 0.7, 3.0}, 2, 0.0, 1.0);
    EXPECT_EQ(e.counts[0], 2);
    EXPECT_EQ(e.counts[1], 2);
    EXPECT_THROW((void)histogram({2.0}, 3, 2.0, 2.0), InputError);
}

TEST(Synthetic, ColumnsHaveTheirTheoreticalShape) {
    const ReturnSeries rs = synthetic_three_asset(400000, 0.03, 5);
    ASSERT_EQ(rs.assets(), 3);
    const MomentSummary ms = compute_moments(rs);
    const double sk[3] = {2.0, -2.0, 0.0};
    const double ku[3] = {9.0, 9.0, 3.0};
    for (Eigen::Index j = 0; j < 3; ++j) {
        EXPECT_NEAR(ms.er(j), 0.03, 5 * 0.03 / std::sqrt(4e5)) << j;
        EXPECT_NEAR(ms.sd(j), 0.03, 0.03 * 0.01) << j;
        EXPECT_NEAR(ms.sk(j), sk[j], 0.1) << j;
        EXPECT_NEAR(ms.ku(j), ku[j], 0.8) << j;
    }
    EXPECT_NEAR(ms.corr(0, 1), 0.0, 0.01);
    EXPECT_EQ(classify_region(ms.sk(0), ms.ku(0), 0.95, 400000).region, 3);
    EXPECT_EQ(classify_region(ms.sk(1), ms.ku(1), 0.95, 400000).region, 1);
}
