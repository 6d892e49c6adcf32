#include "odaa/errors.hpp"
#include "odaa/gaussian.hpp"
#include "odaa/reachability.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <memory>

using namespace odaa;
using namespace odaa::testing;

namespace {

std::shared_ptr<const StateGrid> grid(double lo, double hi, int n) { return std::make_shared<StateGrid>(lo, hi, n); }

// Density of z = x (1 + u^T w).
double z_density(const MixtureModel& mm, const Eigen::VectorXd& u, double x, double z) {
    const UnivariateMixture um = project(mm, u);
    return um.pdf(z / x - 1.0) / x;
}

// Simpson over every grid segment inside [a, b], J linear on each.
double quadrature(const ValueFunction& vf, const MixtureModel& mm, const Eigen::VectorXd& u, double x, double a,
                  double b) {
    double total = 0.0;
    const auto& nodes = vf.grid->nodes();
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
        const double lo = std::max(a, nodes[i]), hi = std::min(b, nodes[i + 1]);
        if (hi <= lo) continue;
        const int n = 200;
        const double h = (hi - lo) / n;
        auto f = [&](double z) { return vf(z) * z_density(mm, u, x, z); };
        double s = f(lo) + f(hi);
        for (int k = 1; k < n; ++k) s += (k % 2 ? 4 : 2) * f(lo + k * h);
        total += s * h / 3;
    }
    return total;
}

SolverConfig quick(int n) {
    SolverConfig cfg;
    cfg.grid_size = n;
    cfg.grid_lo = 0.6;
    cfg.grid_hi = 1.8;
    return cfg;
}

}  // namespace

TEST(Grid, LogUniformNodes) {
    const StateGrid g(0.5, 2.0, 201);
    EXPECT_DOUBLE_EQ(g.lo(), 0.5);
    EXPECT_NEAR(g.hi(), 2.0, 1e-14);
    EXPECT_NEAR(g.log_step(), std::log(4.0) / 200, 1e-15);
    for (int i = 1; i < g.size(); ++i) EXPECT_NEAR(std::log(g.node(i) / g.node(i - 1)), g.log_step(), 1e-12);
    EXPECT_EQ(g.nearest(1.0), 100);
    EXPECT_EQ(g.nearest(0.1), 0);
    EXPECT_EQ(g.nearest(9.0), 200);
    EXPECT_EQ(g.segment(0.4), -1);
    EXPECT_EQ(g.segment(2.5), 200);
    EXPECT_EQ(g.segment(g.node(37) * 1.0000001), 37);
    const StateGrid s = g.scaled(1.1);
    EXPECT_EQ(s.size(), g.size());
    EXPECT_NEAR(s.node(50), 1.1 * g.node(50), 1e-14);
    EXPECT_THROW(StateGrid(1.0, 0.5, 10), InputError);
}

TEST(ValueFunctionTest, TerminalIndicatorAndInterpolation) {
    const auto g = grid(0.5, 2.0, 201);
    const ValueFunction vf = terminal_values(g, {1.1, kInfinity});
    for (int i = 0; i < g->size(); ++i) EXPECT_EQ(vf.values[i], g->node(i) >= 1.1 ? 1.0 : 0.0);
    EXPECT_EQ(vf(0.1), 0.0);
    EXPECT_EQ(vf(5.0), 1.0);
    const int i = g->segment(1.1);
    const double mid = std::sqrt(g->node(i) * g->node(i + 1));
    const double t = (mid - g->node(i)) / (g->node(i + 1) - g->node(i));
    EXPECT_NEAR(vf(mid), t, 1e-12);
}

TEST(StageValue, IndicatorMatchesGaussianTail) {
    const MixtureModel mm = case_study_model();
    const auto g = grid(0.4, 2.5, 1200);
    const Interval target{1.1449, kInfinity};
    const ValueFunction vf = terminal_values(g, target);
    for (const Eigen::Vector3d u : {Eigen::Vector3d(0, 0.3, 0.7), Eigen::Vector3d(0.2, 0.2, 0.6),
                                    Eigen::Vector3d(0, 0, 1)}) {
        for (double x : {1.10, 1.13, 1.1449, 1.16}) {
            EXPECT_NEAR(stage_value(x, u, vf, target, mm), one_period_tail(mm, u, x, 1.1449), 1e-4)
                << x << " " << u.transpose();
        }
    }
}

TEST(StageValue, GeneralValueFunctionMatchesQuadrature) {
    const MixtureModel mm = case_study_model();
    const auto g = grid(0.6, 1.8, 400);
    ValueFunction vf{1, g, {}};
    for (double x : g->nodes()) vf.values.push_back(std::clamp(0.5 + std::atan(20 * (x - 1.05)) / M_PI, 0.0, 1.0));
    const Interval target{g->node(150), g->node(260)};
    const Eigen::Vector3d u(0.1, 0.4, 0.5);
    for (double x : {0.95, 1.0, 1.05, 1.2}) {
        const double want = quadrature(vf, mm, u, x, target.lower, target.upper);
        EXPECT_NEAR(stage_value(x, u, vf, target, mm), want, 1e-8) << x;
    }
}

TEST(StageValue, RisklessAllocationIsAPointMass) {
    Eigen::Vector2d m(0.01, 0.02);
    Eigen::Matrix2d c;
    c << 0, 0, 0, 1e-4;
    const MixtureModel mm({1.0}, {{m, c}});
    const auto g = grid(0.5, 2.0, 301);
    const ValueFunction vf = terminal_values(g, {1.0, kInfinity});
    EXPECT_DOUBLE_EQ(stage_value(1.0, Eigen::Vector2d(1, 0), vf, {1.0, kInfinity}, mm), 1.0);
    EXPECT_DOUBLE_EQ(stage_value(0.98, Eigen::Vector2d(1, 0), vf, {1.0, kInfinity}, mm), 0.0);
}

TEST(NodeSearch, NoLatticePointBeatsTheOptimum) {
    const MixtureModel mm = case_study_model();
    ConstraintSet cs;
    cs.sigma_max = case_study_sigma_max();
    const auto g = grid(0.4, 2.5, 1200);
    const Interval target{1.1449, kInfinity};
    const ValueFunction vf = terminal_values(g, target);
    const AllocationLattice lat(cs, mm.covariance(), 1000);
    const auto pts = lat.grid(10);
    for (double x : {1.08, 1.12, 1.14}) {
        const NodeOptimum opt = optimize_stage_node(x, vf, target, cs, mm, SolverConfig{});
        EXPECT_TRUE(cs.admits(opt.allocation, mm.covariance()));
        EXPECT_NEAR(opt.value, stage_value(x, opt.allocation, vf, target, mm), 1e-12);
        for (const auto& k : pts) {
            EXPECT_GE(opt.value, stage_value(x, lat.weights(k), vf, target, mm) - 1e-3) << x;
        }
    }
}

TEST(Solve, DeterministicSingleAsset) {
    const MixtureModel mm({1.0}, {{Eigen::VectorXd::Constant(1, 0.01), Eigen::MatrixXd::Zero(1, 1)}});
    EXPECT_DOUBLE_EQ(solve(TargetSequence::terminal_goal(2, 1.015), ConstraintSet{}, mm, 1.0, quick(300)).p_star,
                     1.0);
    EXPECT_DOUBLE_EQ(solve(TargetSequence::terminal_goal(2, 1.03), ConstraintSet{}, mm, 1.0, quick(300)).p_star,
                     0.0);
}

TEST(Solve, OnePeriodMatchesClosedFormLattice) {
    const SuiteOutcome s = one_period_oracle_suite(6, 42, 1e-3);
    EXPECT_EQ(s.failures, 0) << s.first_failure;
}

TEST(Solve, KernelValuesMatchDirectIntegration) {
    const MixtureModel mm = case_study_model();
    ConstraintSet cs;
    cs.sigma_max = case_study_sigma_max();
    const TargetSequence ts = TargetSequence::terminal_goal(3, 1.03);
    const SolveResult r = solve(ts, cs, mm, 1.0, quick(240));
    ASSERT_EQ(r.values.size(), 4u);
    for (int k = 0; k < 3; ++k) {
        const auto& alloc = r.policy.allocations[static_cast<std::size_t>(k)];
        const auto& g = *r.policy.grids[static_cast<std::size_t>(k)];
        for (int i = 0; i < g.size(); i += 7) {
            const double direct = stage_value(g.node(i), alloc.row(i).transpose(), r.values[k + 1], ts.at(k + 1), mm);
            EXPECT_NEAR(r.values[k].values[i], direct, 1e-9) << k << " " << i;
        }
    }
    EXPECT_NEAR(r.p_star, r.values[0](1.0), 1e-12);
}

// Steps far narrower than a cell: after many periods the log wealth is close to
// Gaussian, and the value function must not smear across cells.
TEST(Solve, NarrowStepsDoNotDiffuse) {
    const double m = 0.002, sd = 0.001;
    const int n = 100;
    const MixtureModel mm({1.0}, {{Eigen::VectorXd::Constant(1, m), Eigen::MatrixXd::Constant(1, 1, sd * sd)}});
    const double l = std::pow(1.0 + m, n);
    const SolveResult r = solve(TargetSequence::terminal_goal(n, l), ConstraintSet{}, mm, 1.0, quick(240));
    const double lm = std::log1p(m) - 0.5 * sd * sd / ((1.0 + m) * (1.0 + m));
    const double ls = sd / (1.0 + m) * std::sqrt(static_cast<double>(n));
    const auto& g = *r.values[0].grid;
    ASSERT_LT(sd, 0.5 * g.log_step());
    for (int i = 0; i < g.size(); ++i) {
        const double exact = gaussian::sf((std::log(l / g.node(i)) - n * lm) / ls);
        EXPECT_NEAR(r.values[0].values[static_cast<std::size_t>(i)], exact, 0.01) << g.node(i);
    }
}

TEST(Solve, IntermediateTargetsOnlyLowerSuccess) {
    const MixtureModel mm = case_study_model();
    TargetSequence loose = TargetSequence::terminal_goal(4, 1.02);
    TargetSequence tight = loose;
    tight.sets[2] = {0.99, kInfinity};
    const double a = solve(loose, ConstraintSet{}, mm, 1.0, quick(240)).p_star;
    const double b = solve(tight, ConstraintSet{}, mm, 1.0, quick(240)).p_star;
    EXPECT_LE(b, a + 1e-12);
}

TEST(Solve, InfeasibleRiskCapWithoutSafeAsset) {
    Eigen::Matrix2d c;
    c << 1e-4, 0, 0, 4e-4;
    const MixtureModel mm({1.0}, {{Eigen::Vector2d(0.001, 0.002), c}});
    ConstraintSet cs;
    cs.sigma_max = 0.001;
    EXPECT_THROW((void)solve(TargetSequence::terminal_goal(2, 1.0), cs, mm, 1.0, quick(200)), InfeasibleError);
}

TEST(Solve, RejectsBadInput) {
    const MixtureModel mm = case_study_model();
    EXPECT_THROW((void)solve(TargetSequence::terminal_goal(2, 1.0), ConstraintSet{}, mm, 0.0, quick(200)), InputError);
    SolverConfig bad = quick(200);
    bad.grid_size = 1;
    EXPECT_THROW((void)solve(TargetSequence::terminal_goal(2, 1.0), ConstraintSet{}, mm, 1.0, bad), InputError);
}

TEST(Solve, GridRefinementIsStable) {
    const MixtureModel mm = case_study_model();
    ConstraintSet cs;
    cs.sigma_max = case_study_sigma_max();
    const TargetSequence ts = TargetSequence::terminal_goal(8, 1.02);
    const double coarse = solve(ts, cs, mm, 1.0, quick(1200)).p_star;
    const double fine = solve(ts, cs, mm, 1.0, quick(2400)).p_star;
    EXPECT_LT(std::abs(coarse - fine), 0.005);
}

TEST(Solve, ThreadsDoNotChangeTheResult) {
    const MixtureModel mm = case_study_model();
    const TargetSequence ts = TargetSequence::terminal_goal(3, 1.01);
    SolverConfig one = quick(150);
    SolverConfig four = one;
    four.threads = 4;
    const SolveResult a = solve(ts, ConstraintSet{}, mm, 1.0, one);
    const SolveResult b = solve(ts, ConstraintSet{}, mm, 1.0, four);
    EXPECT_EQ(a.p_star, b.p_star);
    for (std::size_t k = 0; k < a.policy.allocations.size(); ++k) {
        EXPECT_EQ(a.policy.allocations[k], b.policy.allocations[k]);
    }
}

TEST(Policy, QueryUsesNearestNodeAndFlagsClamping) {
    const MixtureModel mm = case_study_model();
    const SolveResult r = solve(TargetSequence::terminal_goal(2, 1.01), ConstraintSet{}, mm, 1.0, quick(200));
    const auto& g = *r.policy.grids[1];
    const PolicyQuery q = query_policy(r.policy, 1, g.node(40) * 1.0001);
    EXPECT_EQ(q.node, 40);
    EXPECT_FALSE(q.clamped);
    EXPECT_EQ(q.allocation, r.policy.allocations[1].row(40).transpose());
    EXPECT_TRUE(query_policy(r.policy, 1, 100.0).clamped);
    EXPECT_THROW((void)query_policy(r.policy, 2, 1.0), InputError);
}

TEST(Risk, VarConversion) {
    EXPECT_NEAR(var_to_sigma_max(0.07, 1.0, 2.3263), 0.07 * std::sqrt(12.0) / 2.3263, 1e-15);
    EXPECT_NEAR(var_to_sigma_max(0.07, 1.0, 2.3263), 0.10424, 1e-5);
    EXPECT_NEAR(per_period_sigma(0.10424, 52), 0.10424 / std::sqrt(52.0), 1e-15);
    EXPECT_NEAR(case_study_sigma_max(), 0.014455, 1e-6);
}
