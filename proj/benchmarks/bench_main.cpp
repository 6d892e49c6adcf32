#include "odaa/reachability.hpp"
#include "odaa/serialization.hpp"
#include "odaa/simulation.hpp"

#include <benchmark/benchmark.h>

#include <memory>

using namespace odaa;

namespace {

const MixtureModel& model() {
    static const MixtureModel mm = load_mixture(std::filesystem::path(ODAA_DATA_DIR) / "case_study_mmgm.json");
    return mm;
}

ConstraintSet capped() {
    ConstraintSet cs;
    cs.sigma_max = per_period_sigma(var_to_sigma_max(0.07, 1.0, 2.3263), 52);
    return cs;
}

}  // namespace

// Closed-form one-step integral at a single state.
static void BM_StageValue(benchmark::State& state) {
    const auto grid = std::make_shared<StateGrid>(0.4, 2.5, static_cast<int>(state.range(0)));
    const Interval goal{1.1449, kInfinity};
    const ValueFunction next = terminal_values(grid, goal);
    const Eigen::Vector3d u(0.0, 0.3, 0.7);
    for (auto _ : state) benchmark::DoNotOptimize(stage_value(1.12, u, next, goal, model()));
}
BENCHMARK(BM_StageValue)->Arg(600)->Arg(1200)->Arg(2400);

// Coarse lattice plus two refinement rounds at one node.
static void BM_NodeSearch(benchmark::State& state) {
    const auto grid = std::make_shared<StateGrid>(0.4, 2.5, 1200);
    const Interval goal{1.1449, kInfinity};
    const ValueFunction next = terminal_values(grid, goal);
    const ConstraintSet cs = capped();
    const SolverConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(optimize_stage_node(1.12, next, goal, cs, model(), cfg));
}
BENCHMARK(BM_NodeSearch)->Unit(benchmark::kMillisecond);

// Full backward recursion over a short horizon.
static void BM_Solve(benchmark::State& state) {
    const auto ts = TargetSequence::terminal_goal(static_cast<int>(state.range(0)), 1.02);
    SolverConfig cfg;
    cfg.grid_size = 400;
    cfg.grid_lo = 0.6;
    cfg.grid_hi = 1.8;
    for (auto _ : state) benchmark::DoNotOptimize(solve(ts, capped(), model(), 1.0, cfg).p_star);
}
BENCHMARK(BM_Solve)->Arg(2)->Arg(8)->Unit(benchmark::kMillisecond);

// Constant-mix paths over the case-study horizon.
static void BM_SimulateStatic(benchmark::State& state) {
    const auto ts = TargetSequence::terminal_goal(104, 1.1449);
    SimulationConfig cfg;
    cfg.n_paths = state.range(0);
    const Eigen::Vector3d u(0.0, 0.3, 0.7);
    for (auto _ : state) benchmark::DoNotOptimize(simulate(u, model(), ts, 1.0, cfg).probability);
    state.SetItemsProcessed(state.iterations() * state.range(0) * 104);
}
BENCHMARK(BM_SimulateStatic)->Arg(10000)->Unit(benchmark::kMillisecond);

// Paths driven by a solved policy map.
static void BM_SimulatePolicy(benchmark::State& state) {
    const auto ts = TargetSequence::terminal_goal(26, 1.03);
    SolverConfig sc;
    sc.grid_size = 300;
    sc.grid_lo = 0.6;
    sc.grid_hi = 1.8;
    const SolveResult r = solve(ts, capped(), model(), 1.0, sc);
    SimulationConfig cfg;
    cfg.n_paths = state.range(0);
    for (auto _ : state) benchmark::DoNotOptimize(simulate(r.policy, model(), ts, 1.0, cfg).probability);
    state.SetItemsProcessed(state.iterations() * state.range(0) * 26);
}
BENCHMARK(BM_SimulatePolicy)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
