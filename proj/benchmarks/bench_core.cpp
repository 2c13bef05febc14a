#include <cascade/certify.hpp>
#include <cascade/chainrec.hpp>
#include <cascade/dynamics.hpp>
#include <cascade/expression.hpp>
#include <cascade/flow.hpp>

#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

using namespace cascade;

namespace {

const SpaceSpec kTS1({FactorKind::Circle, FactorKind::Line});

SystemDef pendulum() {
    return SystemDef(kTS1, [](const PointCoords& p, TangentCoords& out) {
        out[0] = p[1];
        out[1] = -(std::sin(p[0]) + p[1]);
    });
}

CascadeDef example() {
    return CascadeDef(
        kTS1,
        [](const PointCoords& x, const PointCoords& y, TangentCoords& out) {
            out[0] = x[1];
            out[1] = -(std::sin(x[0]) + x[1]) * std::cos(2.0 * y[0]);
        },
        pendulum(), PointCoords::Zero(2));
}

void BM_FlowCascade(benchmark::State& state) {
    const auto sys = example().full_system();
    PointCoords p0(4);
    p0 << 1.618, 3.4072, 1.5977, 3.1428;
    const double tol = std::pow(10.0, -static_cast<double>(state.range(0)));
    std::size_t steps = 0;
    for (auto _ : state) {
        auto traj = flow(sys, p0, 200.0, {.tol = tol, .record = Record::Final});
        steps = traj.stats.steps;
        benchmark::DoNotOptimize(traj.points.back().data());
    }
    state.counters["steps"] = static_cast<double>(steps);
}
BENCHMARK(BM_FlowCascade)->Arg(6)->Arg(9)->Arg(12)->Unit(benchmark::kMillisecond);

void BM_TransitionGraph(benchmark::State& state) {
    const auto sys = pendulum();
    const auto cover = build_cover(RegionSpec(kTS1, {{-3.0, 3.0}}), static_cast<int>(state.range(0)));
    for (auto _ : state) {
        auto g = build_transition_graph(cover, sys, {.T = 5.0, .threads = 1});
        benchmark::DoNotOptimize(g.edge_count());
    }
    state.counters["boxes"] = static_cast<double>(cover.size());
}
BENCHMARK(BM_TransitionGraph)->Arg(4)->Arg(5)->Arg(6)->Unit(benchmark::kMillisecond);

void BM_ExpressionEval(benchmark::State& state) {
    const auto e = Expression::parse("-(sin(theta)+thetadot)*cos(2*phi) + thetadot^2/2").bind({"theta", "thetadot", "phi"});
    std::vector<double> slots{0.3, -1.2, 0.7};
    for (auto _ : state) {
        slots[0] += 1e-9;
        benchmark::DoNotOptimize(e.evaluate_slots(slots));
    }
}
BENCHMARK(BM_ExpressionEval);

void BM_NativeEval(benchmark::State& state) {
    std::vector<double> slots{0.3, -1.2, 0.7};
    for (auto _ : state) {
        slots[0] += 1e-9;
        double v = -(std::sin(slots[0]) + slots[1]) * std::cos(2.0 * slots[2]) + slots[1] * slots[1] / 2.0;
        benchmark::DoNotOptimize(v);
    }
}
BENCHMARK(BM_NativeEval);

void BM_BasinPendulum(benchmark::State& state) {
    const auto sys = pendulum();
    const RegionSpec region(kTS1, {{-4.0, 4.0}});
    for (auto _ : state) {
        auto est = monte_carlo_basin(sys, PointCoords::Zero(2), region,
                                     {.n = static_cast<std::size_t>(state.range(0)), .horizon = 100.0, .threads = 1});
        benchmark::DoNotOptimize(est.fraction);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BasinPendulum)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
