#include <benchmark/benchmark.h>

#include "tikreg/operators.hpp"
#include "tikreg/penalizers.hpp"
#include "tikreg/restore.hpp"
#include "tikreg/solvers.hpp"

using namespace tikreg;

namespace {

GridFunction test_image(int n) { return add_noise(make_phantom("blocks", n, n), 0.05, 1); }

void BM_BlurApply(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const auto blur = make_gaussian_blur(n, n, 6.0, 3);
    const auto x = test_image(n);
    for (auto _ : state) benchmark::DoNotOptimize(blur.apply(x));
    state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_BlurApply)->Arg(64)->Arg(256)->Arg(1024);

void BM_GradientAdjointPair(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const auto grad = make_gradient(n, n);
    const auto x = test_image(n);
    for (auto _ : state) benchmark::DoNotOptimize(grad.apply_adjoint(grad.apply(x)));
    state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_GradientAdjointPair)->Arg(64)->Arg(256)->Arg(1024);

void BM_TvGradient(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const auto tv = Penalizer::total_variation(n, n);
    const auto x = test_image(n);
    for (auto _ : state) benchmark::DoNotOptimize(tv.gradient(x));
    state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_TvGradient)->Arg(64)->Arg(256);

void BM_SolveQuadraticGrad2(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const auto blur = make_gaussian_blur(n, n, 0.5, 3);
    const Problem p{blur, add_noise(blur.apply(make_phantom("blocks", n, n)), 0.01, 2),
                    Penalizer::squared_norm(make_gradient(n, n)).scaled(1e-3)};
    for (auto _ : state) benchmark::DoNotOptimize(solve_quadratic(p).minimizer);
}
BENCHMARK(BM_SolveQuadraticGrad2)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_SolveGeneralTv(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const auto blur = make_gaussian_blur(n, n, 0.5, 3);
    const Problem p{blur, add_noise(blur.apply(make_phantom("blocks", n, n)), 0.01, 2),
                    Penalizer::total_variation(n, n).scaled(3e-3)};
    SolverOptions o;
    o.gradient_tolerance = 1e-6;
    o.max_iterations = 5000;
    for (auto _ : state) benchmark::DoNotOptimize(solve_general(p, o).minimizer);
}
BENCHMARK(BM_SolveGeneralTv)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
