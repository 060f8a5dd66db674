// Parallel kernels against their serial references, plus one dual-operator
// application as an end-to-end measure. Thread counts come from the argument.

#include <benchmark/benchmark.h>

#include <vector>

#include "ieti/assembly.hpp"
#include "ieti/kernels.hpp"
#include "ieti/solver.hpp"

using namespace ieti;

namespace {

const la::SparseMatrix& patch_stiffness()
{
    static const la::SparseMatrix k = [] {
        const auto mp = geometry::build_quarter_annulus(1, 1, 2, 8);
        const auto& p = mp.patch(0);
        return assembly::assemble_stiffness(p.space, *p.geometry);
    }();
    return k;
}

void BM_spmv_serial(benchmark::State& state)
{
    const auto& a = patch_stiffness();
    const std::vector<double> x(a.cols(), 1.0);
    std::vector<double> y(a.rows());
    for (auto _ : state) {
        kernels::spmv_serial(a.view(), x, y);
        benchmark::DoNotOptimize(y.data());
    }
    state.SetItemsProcessed(state.iterations() * a.nnz());
}

void BM_spmv_parallel(benchmark::State& state)
{
    kernels::set_threads(static_cast<int>(state.range(0)));
    const auto& a = patch_stiffness();
    const std::vector<double> x(a.cols(), 1.0);
    std::vector<double> y(a.rows());
    for (auto _ : state) {
        kernels::spmv(a.view(), x, y);
        benchmark::DoNotOptimize(y.data());
    }
    state.SetItemsProcessed(state.iterations() * a.nnz());
}

void BM_residual_serial(benchmark::State& state)
{
    const auto& a = patch_stiffness();
    const std::vector<double> x(a.cols(), 1.0), b(a.rows(), 0.0);
    std::vector<double> r(a.rows());
    for (auto _ : state) {
        kernels::residual_serial(a.view(), x, b, r);
        benchmark::DoNotOptimize(r.data());
    }
}

void BM_residual_parallel(benchmark::State& state)
{
    kernels::set_threads(static_cast<int>(state.range(0)));
    const auto& a = patch_stiffness();
    const std::vector<double> x(a.cols(), 1.0), b(a.rows(), 0.0);
    std::vector<double> r(a.rows());
    for (auto _ : state) {
        kernels::residual(a.view(), x, b, r);
        benchmark::DoNotOptimize(r.data());
    }
}

void BM_apply_f(benchmark::State& state)
{
    kernels::set_threads(static_cast<int>(state.range(0)));
    const assembly::ManufacturedSolution ms;
    dp::SolverConfig cfg;
    cfg.variant = state.range(1) ? dp::Variant::MGMG : dp::Variant::DD;
    dp::IetiSolver solver(geometry::build_quarter_annulus(8, 4, 2, 3),
                          [&](const geometry::Point& x) { return ms.f(x); }, cfg);
    solver.setup();
    const la::Vector lambda = la::Vector::LinSpaced(solver.num_multipliers(), -1.0, 1.0);
    for (auto _ : state)
        benchmark::DoNotOptimize(solver.apply_f(lambda));
    state.SetLabel(dp::to_string(cfg.variant));
}

const int kMaxThreads = kernels::max_threads();

} // namespace

BENCHMARK(BM_spmv_serial);
BENCHMARK(BM_spmv_parallel)->DenseRange(1, std::max(2, kMaxThreads));
BENCHMARK(BM_residual_serial);
BENCHMARK(BM_residual_parallel)->DenseRange(1, std::max(2, kMaxThreads));
BENCHMARK(BM_apply_f)->ArgsProduct({{1, std::max(2, kMaxThreads)}, {0, 1}})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
