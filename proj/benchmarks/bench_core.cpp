#include <benchmark/benchmark.h>

#include "qpsl/cocycle.hpp"
#include "qpsl/oscillation.hpp"
#include "qpsl/spectral.hpp"

namespace {

constexpr double kGolden = 0.6180339887498949;

qpsl::OperatorSpec amo(double coupling) {
    return {qpsl::PotentialSpec::almost_mathieu(coupling, kGolden, 0.1234),
            qpsl::PerturbationSpec::exponential(1.0, 0.7)};
}

void BM_TransferProduct(benchmark::State& state) {
    const auto op = amo(1.5);
    const std::int64_t k = state.range(0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(qpsl::transfer_product(op, 0.37, 0, k));
    }
    state.SetItemsProcessed(state.iterations() * k);
}
BENCHMARK(BM_TransferProduct)->Arg(1000)->Arg(10000)->Arg(100000);

void BM_DeterminantSequence(benchmark::State& state) {
    const auto op = amo(1.5);
    const std::int64_t k = state.range(0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(qpsl::DeterminantSequence(op, 0.37, 0, k));
    }
    state.SetItemsProcessed(state.iterations() * k);
}
BENCHMARK(BM_DeterminantSequence)->Arg(1000)->Arg(10000);

void BM_SturmCount(benchmark::State& state) {
    const auto box = qpsl::build_box(amo(1.5), 0, state.range(0) - 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(qpsl::sturm_count(box, 0.37));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SturmCount)->Arg(1000)->Arg(10000);

void BM_GreenEntryCramer(benchmark::State& state) {
    const auto box = qpsl::build_box(amo(1.5), 0, state.range(0) - 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            qpsl::green_entry(box, 8.31, 5, state.range(0) / 2, qpsl::GreenPath::Cramer));
    }
}
BENCHMARK(BM_GreenEntryCramer)->Arg(200)->Arg(2000);

void BM_Lyapunov(benchmark::State& state) {
    const auto op = amo(3.0).without_perturbation();
    for (auto _ : state) {
        benchmark::DoNotOptimize(qpsl::lyapunov(op, 0.0, state.range(0), 16));
    }
}
BENCHMARK(BM_Lyapunov)->Arg(1000)->Arg(10000);

void BM_TelescopingResiduals(benchmark::State& state) {
    const auto op = amo(1.2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(qpsl::telescoping_residuals(op, 0.37, 0, state.range(0)));
    }
}
BENCHMARK(BM_TelescopingResiduals)->Arg(100)->Arg(1000);

void BM_WeylSolution(benchmark::State& state) {
    const auto op = amo(3.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            qpsl::weyl_solution(op, 7.5, qpsl::Side::PlusInfinity, state.range(0)));
    }
}
BENCHMARK(BM_WeylSolution)->Arg(256)->Arg(1024);

} // namespace

BENCHMARK_MAIN();
