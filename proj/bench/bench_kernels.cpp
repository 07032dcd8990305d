#include <benchmark/benchmark.h>

#include "pgad/kernels.hpp"
#include "pgad/rng.hpp"

using namespace pgad;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
    Rng rng(seed);
    Matrix m(r, c);
    for (auto& v : m.data()) v = rng.normal();
    return m;
}

template <auto Kernel>
void affine(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix x = random_matrix(n, 64, 1);
    const Matrix w = random_matrix(64, 64, 2);
    const std::vector<double> b(64, 0.1);
    for (auto _ : state) benchmark::DoNotOptimize(Kernel(x, w.data(), b, 64));
    state.SetItemsProcessed(state.iterations() * static_cast<long>(n) * 64 * 64);
}

template <auto Kernel>
void cosine(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix l = random_matrix(n, 32, 3);
    const Matrix r = random_matrix(n, 32, 4);
    for (auto _ : state) benchmark::DoNotOptimize(Kernel(l, r, 0.1));
    state.SetItemsProcessed(state.iterations() * static_cast<long>(n * n) * 32);
}

template <auto Kernel>
void distances(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix x = random_matrix(n, 32, 5);
    const Matrix z = random_matrix(8, 32, 6);
    for (auto _ : state) benchmark::DoNotOptimize(Kernel(x, z));
    state.SetItemsProcessed(state.iterations() * static_cast<long>(n) * 8 * 32);
}

}  // namespace

BENCHMARK(affine<kernels::serial::affine_forward>)->Name("affine_forward/serial")->Range(32, 4096);
BENCHMARK(affine<kernels::omp::affine_forward>)->Name("affine_forward/omp")->Range(32, 4096);
BENCHMARK(cosine<kernels::serial::cosine_similarity>)->Name("cosine_similarity/serial")->Range(32, 1024);
BENCHMARK(cosine<kernels::omp::cosine_similarity>)->Name("cosine_similarity/omp")->Range(32, 1024);
BENCHMARK(distances<kernels::serial::squared_distances>)->Name("squared_distances/serial")->Range(32, 4096);
BENCHMARK(distances<kernels::omp::squared_distances>)->Name("squared_distances/omp")->Range(32, 4096);

BENCHMARK_MAIN();
