// OpenMP kernels against the serial reference on representative shapes.

#include <benchmark/benchmark.h>

#include <random>

#include "nnkit/kernels.hpp"
#include "nnkit/reference.hpp"

namespace {

using nnkit::Tensor;
using nnkit::Vector;

Vector random_values(std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Vector v(n);
    for (auto& x : v)
        x = u(rng);
    return v;
}

Tensor random_matrix(std::size_t r, std::size_t c, std::uint64_t seed)
{
    return Tensor({r, c}, random_values(r * c, seed));
}

// Args: output width, input width, batch rows.
void shapes(benchmark::internal::Benchmark* b)
{
    b->Args({64, 784, 128})->Args({256, 256, 256})->Args({16, 32, 32});
}

template <bool Parallel>
void BM_BatchAffine(benchmark::State& state)
{
    const auto out = static_cast<std::size_t>(state.range(0));
    const auto in = static_cast<std::size_t>(state.range(1));
    const auto batch = static_cast<std::size_t>(state.range(2));
    auto w = random_matrix(out, in, 1);
    auto x = random_matrix(batch, in, 2);
    auto b = random_values(out, 3);
    for (auto _ : state) {
        auto z = Parallel ? nnkit::kernels::batch_affine(x, w, b) : nnkit::reference::batch_affine(x, w, b);
        benchmark::DoNotOptimize(z.data().data());
    }
    state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * out * in * batch));
}

template <bool Parallel>
void BM_WeightGradient(benchmark::State& state)
{
    const auto out = static_cast<std::size_t>(state.range(0));
    const auto in = static_cast<std::size_t>(state.range(1));
    const auto batch = static_cast<std::size_t>(state.range(2));
    auto dz = random_matrix(batch, out, 4);
    auto x = random_matrix(batch, in, 5);
    for (auto _ : state) {
        auto g = Parallel ? nnkit::kernels::weight_gradient(dz, x) : nnkit::reference::weight_gradient(dz, x);
        benchmark::DoNotOptimize(g.data().data());
    }
    state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * out * in * batch));
}

template <bool Parallel>
void BM_InputGradient(benchmark::State& state)
{
    const auto out = static_cast<std::size_t>(state.range(0));
    const auto in = static_cast<std::size_t>(state.range(1));
    const auto batch = static_cast<std::size_t>(state.range(2));
    auto dz = random_matrix(batch, out, 6);
    auto w = random_matrix(out, in, 7);
    for (auto _ : state) {
        auto g = Parallel ? nnkit::kernels::batch_input_gradient(dz, w)
                          : nnkit::reference::batch_input_gradient(dz, w);
        benchmark::DoNotOptimize(g.data().data());
    }
    state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * out * in * batch));
}

template <bool Parallel>
void BM_IntervalAffine(benchmark::State& state)
{
    const auto out = static_cast<std::size_t>(state.range(0));
    const auto in = static_cast<std::size_t>(state.range(1));
    auto w = random_matrix(out, in, 8);
    auto b = random_values(out, 9);
    Vector lo = random_values(in, 10), hi = lo;
    for (auto& h : hi)
        h += 0.1;
    Vector ol(out), oh(out);
    for (auto _ : state) {
        if (Parallel)
            nnkit::kernels::interval_affine(w, b, lo, hi, ol, oh);
        else
            nnkit::reference::interval_affine(w, b, lo, hi, ol, oh);
        benchmark::DoNotOptimize(ol.data());
        benchmark::DoNotOptimize(oh.data());
    }
    state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * out * in));
}

}  // namespace

BENCHMARK(BM_BatchAffine<false>)->Name("batch_affine/serial")->Apply(shapes);
BENCHMARK(BM_BatchAffine<true>)->Name("batch_affine/openmp")->Apply(shapes);
BENCHMARK(BM_WeightGradient<false>)->Name("weight_gradient/serial")->Apply(shapes);
BENCHMARK(BM_WeightGradient<true>)->Name("weight_gradient/openmp")->Apply(shapes);
BENCHMARK(BM_InputGradient<false>)->Name("input_gradient/serial")->Apply(shapes);
BENCHMARK(BM_InputGradient<true>)->Name("input_gradient/openmp")->Apply(shapes);
BENCHMARK(BM_IntervalAffine<false>)->Name("interval_affine/serial")->Args({64, 784, 0})->Args({512, 512, 0});
BENCHMARK(BM_IntervalAffine<true>)->Name("interval_affine/openmp")->Args({64, 784, 0})->Args({512, 512, 0});

BENCHMARK_MAIN();
