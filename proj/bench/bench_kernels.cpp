// Serial reference vs OpenMP kernels for the gating MLP, plus one full
// loss+gradient evaluation at the default width.

#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

#include "armo/gating.hpp"
#include "armo/kernels.hpp"
#include "armo/rng.hpp"

namespace {

using armo::kernels::DenseShape;
using armo::kernels::Exec;

std::vector<double> random_buffer(std::size_t n, std::uint64_t seed) {
    armo::Rng rng(seed);
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

template <Exec E>
void BM_DenseForward(benchmark::State& state) {
    const DenseShape s{static_cast<std::size_t>(state.range(0)), 1024, 1024};
    const auto x = random_buffer(s.batch * s.in, 1);
    const auto w = random_buffer(s.out * s.in, 2);
    const auto b = random_buffer(s.out, 3);
    std::vector<double> y(s.batch * s.out);
    for (auto _ : state) {
        armo::kernels::dense_forward(E, s, x, w, b, y);
        benchmark::DoNotOptimize(y.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<long>(s.batch * s.in * s.out));
}

template <Exec E>
void BM_DenseBackwardParams(benchmark::State& state) {
    const DenseShape s{static_cast<std::size_t>(state.range(0)), 1024, 1024};
    const auto dy = random_buffer(s.batch * s.out, 4);
    const auto x = random_buffer(s.batch * s.in, 5);
    std::vector<double> dw(s.out * s.in), db(s.out);
    for (auto _ : state) {
        std::fill(dw.begin(), dw.end(), 0.0);
        std::fill(db.begin(), db.end(), 0.0);
        armo::kernels::dense_backward_params(E, s, dy, x, dw, db);
        benchmark::DoNotOptimize(dw.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<long>(s.batch * s.in * s.out));
}

template <Exec E>
void BM_LossAndGradient(benchmark::State& state) {
    const std::size_t d = 64, k = 8, n = 256;
    armo::Rng rng(7);
    armo::PreparedPairs data{d, k, n, {}, {}, {}};
    for (std::size_t i = 0; i < n * d; ++i) data.prompts.push_back(rng.normal());
    for (std::size_t i = 0; i < n * k; ++i) {
        data.chosen.push_back(rng.uniform());
        data.rejected.push_back(rng.uniform());
    }
    const auto net = armo::GatingNetwork::initialized(armo::default_layer_dims(d, k), 11);
    std::vector<std::size_t> batch(n);
    std::iota(batch.begin(), batch.end(), std::size_t{0});
    for (auto _ : state) {
        auto g = armo::loss_and_gradient(net, data, batch, E);
        benchmark::DoNotOptimize(g.loss);
    }
}

}  // namespace

BENCHMARK(BM_DenseForward<Exec::serial>)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DenseForward<Exec::parallel>)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DenseBackwardParams<Exec::serial>)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DenseBackwardParams<Exec::parallel>)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LossAndGradient<Exec::serial>)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LossAndGradient<Exec::parallel>)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
