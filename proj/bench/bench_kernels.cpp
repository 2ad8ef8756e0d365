// Serial reference vs OpenMP Bayes kernels on (alpha, beta) grids.

#include <map>

#include <benchmark/benchmark.h>

#include "noisy_mdp/bayes_kernels.hpp"
#include "noisy_mdp/bayesian_estimator.hpp"

using namespace noisy_mdp;

namespace {

const Support& grid(std::size_t r) {
    static std::map<std::size_t, PosteriorOverC> cache;
    auto it = cache.find(r);
    if (it == cache.end()) {
        PosteriorSpec spec;
        spec.resolution = r;
        it = cache.emplace(r, init_posterior(spec)).first;
    }
    return it->second.support();
}

template <KernelBackend B>
void first_order(benchmark::State& state) {
    const Support& s = grid(std::size_t(state.range(0)));
    const double predicted[2] = {0.4, 0.6};
    KernelOutput out;
    for (auto _ : state) {
        first_order_kernel(B, s, predicted, 1, out);
        benchmark::DoNotOptimize(out.likelihood.data());
    }
    state.SetItemsProcessed(state.iterations() * std::int64_t(s.size()));
}

template <KernelBackend B>
void second_order(benchmark::State& state) {
    const Support& s = grid(std::size_t(state.range(0)));
    const double belief[2] = {0.4, 0.6};
    Eigen::MatrixXd p(2, 2);
    p << 0.3, 0.7, 0.7, 0.3;
    KernelOutput out;
    for (auto _ : state) {
        second_order_kernel(B, s, belief, p, 0, 1, out);
        benchmark::DoNotOptimize(out.likelihood.data());
    }
    state.SetItemsProcessed(state.iterations() * std::int64_t(s.size()));
}

}  // namespace

BENCHMARK(first_order<KernelBackend::serial>)->Arg(101)->Arg(301);
BENCHMARK(first_order<KernelBackend::openmp>)->Arg(101)->Arg(301);
BENCHMARK(second_order<KernelBackend::serial>)->Arg(101)->Arg(301);
BENCHMARK(second_order<KernelBackend::openmp>)->Arg(101)->Arg(301);

BENCHMARK_MAIN();
