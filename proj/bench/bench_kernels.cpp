#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "eeg2text/numcore/kernels.hpp"

namespace k = eeg2text::numcore::kernels;

namespace {

std::vector<float> random_values(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<float> d(0.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

template <bool Parallel>
void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_values(n * n, 1);
  const auto b = random_values(n * n, 2);
  std::vector<float> c(n * n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::gemm(false, false, n, n, n, a.data(), b.data(), c.data(), false);
    } else {
      k::serial::gemm(false, false, n, n, n, a.data(), b.data(), c.data(), false);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(2 * n * n * n));
}

template <bool Parallel>
void BM_Softmax(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const std::size_t cols = 512;
  const auto x = random_values(rows * cols, 3);
  std::vector<float> y(rows * cols);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::softmax_rows(x.data(), y.data(), rows, cols);
    } else {
      k::serial::softmax_rows(x.data(), y.data(), rows, cols);
    }
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(rows * cols));
}

}  // namespace

BENCHMARK(BM_Gemm<false>)->Name("gemm/serial")->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(BM_Gemm<true>)->Name("gemm/openmp")->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(BM_Softmax<false>)->Name("softmax/serial")->RangeMultiplier(4)->Range(16, 1024);
BENCHMARK(BM_Softmax<true>)->Name("softmax/openmp")->RangeMultiplier(4)->Range(16, 1024);

BENCHMARK_MAIN();
