#include <benchmark/benchmark.h>

#include "glad/matrix.hpp"
#include "glad/rng.hpp"

namespace {

void BM_matmul(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  glad::Rng rng(1);
  const glad::Matrix a = glad::Matrix::random_uniform(n, n, -1, 1, rng);
  const glad::Matrix b = glad::Matrix::random_uniform(n, n, -1, 1, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(glad::matmul(a, b));
  }
  state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(BM_matmul)->Arg(16)->Arg(64)->Arg(128);

void BM_softmax_rows(benchmark::State& state) {
  const std::size_t t = static_cast<std::size_t>(state.range(0));
  glad::Rng rng(2);
  const glad::Matrix logits = glad::Matrix::random_uniform(t, 256, -5, 5, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(glad::softmax_rows(logits));
  }
}
BENCHMARK(BM_softmax_rows)->Arg(16)->Arg(64);

}  // namespace
