#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "glad/metrics.hpp"
#include "glad/mixsim.hpp"
#include "glad/rng.hpp"

namespace {

glad::Words random_words(std::size_t n, glad::Rng& rng) {
  glad::Words w;
  for (std::size_t i = 0; i < n; ++i) {
    w.push_back("w" + std::to_string(rng.uniform_int(50)));
  }
  return w;
}

void BM_word_edit_distance(benchmark::State& state) {
  glad::Rng rng(7);
  const glad::Words ref = random_words(40, rng);
  const glad::Words hyp = random_words(40, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(glad::word_edit_distance(ref, hyp));
  }
}
BENCHMARK(BM_word_edit_distance);

void BM_pi_wer(benchmark::State& state) {
  const std::size_t k = static_cast<std::size_t>(state.range(0));
  glad::Rng rng(8);
  std::vector<glad::Words> refs, hyps;
  for (std::size_t i = 0; i < k; ++i) {
    refs.push_back(random_words(15, rng));
    hyps.push_back(random_words(15, rng));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(glad::pi_wer(refs, hyps));
  }
}
BENCHMARK(BM_pi_wer)->Arg(2)->Arg(3)->Arg(4);

void BM_overlap_ratio(benchmark::State& state) {
  glad::Rng rng(9);
  std::vector<glad::Interval> intervals;
  for (int i = 0; i < 3; ++i) {
    const double start = rng.uniform(0, 10);
    intervals.push_back({start, start + rng.uniform(1, 10)});
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(glad::overlap_ratio(intervals));
  }
}
BENCHMARK(BM_overlap_ratio);

void BM_make_mixture(benchmark::State& state) {
  glad::Rng rng(10);
  const std::vector<glad::UtteranceMeta> utts = {{"a", 10.0, 20},
                                                 {"b", 8.0, 16}};
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        glad::make_mixture(utts, rng, glad::OverlapBand::mid));
  }
}
BENCHMARK(BM_make_mixture);

}  // namespace
