#include <benchmark/benchmark.h>

#include "glad/encoder.hpp"
#include "glad/rng.hpp"

namespace {

glad::EncoderConfig bench_config(glad::Placement placement) {
  glad::EncoderConfig cfg;
  cfg.num_blocks = 2;
  cfg.d_h = 64;
  cfg.num_heads = 4;
  cfg.d_ffn = 128;
  cfg.num_experts = 3;
  cfg.lora_rank = 8;
  cfg.lora_scale = 8.0;
  cfg.placement = placement;
  cfg.fusion_mode = glad::FusionMode::dynamic;
  return cfg;
}

void BM_mole_forward(benchmark::State& state) {
  glad::Rng rng(3);
  glad::MoleLayerParams layer = glad::make_mole_layer(64, 64, 3, 8, 8.0, rng);
  const glad::Matrix x = glad::Matrix::random_uniform(32, 64, -1, 1, rng);
  const glad::Matrix p =
      glad::softmax_rows(glad::Matrix::random_uniform(32, 3, -1, 1, rng));
  for (auto _ : state) {
    benchmark::DoNotOptimize(glad::mole_forward(layer, x, p));
  }
}
BENCHMARK(BM_mole_forward);

void BM_mole_backward(benchmark::State& state) {
  glad::Rng rng(4);
  glad::MoleLayerParams layer = glad::make_mole_layer(64, 64, 3, 8, 8.0, rng);
  const glad::Matrix x = glad::Matrix::random_uniform(32, 64, -1, 1, rng);
  const glad::Matrix p =
      glad::softmax_rows(glad::Matrix::random_uniform(32, 3, -1, 1, rng));
  const glad::Matrix up = glad::Matrix::random_uniform(32, 64, -1, 1, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(glad::mole_backward(layer, x, p, up));
  }
}
BENCHMARK(BM_mole_backward);

void BM_encode(benchmark::State& state) {
  const auto placement = static_cast<glad::Placement>(state.range(0));
  glad::Rng rng(5);
  const glad::EncoderState enc =
      glad::build_encoder(bench_config(placement), rng);
  const glad::Matrix x = glad::Matrix::random_uniform(32, 64, -1, 1, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(glad::encode(enc, x));
  }
}
BENCHMARK(BM_encode)
    ->Arg(static_cast<int>(glad::Placement::none))
    ->Arg(static_cast<int>(glad::Placement::both));

void BM_encoder_backward(benchmark::State& state) {
  glad::Rng rng(6);
  const glad::EncoderState enc =
      glad::build_encoder(bench_config(glad::Placement::both), rng);
  const glad::Matrix x = glad::Matrix::random_uniform(32, 64, -1, 1, rng);
  glad::EncoderCache cache;
  const glad::Matrix y = glad::encode_cached(enc, x, cache);
  const glad::Matrix up = glad::Matrix::random_uniform(32, 64, -1, 1, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(glad::encoder_backward(enc, cache, up));
  }
}
BENCHMARK(BM_encoder_backward);

}  // namespace
