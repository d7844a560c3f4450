// Acceptance suite: one self-contained check per release criterion, each
// printed as a single [PASS]/[FAIL] line. Exits non-zero when any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "glad/encoder.hpp"
#include "glad/gradcheck.hpp"
#include "glad/metrics.hpp"
#include "glad/mixsim.hpp"
#include "glad/rng.hpp"
#include "glad/routing.hpp"
#include "glad/sot.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace glad;

namespace {

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool cond, const std::string& what) {
  if (!cond) throw Failure(what);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. OA-WER arithmetic against the published two- and three-talker rows.

void criterion_oa_wer() {
  const auto t0 = std::chrono::steady_clock::now();
  const double s4_2mix = oa_wer({{OverlapBand::low, 6.0},
                                 {OverlapBand::mid, 8.4},
                                 {OverlapBand::high, 12.8}});
  require(round_percent(s4_2mix) == 9.1,
          "bands 6.0/8.4/12.8 must round to 9.1, got " + fmt(s4_2mix));
  const double s5_2mix = oa_wer({{OverlapBand::low, 7.8},
                                 {OverlapBand::mid, 7.5},
                                 {OverlapBand::high, 10.1}});
  require(round_percent(s5_2mix) == 8.5,
          "bands 7.8/7.5/10.1 must round to 8.5, got " + fmt(s5_2mix));
  const double s5_3mix = oa_wer({{OverlapBand::low, 23.8},
                                 {OverlapBand::mid, 21.5},
                                 {OverlapBand::high, 25.5}});
  require(round_percent(s5_3mix) == 23.6,
          "bands 23.8/21.5/25.5 must round to 23.6, got " + fmt(s5_3mix));
  const double ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
  require(ms < 1.0, "runtime " + fmt(ms) + " ms exceeds 1 ms");
}

// ---------------------------------------------------------------------------
// 2. Analytic gradients vs central differences: 100 seeds, every tensor,
//    1e-6 relative error, under 60 s.

void criterion_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  const Placement placements[] = {Placement::both, Placement::ffn_only,
                                  Placement::attention_only, Placement::none};
  const FusionMode fusions[] = {FusionMode::dynamic, FusionMode::static_sum,
                                FusionMode::local_only};
  double worst = 0.0;
  std::string worst_where;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    EncoderConfig cfg;
    cfg.d_h = 16;
    cfg.num_heads = 4;
    cfg.d_ffn = 32;
    cfg.num_experts = 3;
    cfg.lora_rank = 2;
    cfg.lora_scale = 2.0;
    cfg.num_blocks = 1 + seed % 2;
    cfg.placement = placements[seed % 4];
    cfg.fusion_mode = fusions[seed % 3];
    Rng rng(seed);
    const GradCheckReport report =
        encoder_grad_check(cfg, rng, 1e-6, /*seq_len=*/4);
    if (report.max_rel_error > worst) {
      worst = report.max_rel_error;
      worst_where = report.worst_tensor + " (seed " + std::to_string(seed) +
                    ", " + to_string(cfg.placement) + "/" +
                    to_string(cfg.fusion_mode) + ")";
    }
    require(report.passed, "seed " + std::to_string(seed) + ": " +
                               report.worst_tensor + " rel error " +
                               fmt(report.max_rel_error) + " > 1e-6");
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  require(secs < 60.0, "runtime " + fmt(secs) + " s exceeds 60 s");
  std::printf("       gradient suite worst: %s = %s in %.1f s\n",
              worst_where.c_str(), fmt(worst).c_str(), secs);
}

// ---------------------------------------------------------------------------
// 3. Routing invariants over 1000 random instances.

void criterion_routing() {
  Rng rng(1001);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t t = 1 + rng.uniform_int(4);
    const std::size_t n = 2 + rng.uniform_int(4);
    const std::size_t d = 4 + rng.uniform_int(5);
    RouterParams params;
    const double s = 1.0 / std::sqrt(static_cast<double>(d));
    params.w_global = Matrix::random_uniform(d, n, -s, s, rng);
    params.w_local = Matrix::random_uniform(d, n, -s, s, rng);
    params.w_fusion = Matrix::random_uniform(d, 2, -s, s, rng);
    const Matrix x_s = Matrix::random_uniform(t, d, -2, 2, rng);
    const Matrix x_in = Matrix::random_uniform(t, d, -2, 2, rng);

    const ExpertDistribution g = global_route(x_s, params);
    const ExpertDistribution l = local_route(x_in, params);
    const FusionWeights alpha = fusion_weights(x_in, params);
    const ExpertDistribution fused = fuse(g, l, alpha);

    for (const Matrix* probs : {&g.probs, &l.probs, &fused.probs}) {
      for (std::size_t r = 0; r < probs->rows(); ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < probs->cols(); ++c) {
          const double v = (*probs)(r, c);
          require(v >= 0.0, "negative probability");
          sum += v;
        }
        require(std::abs(sum - 1.0) <= 1e-9,
                "row sum " + fmt(sum) + " departs from 1 beyond 1e-9");
      }
    }
    for (std::size_t r = 0; r < fused.probs.rows(); ++r) {
      for (std::size_t c = 0; c < fused.probs.cols(); ++c) {
        const double lo = std::min(g.probs(r, c), l.probs(r, c));
        const double hi = std::max(g.probs(r, c), l.probs(r, c));
        require(fused.probs(r, c) >= lo && fused.probs(r, c) <= hi,
                "fused value escapes the [min, max] parent envelope");
      }
    }
    Matrix endpoint(t, 2);
    for (std::size_t r = 0; r < t; ++r) endpoint(r, 0) = 1.0;
    const ExpertDistribution pinned = fuse(g, l, FusionWeights(endpoint));
    require(pinned.probs == g.probs,
            "fuse with alpha = [1, 0] is not bit-identical to P_global");
  }
}

// ---------------------------------------------------------------------------
// 4. MoLE layer degeneracies: zero-B equality, unit multiplier at
//    lora_scale == rank == 8, linearity in the expert weights.

void criterion_mole_degeneracies() {
  Rng rng(2002);
  MoleLayerParams layer = make_mole_layer(32, 24, 3, 8, 8.0, rng);
  require(layer.effective_multiplier() == 1.0,
          "lora_scale 8 over rank 8 must give exactly 1");
  const Matrix x = Matrix::random_uniform(6, 32, -1, 1, rng);
  const Matrix p = softmax_rows(Matrix::random_uniform(6, 3, -2, 2, rng));

  // Freshly built layers keep B = 0, so the expert paths vanish.
  const Matrix y = mole_forward(layer, x, p);
  const Matrix shared = matmul_nt(x, layer.w_shared);
  require(test::max_abs_diff(y, shared) <= 1e-12,
          "zero-B forward departs from the shared linear layer");

  for (LoraExpert& e : layer.experts) {
    e.b = Matrix::random_uniform(e.b.rows(), e.b.cols(), -0.5, 0.5, rng);
  }
  const Matrix p2 = softmax_rows(Matrix::random_uniform(6, 3, -2, 2, rng));
  for (double lambda : {0.0, 0.25, 0.5, 0.9, 1.0}) {
    Matrix blend(6, 3);
    for (std::size_t i = 0; i < blend.data().size(); ++i) {
      blend.data()[i] = lambda * p.data()[i] + (1 - lambda) * p2.data()[i];
    }
    Matrix expected = mole_forward(layer, x, p) * lambda;
    expected += mole_forward(layer, x, p2) * (1 - lambda);
    require(test::max_abs_diff(mole_forward(layer, x, blend), expected) <=
                1e-10,
            "forward is not linear in the expert weights at lambda = " +
                fmt(lambda));
  }
}

// ---------------------------------------------------------------------------
// 5. PI-WER equals exhaustive bijection enumeration for K <= 4.

void criterion_pi_wer() {
  Rng rng(3003);
  auto random_words = [&](std::size_t max_len) {
    Words w;
    const std::size_t len = rng.uniform_int(max_len + 1);
    for (std::size_t i = 0; i < len; ++i) {
      w.push_back("w" + std::to_string(rng.uniform_int(6)));
    }
    return w;
  };
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t nr = 1 + rng.uniform_int(4);
    const std::size_t nh = rng.uniform_int(5);
    std::vector<Words> refs, hyps;
    for (std::size_t i = 0; i < nr; ++i) refs.push_back(random_words(5));
    for (std::size_t i = 0; i < nh; ++i) hyps.push_back(random_words(5));
    const EditCounts counts = pi_wer(refs, hyps);
    const std::int64_t oracle = test::oracle_pi_errors(refs, hyps);
    require(counts.errors() == oracle,
            "pi_wer " + std::to_string(counts.errors()) +
                " != oracle " + std::to_string(oracle));
    std::int64_t real_ref_words = 0;
    for (const Words& w : refs) {
      real_ref_words += static_cast<std::int64_t>(w.size());
    }
    require(counts.ref_words == real_ref_words,
            "padded segments leaked into ref_words");
  }
  for (int trial = 0; trial < 200; ++trial) {
    const Words ref = random_words(8);
    const Words hyp = random_words(8);
    if (ref.empty()) continue;
    require(pi_wer({ref}, {hyp}).errors() ==
                word_edit_distance(ref, hyp).errors(),
            "K = 1 departs from plain word edit distance");
  }
}

// ---------------------------------------------------------------------------
// 6. SOT round trip over 1000 random transcript sets; strict parsing
//    rejects malformed sequences.

void criterion_sot() {
  Rng rng(4004);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t speakers = 1 + rng.uniform_int(3);
    std::vector<SpeakerUtterance> utts;
    for (std::size_t s = 0; s < speakers; ++s) {
      SpeakerUtterance u;
      const std::size_t len = 1 + rng.uniform_int(5);
      for (std::size_t w = 0; w < len; ++w) {
        u.words.push_back("t" + std::to_string(rng.uniform_int(20)));
      }
      u.start_time = rng.uniform(0.0, 30.0);
      utts.push_back(std::move(u));
    }
    std::vector<std::size_t> order(utts.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) {
                       return utts[a].start_time < utts[b].start_time;
                     });
    const std::vector<Words> segments = deserialize(serialize(utts));
    require(segments.size() == utts.size(), "segment count changed");
    for (std::size_t i = 0; i < order.size(); ++i) {
      require(segments[i] == utts[order[i]].words,
              "round trip broke start-time order at position " +
                  std::to_string(i));
    }
  }
  for (const char* malformed : {"$ a b", "a b $", "a $ $ b", "$", ""}) {
    bool rejected = false;
    try {
      deserialize(SotSequence::from_text(malformed));
    } catch (const MalformedSequenceError&) {
      rejected = true;
    }
    require(rejected, std::string("strict mode accepted '") + malformed + "'");
  }
}

// ---------------------------------------------------------------------------
// 7. Overlap machinery: band boundaries, the exact ratio, the grid oracle,
//    and a manifest at 1% of the reference composition.

void criterion_overlap() {
  require(bucket_assign(0.2) == OverlapBand::low, "0.2 must be low");
  require(bucket_assign(0.5) == OverlapBand::mid, "0.5 must be mid");
  require(bucket_assign(1.0) == OverlapBand::high, "1.0 must be high");
  require(bucket_assign(0.0) == OverlapBand::none, "0 must be none");

  require(std::abs(overlap_ratio({{0, 10}, {5, 15}}) - 1.0 / 3) <= 1e-9,
          "[0,10]+[5,15] must overlap by exactly one third");

  Rng rng(5005);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<Interval> intervals;
    for (int i = 0; i < 2; ++i) {
      const double start = rng.uniform(0.0, 12.0);
      intervals.push_back({start, start + rng.uniform(0.5, 10.0)});
    }
    double lo = intervals[0].start, hi = intervals[0].end;
    for (const Interval& iv : intervals) {
      lo = std::min(lo, iv.start);
      hi = std::max(hi, iv.end);
    }
    const double exact_secs = overlap_ratio(intervals) * (hi - lo);
    const double grid_secs = test::oracle_overlap_seconds(intervals);
    require(std::abs(exact_secs - grid_secs) <= 0.01 + 1e-9,
            "sweep and 10 ms grid disagree by more than one cell");
  }

  // 1% of the reference training composition.
  std::vector<UtteranceMeta> corpus;
  Rng corpus_rng(6006);
  for (int i = 0; i < 4000; ++i) {
    corpus.push_back({"u" + std::to_string(i), corpus_rng.uniform(3.0, 15.0),
                      static_cast<std::int64_t>(10 + corpus_rng.uniform_int(20))});
  }
  const double single_target = 6.921;
  const BandHours targets = {{OverlapBand::low, 1.815},
                             {OverlapBand::mid, 2.755},
                             {OverlapBand::high, 2.025}};
  Rng rng2(7007);
  const auto manifest = build_manifest(corpus, targets, single_target, rng2);
  const ManifestSummary summary = summarize_manifest(manifest);
  auto check_band = [&](OverlapBand band, double target) {
    const double achieved = summary.achieved_hours.at(band);
    require(achieved >= target * 0.98 && achieved <= target * 1.02,
            to_string(band) + " achieved " + fmt(achieved) + " h vs target " +
                fmt(target) + " h (beyond 2%)");
  };
  check_band(OverlapBand::none, single_target);
  for (const auto& [band, hours] : targets) check_band(band, hours);
  for (const MixtureSpec& spec : manifest) {
    require(spec.band == bucket_assign(spec.overlap_ratio),
            "manifest entry band disagrees with bucket_assign");
  }
}

// ---------------------------------------------------------------------------
// 8. Ablation structure: parameter-count containment, dead global router
//    under local-only fusion, zero-B placement equivalence.

void criterion_ablation_structure() {
  EncoderConfig cfg;
  cfg.num_blocks = 2;
  cfg.d_h = 16;
  cfg.num_heads = 4;
  cfg.d_ffn = 32;
  cfg.num_experts = 3;
  cfg.lora_rank = 2;
  cfg.lora_scale = 2.0;
  cfg.fusion_mode = FusionMode::dynamic;

  auto count_for = [&](Placement p) {
    EncoderConfig c = cfg;
    c.placement = p;
    return count_encoder_params(c);
  };
  const auto none = count_for(Placement::none);
  const auto ffn = count_for(Placement::ffn_only);
  const auto att = count_for(Placement::attention_only);
  const auto both = count_for(Placement::both);
  require(none < att && att < both, "count(none) < count(attention_only) < "
                                    "count(both) violated");
  require(none < ffn && ffn < both,
          "count(none) < count(ffn_only) < count(both) violated");

  // Local-only fusion never propagates gradient into the global router.
  EncoderConfig local_cfg = cfg;
  local_cfg.placement = Placement::both;
  local_cfg.fusion_mode = FusionMode::local_only;
  Rng rng(8008);
  EncoderState state = build_encoder(local_cfg, rng);
  for (BlockParams& block : state.blocks) {
    for (SlotParams* slot :
         {&block.q, &block.k, &block.v, &block.o, &block.ffn1, &block.ffn2}) {
      auto& m = std::get<MoleLayerParams>(*slot);
      for (LoraExpert& e : m.experts) {
        e.b = Matrix::random_uniform(e.b.rows(), e.b.cols(), -0.4, 0.4, rng);
      }
    }
  }
  const Matrix x = Matrix::random_uniform(4, 16, -1, 1, rng);
  EncoderCache cache;
  const Matrix y = encode_cached(state, x, cache);
  const Matrix upstream = Matrix::random_uniform(4, 16, -1, 1, rng);
  const EncoderGrads grads = encoder_backward(state, cache, upstream);
  require(frobenius_norm(grads.tensors.at("w_global")) == 0.0,
          "local-only fusion leaked gradient into w_global");

  // Untouched B = 0 LoRA paths: the expert-bearing encoder is its plain
  // restriction, output-identical on the same shared weights.
  EncoderConfig both_cfg = cfg;
  both_cfg.placement = Placement::both;
  EncoderConfig none_cfg = cfg;
  none_cfg.placement = Placement::none;
  Rng ra(9009), rb(9009);
  const EncoderState with_experts = build_encoder(both_cfg, ra);
  const EncoderState plain = build_encoder(none_cfg, rb);
  Rng rx(9010);
  const Matrix probe = Matrix::random_uniform(5, 16, -1, 1, rx);
  require(encode(with_experts, probe) == encode(plain, probe),
          "zero-B encoder output differs from the plain restriction");
}

struct Criterion {
  int number;
  std::string name;
  std::function<void()> body;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "OA-WER arithmetic matches published band rows", criterion_oa_wer},
      {2, "analytic gradients match central differences (100 seeds)",
       criterion_gradients},
      {3, "routing distributions: stochasticity, envelope, endpoint",
       criterion_routing},
      {4, "MoLE degeneracies: zero-B, unit multiplier, linearity",
       criterion_mole_degeneracies},
      {5, "PI-WER equals exhaustive bijection enumeration",
       criterion_pi_wer},
      {6, "SOT round trip and strict rejection of malformed input",
       criterion_sot},
      {7, "overlap bands, ratio oracle and 1% composition manifest",
       criterion_overlap},
      {8, "ablation structure: counts, dead paths, zero-B equivalence",
       criterion_ablation_structure},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = true;
    try {
      c.body();
    } catch (const std::exception& e) {
      ok = false;
      detail = e.what();
    }
    const double ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
    if (ok) {
      std::printf("[PASS] %d. %s (%.1f ms)\n", c.number, c.name.c_str(), ms);
    } else {
      ++failures;
      std::printf("[FAIL] %d. %s: %s\n", c.number, c.name.c_str(),
                  detail.c_str());
    }
  }
  if (failures) {
    std::printf("%d of %zu criteria failed\n", failures, criteria.size());
    return 1;
  }
  std::printf("all %zu criteria passed\n", criteria.size());
  return 0;
}
