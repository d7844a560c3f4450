#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "glad/mole.hpp"

namespace glad {

/// Which of the six linear slots per block (q, k, v, o, ffn1, ffn2) are
/// replaced by MoLE layers.
enum class Placement { none, ffn_only, attention_only, both };

/// How each MoLE slot combines the encoder-wide global distribution with its
/// own local distribution.
enum class FusionMode { dynamic, static_sum, local_only };

std::string to_string(Placement p);
std::string to_string(FusionMode m);
Placement placement_from_string(const std::string& s);
FusionMode fusion_mode_from_string(const std::string& s);

struct EncoderConfig {
  std::size_t num_blocks = 1;
  std::size_t d_h = 16;
  std::size_t num_heads = 4;
  std::size_t d_ffn = 32;
  std::size_t num_experts = 3;
  std::size_t lora_rank = 2;
  double lora_scale = 2.0;
  Placement placement = Placement::both;
  FusionMode fusion_mode = FusionMode::dynamic;

  void validate() const;  // throws ConfigError
};

/// Parses the documented JSON document with exactly these keys:
/// num_blocks, d_h, num_heads, d_ffn, num_experts, lora_rank, lora_scale,
/// placement, fusion_mode.
EncoderConfig encoder_config_from_json(std::istream& is);
void encoder_config_to_json(std::ostream& os, const EncoderConfig& config);

struct LinearParams {
  Matrix weight;  // d_out x d_in
  Matrix bias;    // 1 x d_out
};

/// One linear slot: plain dense transform or a MoLE layer.
using SlotParams = std::variant<LinearParams, MoleLayerParams>;

struct LayerNormParams {
  Matrix gain;    // 1 x d
  Matrix offset;  // 1 x d
};

struct BlockParams {
  LayerNormParams ln1, ln2;
  SlotParams q, k, v, o, ffn1, ffn2;
};

/// Pre-norm transformer encoder with a single shared global router:
/// `w_global` is consumed by every MoLE slot of every block, while local and
/// fusion routers live inside each slot.
struct EncoderState {
  EncoderConfig config;
  Matrix w_global;  // d_h x N; empty when placement == none
  std::vector<BlockParams> blocks;
  LayerNormParams final_ln;
};

/// Deterministic initialization. Shared (plain-path) weights come from one
/// PRNG stream and all expert/router tensors from a second stream derived
/// from the same seed, so two placements built from one seed share identical
/// plain weights. LoRA B matrices start at zero: a freshly built encoder is
/// exactly its plain-transformer restriction.
EncoderState build_encoder(const EncoderConfig& config, Rng& rng);

/// Forward pass. x_s is T x d_h: raw features double as first-layer input
/// (there is no subsampling frontend, so every layer shares the frame count
/// T and per-frame fusion is well-defined).
Matrix encode(const EncoderState& state, const Matrix& x_s);

/// The encoder-wide global expert distribution softmax(x_s * w_global).
ExpertDistribution encoder_global_distribution(const EncoderState& state,
                                               const Matrix& x_s);

struct LayerNormCache {
  Matrix x_hat;
  std::vector<double> inv_std;
};

struct SlotCache {
  Matrix x_in;
  Matrix p;        // fused expert weights consumed by the slot (empty: plain)
  Matrix p_local;
  Matrix alpha;    // empty unless fusion_mode == dynamic
};

struct BlockCache {
  Matrix x_in;
  LayerNormCache ln1, ln2;
  Matrix n1, n2;
  SlotCache q, k, v, o, ffn1, ffn2;
  Matrix q_out, k_out, v_out;
  std::vector<Matrix> attn_probs;  // one T x T matrix per head
  Matrix ctx;
  Matrix x_mid;
  Matrix ffn_pre;   // ffn1 output before activation
  Matrix ffn_act;
};

struct EncoderCache {
  Matrix x_s;
  Matrix p_global;  // empty when no MoLE slot exists
  std::vector<BlockCache> blocks;
  Matrix pre_final;
  LayerNormCache final_ln;
  Matrix output;
};

/// Forward pass that records every intermediate needed by encoder_backward.
Matrix encode_cached(const EncoderState& state, const Matrix& x_s,
                     EncoderCache& cache);

/// Analytic gradients for every parameter tensor, keyed by the names that
/// parameter_tensors() assigns. Tensors on dead paths (e.g. w_global under
/// local_only fusion) are present and exactly zero.
struct EncoderGrads {
  std::map<std::string, Matrix> tensors;
  Matrix x_s;  // gradient w.r.t. the input features
};

EncoderGrads encoder_backward(const EncoderState& state,
                              const EncoderCache& cache,
                              const Matrix& output_grad);

/// Stable name -> tensor listing of all trainable parameters, in a fixed
/// traversal order (w_global, blocks, final LN).
std::vector<std::pair<std::string, Matrix*>> parameter_tensors(
    EncoderState& state);
std::vector<std::pair<std::string, const Matrix*>> parameter_tensors(
    const EncoderState& state);

/// Closed-form parameter count for a configuration; matches the built state.
std::int64_t count_encoder_params(const EncoderConfig& config);

/// Per-component (w_global, each block slot, layer norms) count rows, in
/// traversal order. Used by the CLI's per-layer table.
std::vector<std::pair<std::string, std::int64_t>> encoder_param_breakdown(
    const EncoderConfig& config);

struct GradCheckReport {
  struct TensorCheck {
    std::string name;
    double rel_error;      // ||analytic - numeric|| / max(norms)
    double analytic_norm;
    double numeric_norm;
  };
  std::vector<TensorCheck> tensors;
  double max_rel_error = 0.0;
  std::string worst_tensor;
  double tolerance = 0.0;
  bool passed = false;
};

/// Builds an encoder from `config`, draws random input and target, and
/// compares the analytic gradient of the mean-squared-error loss against
/// central finite differences (eps = 1e-5) for every parameter tensor.
/// LoRA B matrices are re-drawn from a nonzero uniform so the expert and
/// router paths carry gradient (at the B = 0 init they are all dead).
/// Restricted to desk-scale configs: seq_len <= 8, d_h <= 16, blocks <= 2.
GradCheckReport encoder_grad_check(const EncoderConfig& config, Rng& rng,
                                   double tolerance, std::size_t seq_len = 4);

/// Layer normalization with learned gain/offset (exposed for tests/tools).
Matrix layer_norm(const LayerNormParams& params, const Matrix& x);

}  // namespace glad
