#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "glad/matrix.hpp"
#include "glad/routing.hpp"

namespace glad {

/// One low-rank expert: the update B * A with A (r x d_in), B (d_out x r)
/// and r strictly below min(d_in, d_out).
struct LoraExpert {
  Matrix a;  // r x d_in
  Matrix b;  // d_out x r

  std::size_t rank() const { return a.rows(); }
};

/// Parameters of one MoLE linear layer: a shared dense transform plus N
/// expert-weighted LoRA paths,
///   y_t = W x_t + (lora_scale / r) * sum_i P[t,i] * B_i A_i x_t + bias.
///
/// `router.w_global` is left empty when the layer lives inside an encoder
/// that owns the single shared global router.
struct MoleLayerParams {
  Matrix w_shared;  // d_out x d_in
  Matrix bias;      // 1 x d_out
  std::vector<LoraExpert> experts;
  double lora_scale = 1.0;
  RouterParams router;

  std::size_t d_in() const { return w_shared.cols(); }
  std::size_t d_out() const { return w_shared.rows(); }
  std::size_t num_experts() const { return experts.size(); }
  std::size_t rank() const { return experts.empty() ? 0 : experts[0].rank(); }
  /// lora_scale / rank, the multiplier applied to the expert sum.
  double effective_multiplier() const;

  /// Rejects N = 0, heterogeneous expert shapes, rank >= min(d_in, d_out),
  /// nonpositive lora_scale and router/shape mismatches.
  void validate() const;
};

/// Deterministic construction with LoRA convention A ~ U(+-1/sqrt(d_in)),
/// B = 0, so a fresh layer computes exactly its shared linear transform.
/// Router weights are U(+-1/sqrt(d_in)). `with_global_router` additionally
/// draws router.w_global (standalone use; encoders keep their own).
MoleLayerParams make_mole_layer(std::size_t d_in, std::size_t d_out,
                                std::size_t num_experts, std::size_t rank,
                                double lora_scale, Rng& rng,
                                bool with_global_router = false);

/// Applies one expert to a frame batch: returns x * A^T * B^T (T x d_out),
/// i.e. B A x per frame. No scaling; callers apply lora_scale / r.
Matrix lora_apply(const LoraExpert& expert, const Matrix& x);

/// Eq.-style forward over a frame batch. `expert_weights` is T x N with
/// nonnegative rows; it need not be row-stochastic (the static-sum fusion
/// variant feeds rows that sum to 2).
Matrix mole_forward(const MoleLayerParams& params, const Matrix& x_in,
                    const Matrix& expert_weights);

/// Exact analytic gradients of sum(upstream .* output) for every input
/// tensor of mole_forward.
struct MoleGradients {
  Matrix w_shared;
  Matrix bias;
  std::vector<LoraExpert> experts;  // a/b hold the gradients of a/b
  Matrix x_in;
  Matrix expert_weights;
};

MoleGradients mole_backward(const MoleLayerParams& params, const Matrix& x_in,
                            const Matrix& expert_weights,
                            const Matrix& upstream_grad);

/// Closed-form parameter count for one MoLE layer:
///   shared (d_out*d_in + d_out) + N*r*(d_in + d_out) + d_in*N (local router)
///   + 2*d_in (fusion router) [+ d_in*N when the global router is counted].
std::int64_t count_mole_params(std::size_t d_in, std::size_t d_out,
                               std::size_t num_experts, std::size_t rank,
                               bool include_global_router);

/// Same count taken from a concrete layer.
std::int64_t count_params(const MoleLayerParams& params,
                          bool include_global_router);

/// JSON object with shapes and row-major value arrays; round-trips exactly.
void save_mole_json(std::ostream& os, const MoleLayerParams& params);
MoleLayerParams load_mole_json(std::istream& is);

}  // namespace glad
