#pragma once

#include "glad/matrix.hpp"

namespace glad {

/// Weights of the three routing transforms. All routers are dense, bias-free
/// linear maps followed by a row softmax: every expert receives weight, no
/// top-k sparsification.
///
/// `w_global` may be empty when the global router is owned elsewhere (the
/// encoder keeps exactly one global router for all of its layers).
struct RouterParams {
  Matrix w_global;  // d_h x N
  Matrix w_local;   // d_h x N
  Matrix w_fusion;  // d_h x 2

  std::size_t num_experts() const { return w_local.cols(); }
  /// Internal-consistency check; throws ShapeError / InvalidInputError.
  void validate() const;
};

/// Row-stochastic T x N matrix of per-frame expert probabilities.
/// Construction verifies each row sums to 1 within 1e-9 with nonnegative
/// entries.
struct ExpertDistribution {
  Matrix probs;

  ExpertDistribution() = default;
  explicit ExpertDistribution(Matrix p);
};

/// Per-frame fusion weights, T x 2. Column 0 is the global share, column 1
/// the local share; each row is a point on the 1-simplex.
struct FusionWeights {
  Matrix alpha;

  FusionWeights() = default;
  explicit FusionWeights(Matrix a);
};

/// Global expert distribution: softmax over x_s * w_global. Depends only on
/// the raw feature sequence, never on layer inputs.
ExpertDistribution global_route(const Matrix& x_s, const RouterParams& params);

/// Local expert distribution: softmax over x_in * w_local.
ExpertDistribution local_route(const Matrix& x_in, const RouterParams& params);

/// Per-frame fusion weights: softmax over x_in * w_fusion.
FusionWeights fusion_weights(const Matrix& x_in, const RouterParams& params);

/// Convex per-frame combination
///   P[t,i] = alpha0[t] * P_global[t,i] + alpha1[t] * P_local[t,i].
/// The two fusion scalars of frame t broadcast over all N experts. Output is
/// row-stochastic whenever both inputs are.
ExpertDistribution fuse(const ExpertDistribution& p_global,
                        const ExpertDistribution& p_local,
                        const FusionWeights& alpha);

/// Fixed-sum variant: elementwise P_global + P_local. Rows sum to 2; the
/// result is deliberately not renormalized, and MoLE layers accept these
/// weights as-is.
Matrix static_fuse(const ExpertDistribution& p_global,
                   const ExpertDistribution& p_local);

}  // namespace glad
