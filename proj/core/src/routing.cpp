#include "glad/routing.hpp"

#include <cmath>
#include <string>

namespace glad {

namespace {

void check_row_stochastic(const Matrix& m, const char* what, double tol) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < m.cols(); ++c) {
      const double v = m(r, c);
      if (!(v >= 0.0)) {
        throw InvalidInputError(std::string(what) + ": negative entry at row " +
                                std::to_string(r));
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > tol) {
      throw InvalidInputError(std::string(what) + ": row " + std::to_string(r) +
                              " sums to " + std::to_string(sum));
    }
  }
}

void check_route_shapes(const Matrix& x, const Matrix& w, const char* op) {
  if (x.cols() != w.rows()) {
    throw ShapeError(std::string(op) + ": input " + x.shape_str() +
                     " incompatible with router weights " + w.shape_str());
  }
}

}  // namespace

void RouterParams::validate() const {
  if (w_local.empty() || w_local.cols() < 1) {
    throw InvalidInputError("RouterParams: w_local must have N >= 1 columns");
  }
  if (w_fusion.cols() != 2) {
    throw ShapeError("RouterParams: w_fusion must have 2 columns, got " +
                     w_fusion.shape_str());
  }
  if (w_fusion.rows() != w_local.rows()) {
    throw ShapeError("RouterParams: w_local " + w_local.shape_str() +
                     " and w_fusion " + w_fusion.shape_str() +
                     " disagree on row count");
  }
  if (!w_global.empty()) {
    if (w_global.rows() != w_local.rows() || w_global.cols() != w_local.cols()) {
      throw ShapeError("RouterParams: w_global " + w_global.shape_str() +
                       " does not match w_local " + w_local.shape_str());
    }
  }
}

ExpertDistribution::ExpertDistribution(Matrix p) : probs(std::move(p)) {
  check_row_stochastic(probs, "ExpertDistribution", 1e-9);
}

FusionWeights::FusionWeights(Matrix a) : alpha(std::move(a)) {
  if (alpha.cols() != 2) {
    throw ShapeError("FusionWeights: expected T x 2, got " + alpha.shape_str());
  }
  check_row_stochastic(alpha, "FusionWeights", 1e-9);
}

ExpertDistribution global_route(const Matrix& x_s, const RouterParams& params) {
  if (params.w_global.empty()) {
    throw InvalidInputError("global_route: RouterParams has no w_global");
  }
  check_route_shapes(x_s, params.w_global, "global_route");
  return ExpertDistribution(softmax_rows(matmul(x_s, params.w_global)));
}

ExpertDistribution local_route(const Matrix& x_in, const RouterParams& params) {
  check_route_shapes(x_in, params.w_local, "local_route");
  return ExpertDistribution(softmax_rows(matmul(x_in, params.w_local)));
}

FusionWeights fusion_weights(const Matrix& x_in, const RouterParams& params) {
  check_route_shapes(x_in, params.w_fusion, "fusion_weights");
  return FusionWeights(softmax_rows(matmul(x_in, params.w_fusion)));
}

ExpertDistribution fuse(const ExpertDistribution& p_global,
                        const ExpertDistribution& p_local,
                        const FusionWeights& alpha) {
  const Matrix& g = p_global.probs;
  const Matrix& l = p_local.probs;
  if (!g.same_shape(l)) {
    throw ShapeError("fuse: P_global " + g.shape_str() + " vs P_local " +
                     l.shape_str());
  }
  if (alpha.alpha.rows() != g.rows()) {
    throw ShapeError("fuse: alpha " + alpha.alpha.shape_str() +
                     " row count does not match distributions " +
                     g.shape_str());
  }
  Matrix fused(g.rows(), g.cols());
  for (std::size_t t = 0; t < g.rows(); ++t) {
    const double a0 = alpha.alpha(t, 0);
    const double a1 = alpha.alpha(t, 1);
    for (std::size_t i = 0; i < g.cols(); ++i) {
      fused(t, i) = a0 * g(t, i) + a1 * l(t, i);
    }
  }
  ExpertDistribution out;
  out.probs = std::move(fused);  // convexity preserves row-stochasticity
  return out;
}

Matrix static_fuse(const ExpertDistribution& p_global,
                   const ExpertDistribution& p_local) {
  if (!p_global.probs.same_shape(p_local.probs)) {
    throw ShapeError("static_fuse: P_global " + p_global.probs.shape_str() +
                     " vs P_local " + p_local.probs.shape_str());
  }
  return p_global.probs + p_local.probs;
}

}  // namespace glad
