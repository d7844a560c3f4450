#include "glad/mole.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "glad/rng.hpp"

namespace glad {

double MoleLayerParams::effective_multiplier() const {
  return lora_scale / static_cast<double>(rank());
}

void MoleLayerParams::validate() const {
  if (w_shared.empty()) {
    throw InvalidInputError("MoleLayerParams: empty shared weight");
  }
  if (bias.rows() != 1 || bias.cols() != d_out()) {
    throw ShapeError("MoleLayerParams: bias " + bias.shape_str() +
                     " does not match d_out " + std::to_string(d_out()));
  }
  if (experts.empty()) {
    throw InvalidInputError("MoleLayerParams: at least one expert required");
  }
  if (!(lora_scale > 0.0)) {
    throw InvalidInputError("MoleLayerParams: lora_scale must be positive");
  }
  const std::size_t r = experts[0].rank();
  if (r < 1) throw InvalidInputError("MoleLayerParams: rank must be >= 1");
  if (r >= std::min(d_in(), d_out())) {
    throw InvalidInputError("MoleLayerParams: rank " + std::to_string(r) +
                            " not below min(d_in, d_out) = " +
                            std::to_string(std::min(d_in(), d_out())));
  }
  for (const LoraExpert& e : experts) {
    if (e.a.rows() != r || e.a.cols() != d_in() || e.b.rows() != d_out() ||
        e.b.cols() != r) {
      throw ShapeError("MoleLayerParams: expert shapes A " + e.a.shape_str() +
                       ", B " + e.b.shape_str() +
                       " inconsistent with layer (d_in " +
                       std::to_string(d_in()) + ", d_out " +
                       std::to_string(d_out()) + ", rank " + std::to_string(r) +
                       ")");
    }
  }
  router.validate();
  if (router.w_local.rows() != d_in() ||
      router.w_local.cols() != experts.size()) {
    throw ShapeError("MoleLayerParams: w_local " + router.w_local.shape_str() +
                     " does not match d_in x N = " + std::to_string(d_in()) +
                     "x" + std::to_string(experts.size()));
  }
}

MoleLayerParams make_mole_layer(std::size_t d_in, std::size_t d_out,
                                std::size_t num_experts, std::size_t rank,
                                double lora_scale, Rng& rng,
                                bool with_global_router) {
  MoleLayerParams p;
  const double ws = 1.0 / std::sqrt(static_cast<double>(d_in));
  p.w_shared = Matrix::random_uniform(d_out, d_in, -ws, ws, rng);
  p.bias = Matrix(1, d_out);
  p.lora_scale = lora_scale;
  p.experts.reserve(num_experts);
  for (std::size_t i = 0; i < num_experts; ++i) {
    LoraExpert e;
    e.a = Matrix::random_uniform(rank, d_in, -ws, ws, rng);
    e.b = Matrix(d_out, rank);  // zero: fresh layer equals the shared path
    p.experts.push_back(std::move(e));
  }
  if (with_global_router) {
    p.router.w_global = Matrix::random_uniform(d_in, num_experts, -ws, ws, rng);
  }
  p.router.w_local = Matrix::random_uniform(d_in, num_experts, -ws, ws, rng);
  p.router.w_fusion = Matrix::random_uniform(d_in, 2, -ws, ws, rng);
  p.validate();
  return p;
}

Matrix lora_apply(const LoraExpert& expert, const Matrix& x) {
  if (x.cols() != expert.a.cols()) {
    throw ShapeError("lora_apply: input " + x.shape_str() +
                     " incompatible with A " + expert.a.shape_str());
  }
  return matmul_nt(matmul_nt(x, expert.a), expert.b);
}

namespace {

void check_forward_shapes(const MoleLayerParams& params, const Matrix& x_in,
                          const Matrix& expert_weights) {
  if (x_in.cols() != params.d_in()) {
    throw ShapeError("mole_forward: input " + x_in.shape_str() +
                     " incompatible with shared weight " +
                     params.w_shared.shape_str());
  }
  if (expert_weights.rows() != x_in.rows()) {
    throw ShapeError("mole_forward: expert weights " +
                     expert_weights.shape_str() + " vs input " +
                     x_in.shape_str() + " frame mismatch");
  }
  if (expert_weights.cols() != params.num_experts()) {
    throw ShapeError("mole_forward: expert weights " +
                     expert_weights.shape_str() + " do not match N = " +
                     std::to_string(params.num_experts()) + " experts");
  }
}

}  // namespace

Matrix mole_forward(const MoleLayerParams& params, const Matrix& x_in,
                    const Matrix& expert_weights) {
  params.validate();
  check_forward_shapes(params, x_in, expert_weights);

  Matrix y = matmul_nt(x_in, params.w_shared);
  const double mult = params.effective_multiplier();
  for (std::size_t i = 0; i < params.num_experts(); ++i) {
    const Matrix path = lora_apply(params.experts[i], x_in);
    for (std::size_t t = 0; t < y.rows(); ++t) {
      const double w = mult * expert_weights(t, i);
      if (w == 0.0) continue;
      double* y_row = y.row_ptr(t);
      const double* p_row = path.row_ptr(t);
      for (std::size_t j = 0; j < y.cols(); ++j) y_row[j] += w * p_row[j];
    }
  }
  for (std::size_t t = 0; t < y.rows(); ++t) {
    double* y_row = y.row_ptr(t);
    for (std::size_t j = 0; j < y.cols(); ++j) y_row[j] += params.bias(0, j);
  }
  return y;
}

MoleGradients mole_backward(const MoleLayerParams& params, const Matrix& x_in,
                            const Matrix& expert_weights,
                            const Matrix& upstream_grad) {
  params.validate();
  check_forward_shapes(params, x_in, expert_weights);
  if (upstream_grad.rows() != x_in.rows() ||
      upstream_grad.cols() != params.d_out()) {
    throw ShapeError("mole_backward: upstream " + upstream_grad.shape_str() +
                     " does not match output " +
                     std::to_string(x_in.rows()) + "x" +
                     std::to_string(params.d_out()));
  }

  MoleGradients g;
  g.w_shared = matmul_tn(upstream_grad, x_in);
  g.bias = col_sums(upstream_grad);
  g.x_in = matmul(upstream_grad, params.w_shared);
  g.expert_weights = Matrix(expert_weights.rows(), expert_weights.cols());
  g.experts.resize(params.num_experts());

  const double mult = params.effective_multiplier();
  const std::size_t T = x_in.rows();
  for (std::size_t i = 0; i < params.num_experts(); ++i) {
    const LoraExpert& e = params.experts[i];
    const Matrix u = matmul_nt(x_in, e.a);  // T x r
    const Matrix v = matmul_nt(u, e.b);     // T x d_out

    // dV = mult * diag(P[:,i]) * upstream; dP[t,i] = mult * <G_t, V_t>.
    Matrix dv(T, params.d_out());
    for (std::size_t t = 0; t < T; ++t) {
      const double w = mult * expert_weights(t, i);
      const double* g_row = upstream_grad.row_ptr(t);
      const double* v_row = v.row_ptr(t);
      double* dv_row = dv.row_ptr(t);
      double dot = 0.0;
      for (std::size_t j = 0; j < params.d_out(); ++j) {
        dv_row[j] = w * g_row[j];
        dot += g_row[j] * v_row[j];
      }
      g.expert_weights(t, i) = mult * dot;
    }

    g.experts[i].b = matmul_tn(dv, u);      // d_out x r
    const Matrix du = matmul(dv, e.b);      // T x r
    g.experts[i].a = matmul_tn(du, x_in);   // r x d_in
    g.x_in += matmul(du, e.a);
  }
  return g;
}

std::int64_t count_mole_params(std::size_t d_in, std::size_t d_out,
                               std::size_t num_experts, std::size_t rank,
                               bool include_global_router) {
  const std::int64_t din = static_cast<std::int64_t>(d_in);
  const std::int64_t dout = static_cast<std::int64_t>(d_out);
  const std::int64_t n = static_cast<std::int64_t>(num_experts);
  const std::int64_t r = static_cast<std::int64_t>(rank);
  std::int64_t count = dout * din + dout;   // shared weight + bias
  count += n * r * (din + dout);            // LoRA experts
  count += din * n;                         // local router
  count += 2 * din;                         // fusion router
  if (include_global_router) count += din * n;
  return count;
}

std::int64_t count_params(const MoleLayerParams& params,
                          bool include_global_router) {
  return count_mole_params(params.d_in(), params.d_out(), params.num_experts(),
                           params.rank(), include_global_router);
}

namespace {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
}

Matrix matrix_from_json(const json& j) {
  if (!j.is_object() || !j.contains("rows") || !j.contains("cols") ||
      !j.contains("data")) {
    throw InvalidInputError(
        "matrix JSON must be {rows, cols, data[row-major]}");
  }
  return Matrix(j.at("rows").get<std::size_t>(),
                j.at("cols").get<std::size_t>(),
                j.at("data").get<std::vector<double>>());
}

}  // namespace

void save_mole_json(std::ostream& os, const MoleLayerParams& params) {
  params.validate();
  json experts = json::array();
  for (const LoraExpert& e : params.experts) {
    experts.push_back(
        {{"a", matrix_to_json(e.a)}, {"b", matrix_to_json(e.b)}});
  }
  json j{{"w_shared", matrix_to_json(params.w_shared)},
         {"bias", matrix_to_json(params.bias)},
         {"lora_scale", params.lora_scale},
         {"experts", experts},
         {"w_local", matrix_to_json(params.router.w_local)},
         {"w_fusion", matrix_to_json(params.router.w_fusion)}};
  if (!params.router.w_global.empty()) {
    j["w_global"] = matrix_to_json(params.router.w_global);
  }
  os << j.dump(2) << '\n';
}

MoleLayerParams load_mole_json(std::istream& is) {
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw InvalidInputError(std::string("load_mole_json: bad JSON: ") +
                            e.what());
  }
  try {
    MoleLayerParams p;
    p.w_shared = matrix_from_json(j.at("w_shared"));
    p.bias = matrix_from_json(j.at("bias"));
    p.lora_scale = j.at("lora_scale").get<double>();
    for (const json& je : j.at("experts")) {
      LoraExpert e;
      e.a = matrix_from_json(je.at("a"));
      e.b = matrix_from_json(je.at("b"));
      p.experts.push_back(std::move(e));
    }
    p.router.w_local = matrix_from_json(j.at("w_local"));
    p.router.w_fusion = matrix_from_json(j.at("w_fusion"));
    if (j.contains("w_global")) {
      p.router.w_global = matrix_from_json(j.at("w_global"));
    }
    p.validate();
    return p;
  } catch (const json::exception& e) {
    throw InvalidInputError(std::string("load_mole_json: ") + e.what());
  }
}

}  // namespace glad
