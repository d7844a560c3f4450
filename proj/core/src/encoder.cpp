#include "glad/encoder.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "glad/gradcheck.hpp"
#include "glad/rng.hpp"

namespace glad {

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_grad(double x) {
  return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) +
         x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

void add_row_broadcast(Matrix& m, const Matrix& row) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double* out = m.row_ptr(r);
    const double* b = row.row_ptr(0);
    for (std::size_t c = 0; c < m.cols(); ++c) out[c] += b[c];
  }
}

Matrix cols_slice(const Matrix& m, std::size_t c0, std::size_t n) {
  Matrix out(m.rows(), n);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < n; ++c) out(r, c) = m(r, c0 + c);
  return out;
}

void cols_assign(Matrix& dst, const Matrix& src, std::size_t c0) {
  for (std::size_t r = 0; r < src.rows(); ++r)
    for (std::size_t c = 0; c < src.cols(); ++c) dst(r, c0 + c) = src(r, c);
}

Matrix layer_norm_impl(const LayerNormParams& p, const Matrix& x,
                       LayerNormCache* cache) {
  const std::size_t d = x.cols();
  Matrix y(x.rows(), d);
  Matrix x_hat(x.rows(), d);
  std::vector<double> inv_std(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double* in = x.row_ptr(r);
    double mean = 0.0;
    for (std::size_t c = 0; c < d; ++c) mean += in[c];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double dev = in[c] - mean;
      var += dev * dev;
    }
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + kLnEps);
    inv_std[r] = is;
    double* xh = x_hat.row_ptr(r);
    double* out = y.row_ptr(r);
    for (std::size_t c = 0; c < d; ++c) {
      xh[c] = (in[c] - mean) * is;
      out[c] = p.gain(0, c) * xh[c] + p.offset(0, c);
    }
  }
  if (cache) {
    cache->x_hat = std::move(x_hat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

Matrix layer_norm_backward(const LayerNormParams& p, const LayerNormCache& c,
                           const Matrix& dy, Matrix& dgain_acc,
                           Matrix& doffset_acc) {
  const std::size_t d = dy.cols();
  Matrix dx(dy.rows(), d);
  for (std::size_t r = 0; r < dy.rows(); ++r) {
    const double* g = dy.row_ptr(r);
    const double* xh = c.x_hat.row_ptr(r);
    const double is = c.inv_std[r];
    double sum_dxh = 0.0, sum_dxh_xh = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double dxh = g[j] * p.gain(0, j);
      sum_dxh += dxh;
      sum_dxh_xh += dxh * xh[j];
      dgain_acc(0, j) += g[j] * xh[j];
      doffset_acc(0, j) += g[j];
    }
    double* out = dx.row_ptr(r);
    const double inv_d = 1.0 / static_cast<double>(d);
    for (std::size_t j = 0; j < d; ++j) {
      const double dxh = g[j] * p.gain(0, j);
      out[j] = is * (dxh - inv_d * (sum_dxh + xh[j] * sum_dxh_xh));
    }
  }
  return dx;
}

Matrix slot_forward(const SlotParams& slot, const Matrix& x,
                    const Matrix* p_global, FusionMode mode, SlotCache* cache) {
  if (cache) cache->x_in = x;
  if (const auto* lin = std::get_if<LinearParams>(&slot)) {
    Matrix y = matmul_nt(x, lin->weight);
    add_row_broadcast(y, lin->bias);
    return y;
  }
  const auto& m = std::get<MoleLayerParams>(slot);
  Matrix p_local = softmax_rows(matmul(x, m.router.w_local));
  Matrix p;
  Matrix alpha;
  switch (mode) {
    case FusionMode::dynamic: {
      alpha = softmax_rows(matmul(x, m.router.w_fusion));
      p = Matrix(p_local.rows(), p_local.cols());
      for (std::size_t t = 0; t < p.rows(); ++t) {
        const double a0 = alpha(t, 0), a1 = alpha(t, 1);
        for (std::size_t i = 0; i < p.cols(); ++i) {
          p(t, i) = a0 * (*p_global)(t, i) + a1 * p_local(t, i);
        }
      }
      break;
    }
    case FusionMode::static_sum:
      p = *p_global + p_local;
      break;
    case FusionMode::local_only:
      p = p_local;
      break;
  }
  Matrix y = mole_forward(m, x, p);
  if (cache) {
    cache->p = std::move(p);
    cache->p_local = std::move(p_local);
    cache->alpha = std::move(alpha);
  }
  return y;
}

Matrix slot_backward(const SlotParams& slot, const SlotCache& cache,
                     FusionMode mode, const Matrix& upstream,
                     const std::string& prefix,
                     std::map<std::string, Matrix>& grads,
                     const Matrix* p_global, Matrix* d_p_global) {
  if (const auto* lin = std::get_if<LinearParams>(&slot)) {
    grads.at(prefix + ".weight") += matmul_tn(upstream, cache.x_in);
    grads.at(prefix + ".bias") += col_sums(upstream);
    return matmul(upstream, lin->weight);
  }
  const auto& m = std::get<MoleLayerParams>(slot);
  MoleGradients mg = mole_backward(m, cache.x_in, cache.p, upstream);
  grads.at(prefix + ".w_shared") += mg.w_shared;
  grads.at(prefix + ".bias") += mg.bias;
  for (std::size_t i = 0; i < mg.experts.size(); ++i) {
    const std::string ep = prefix + ".expert" + std::to_string(i);
    grads.at(ep + ".a") += mg.experts[i].a;
    grads.at(ep + ".b") += mg.experts[i].b;
  }
  Matrix dx = std::move(mg.x_in);
  const Matrix& dp = mg.expert_weights;
  Matrix dp_local;
  switch (mode) {
    case FusionMode::dynamic: {
      const std::size_t T = dp.rows(), N = dp.cols();
      Matrix dalpha(T, 2);
      dp_local = Matrix(T, N);
      for (std::size_t t = 0; t < T; ++t) {
        const double a0 = cache.alpha(t, 0), a1 = cache.alpha(t, 1);
        double da0 = 0.0, da1 = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
          const double g = dp(t, i);
          da0 += g * (*p_global)(t, i);
          da1 += g * cache.p_local(t, i);
          dp_local(t, i) = a1 * g;
          (*d_p_global)(t, i) += a0 * g;
        }
        dalpha(t, 0) = da0;
        dalpha(t, 1) = da1;
      }
      const Matrix df = softmax_rows_backward(cache.alpha, dalpha);
      grads.at(prefix + ".w_fusion") += matmul_tn(cache.x_in, df);
      dx += matmul_nt(df, m.router.w_fusion);
      break;
    }
    case FusionMode::static_sum:
      dp_local = dp;
      *d_p_global += dp;
      break;
    case FusionMode::local_only:
      dp_local = dp;
      break;
  }
  const Matrix dl = softmax_rows_backward(cache.p_local, dp_local);
  grads.at(prefix + ".w_local") += matmul_tn(cache.x_in, dl);
  dx += matmul_nt(dl, m.router.w_local);
  return dx;
}

struct SlotSpec {
  const char* name;
  std::size_t d_in, d_out;
  bool attention;
};

std::array<SlotSpec, 6> slot_specs(const EncoderConfig& cfg) {
  return {{{"q", cfg.d_h, cfg.d_h, true},
           {"k", cfg.d_h, cfg.d_h, true},
           {"v", cfg.d_h, cfg.d_h, true},
           {"o", cfg.d_h, cfg.d_h, true},
           {"ffn1", cfg.d_h, cfg.d_ffn, false},
           {"ffn2", cfg.d_ffn, cfg.d_h, false}}};
}

bool placement_selects(Placement p, bool attention_slot) {
  switch (p) {
    case Placement::none: return false;
    case Placement::ffn_only: return !attention_slot;
    case Placement::attention_only: return attention_slot;
    case Placement::both: return true;
  }
  return false;
}

SlotParams* block_slot(BlockParams& b, std::size_t idx) {
  SlotParams* slots[6] = {&b.q, &b.k, &b.v, &b.o, &b.ffn1, &b.ffn2};
  return slots[idx];
}

template <typename Block, typename MatPtr>
void visit_block_params(
    const std::string& prefix, Block& b,
    std::vector<std::pair<std::string, MatPtr>>& out) {
  auto visit_ln = [&](const char* name, auto& ln) {
    out.emplace_back(prefix + "." + name + ".gain", &ln.gain);
    out.emplace_back(prefix + "." + name + ".offset", &ln.offset);
  };
  auto visit_slot = [&](const char* name, auto& slot) {
    const std::string sp = prefix + "." + name;
    if (auto* lin = std::get_if<LinearParams>(&slot)) {
      out.emplace_back(sp + ".weight", &lin->weight);
      out.emplace_back(sp + ".bias", &lin->bias);
      return;
    }
    auto& m = std::get<MoleLayerParams>(slot);
    out.emplace_back(sp + ".w_shared", &m.w_shared);
    out.emplace_back(sp + ".bias", &m.bias);
    for (std::size_t i = 0; i < m.experts.size(); ++i) {
      const std::string ep = sp + ".expert" + std::to_string(i);
      out.emplace_back(ep + ".a", &m.experts[i].a);
      out.emplace_back(ep + ".b", &m.experts[i].b);
    }
    out.emplace_back(sp + ".w_local", &m.router.w_local);
    out.emplace_back(sp + ".w_fusion", &m.router.w_fusion);
  };
  visit_ln("ln1", b.ln1);
  visit_slot("q", b.q);
  visit_slot("k", b.k);
  visit_slot("v", b.v);
  visit_slot("o", b.o);
  visit_ln("ln2", b.ln2);
  visit_slot("ffn1", b.ffn1);
  visit_slot("ffn2", b.ffn2);
}

template <typename State, typename MatPtr>
std::vector<std::pair<std::string, MatPtr>> parameter_tensors_impl(State& s) {
  std::vector<std::pair<std::string, MatPtr>> out;
  if (!s.w_global.empty()) out.emplace_back("w_global", &s.w_global);
  for (std::size_t b = 0; b < s.blocks.size(); ++b) {
    visit_block_params("block" + std::to_string(b), s.blocks[b], out);
  }
  out.emplace_back("final_ln.gain", &s.final_ln.gain);
  out.emplace_back("final_ln.offset", &s.final_ln.offset);
  return out;
}

Matrix encode_impl(const EncoderState& state, const Matrix& x_s,
                   EncoderCache* cache) {
  const EncoderConfig& cfg = state.config;
  cfg.validate();
  if (x_s.cols() != cfg.d_h) {
    throw ShapeError("encode: input " + x_s.shape_str() +
                     " does not match d_h = " + std::to_string(cfg.d_h));
  }
  const std::size_t T = x_s.rows();
  const std::size_t H = cfg.num_heads;
  const std::size_t dk = cfg.d_h / H;
  const double att_scale = 1.0 / std::sqrt(static_cast<double>(dk));
  const FusionMode mode = cfg.fusion_mode;

  // The global distribution is computed exactly once per forward pass and
  // shared by every MoLE slot of every block.
  const bool needs_global = cfg.placement != Placement::none &&
                            mode != FusionMode::local_only;
  Matrix p_global;
  if (needs_global) {
    if (state.w_global.empty()) {
      throw InvalidInputError("encode: encoder has no global router weights");
    }
    p_global = softmax_rows(matmul(x_s, state.w_global));
  }
  if (cache) {
    cache->x_s = x_s;
    cache->p_global = p_global;
    cache->blocks.assign(state.blocks.size(), BlockCache{});
  }
  const Matrix* pg = needs_global ? &p_global : nullptr;

  Matrix x = x_s;
  for (std::size_t b = 0; b < state.blocks.size(); ++b) {
    const BlockParams& bp = state.blocks[b];
    BlockCache* bc = cache ? &cache->blocks[b] : nullptr;
    if (bc) bc->x_in = x;

    Matrix n1 = layer_norm_impl(bp.ln1, x, bc ? &bc->ln1 : nullptr);
    Matrix q = slot_forward(bp.q, n1, pg, mode, bc ? &bc->q : nullptr);
    Matrix k = slot_forward(bp.k, n1, pg, mode, bc ? &bc->k : nullptr);
    Matrix v = slot_forward(bp.v, n1, pg, mode, bc ? &bc->v : nullptr);

    Matrix ctx(T, cfg.d_h);
    for (std::size_t h = 0; h < H; ++h) {
      const Matrix qh = cols_slice(q, h * dk, dk);
      const Matrix kh = cols_slice(k, h * dk, dk);
      const Matrix vh = cols_slice(v, h * dk, dk);
      Matrix scores = matmul_nt(qh, kh);
      scores *= att_scale;
      Matrix probs = softmax_rows(scores);
      cols_assign(ctx, matmul(probs, vh), h * dk);
      if (bc) bc->attn_probs.push_back(std::move(probs));
    }
    Matrix attn_out = slot_forward(bp.o, ctx, pg, mode, bc ? &bc->o : nullptr);
    Matrix x_mid = x + attn_out;

    Matrix n2 = layer_norm_impl(bp.ln2, x_mid, bc ? &bc->ln2 : nullptr);
    Matrix f1 = slot_forward(bp.ffn1, n2, pg, mode, bc ? &bc->ffn1 : nullptr);
    Matrix act(f1.rows(), f1.cols());
    for (std::size_t i = 0; i < f1.data().size(); ++i) {
      act.data()[i] = gelu(f1.data()[i]);
    }
    Matrix f2 = slot_forward(bp.ffn2, act, pg, mode, bc ? &bc->ffn2 : nullptr);
    Matrix x_next = x_mid + f2;

    if (bc) {
      bc->n1 = std::move(n1);
      bc->q_out = std::move(q);
      bc->k_out = std::move(k);
      bc->v_out = std::move(v);
      bc->ctx = std::move(ctx);
      bc->x_mid = x_mid;
      bc->n2 = std::move(n2);
      bc->ffn_pre = std::move(f1);
      bc->ffn_act = std::move(act);
    }
    x = std::move(x_next);
  }

  if (cache) cache->pre_final = x;
  Matrix out = layer_norm_impl(state.final_ln, x,
                               cache ? &cache->final_ln : nullptr);
  if (cache) cache->output = out;
  return out;
}

}  // namespace

std::string to_string(Placement p) {
  switch (p) {
    case Placement::none: return "none";
    case Placement::ffn_only: return "ffn_only";
    case Placement::attention_only: return "attention_only";
    case Placement::both: return "both";
  }
  return "?";
}

std::string to_string(FusionMode m) {
  switch (m) {
    case FusionMode::dynamic: return "dynamic";
    case FusionMode::static_sum: return "static_sum";
    case FusionMode::local_only: return "local_only";
  }
  return "?";
}

Placement placement_from_string(const std::string& s) {
  if (s == "none") return Placement::none;
  if (s == "ffn_only") return Placement::ffn_only;
  if (s == "attention_only") return Placement::attention_only;
  if (s == "both") return Placement::both;
  throw ConfigError("unknown placement '" + s +
                    "' (expected none|ffn_only|attention_only|both)");
}

FusionMode fusion_mode_from_string(const std::string& s) {
  if (s == "dynamic") return FusionMode::dynamic;
  if (s == "static_sum") return FusionMode::static_sum;
  if (s == "local_only") return FusionMode::local_only;
  throw ConfigError("unknown fusion_mode '" + s +
                    "' (expected dynamic|static_sum|local_only)");
}

void EncoderConfig::validate() const {
  if (num_blocks < 1) throw ConfigError("num_blocks must be >= 1");
  if (d_h < 1 || num_heads < 1 || d_ffn < 1) {
    throw ConfigError("d_h, num_heads and d_ffn must be >= 1");
  }
  if (d_h % num_heads != 0) {
    throw ConfigError("d_h = " + std::to_string(d_h) +
                      " not divisible by num_heads = " +
                      std::to_string(num_heads));
  }
  if (placement != Placement::none) {
    if (num_experts < 1) throw ConfigError("num_experts must be >= 1");
    if (lora_rank < 1) throw ConfigError("lora_rank must be >= 1");
    if (!(lora_scale > 0.0)) throw ConfigError("lora_scale must be positive");
    const std::size_t min_dim =
        placement == Placement::attention_only ? d_h : std::min(d_h, d_ffn);
    if (lora_rank >= min_dim) {
      throw ConfigError("lora_rank = " + std::to_string(lora_rank) +
                        " must be below the smallest replaced dimension " +
                        std::to_string(min_dim));
    }
  }
}

EncoderConfig encoder_config_from_json(std::istream& is) {
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("encoder config: bad JSON: ") + e.what());
  }
  EncoderConfig cfg;
  try {
    cfg.num_blocks = j.at("num_blocks").get<std::size_t>();
    cfg.d_h = j.at("d_h").get<std::size_t>();
    cfg.num_heads = j.at("num_heads").get<std::size_t>();
    cfg.d_ffn = j.at("d_ffn").get<std::size_t>();
    cfg.num_experts = j.at("num_experts").get<std::size_t>();
    cfg.lora_rank = j.at("lora_rank").get<std::size_t>();
    cfg.lora_scale = j.at("lora_scale").get<double>();
    cfg.placement = placement_from_string(j.at("placement").get<std::string>());
    cfg.fusion_mode =
        fusion_mode_from_string(j.at("fusion_mode").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("encoder config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

void encoder_config_to_json(std::ostream& os, const EncoderConfig& cfg) {
  nlohmann::json j{{"num_blocks", cfg.num_blocks},
                   {"d_h", cfg.d_h},
                   {"num_heads", cfg.num_heads},
                   {"d_ffn", cfg.d_ffn},
                   {"num_experts", cfg.num_experts},
                   {"lora_rank", cfg.lora_rank},
                   {"lora_scale", cfg.lora_scale},
                   {"placement", to_string(cfg.placement)},
                   {"fusion_mode", to_string(cfg.fusion_mode)}};
  os << j.dump(2) << '\n';
}

EncoderState build_encoder(const EncoderConfig& config, Rng& rng) {
  config.validate();
  // Two derived streams: plain-path weights never depend on placement, so
  // builds of different placements from one seed share shared weights.
  Rng shared_rng(rng.next_u64());
  Rng expert_rng(rng.next_u64());

  EncoderState state;
  state.config = config;
  const double gscale = 1.0 / std::sqrt(static_cast<double>(config.d_h));
  if (config.placement != Placement::none) {
    state.w_global = Matrix::random_uniform(config.d_h, config.num_experts,
                                            -gscale, gscale, expert_rng);
  }
  const auto specs = slot_specs(config);
  state.blocks.resize(config.num_blocks);
  for (BlockParams& block : state.blocks) {
    block.ln1 = {Matrix::filled(1, config.d_h, 1.0), Matrix(1, config.d_h)};
    block.ln2 = {Matrix::filled(1, config.d_h, 1.0), Matrix(1, config.d_h)};
    for (std::size_t si = 0; si < specs.size(); ++si) {
      const SlotSpec& spec = specs[si];
      const double ws = 1.0 / std::sqrt(static_cast<double>(spec.d_in));
      Matrix w = Matrix::random_uniform(spec.d_out, spec.d_in, -ws, ws,
                                        shared_rng);
      SlotParams* slot = block_slot(block, si);
      if (placement_selects(config.placement, spec.attention)) {
        MoleLayerParams m;
        m.w_shared = std::move(w);
        m.bias = Matrix(1, spec.d_out);
        m.lora_scale = config.lora_scale;
        m.experts.resize(config.num_experts);
        for (LoraExpert& e : m.experts) {
          e.a = Matrix::random_uniform(config.lora_rank, spec.d_in, -ws, ws,
                                       expert_rng);
          e.b = Matrix(spec.d_out, config.lora_rank);
        }
        m.router.w_local = Matrix::random_uniform(
            spec.d_in, config.num_experts, -ws, ws, expert_rng);
        m.router.w_fusion =
            Matrix::random_uniform(spec.d_in, 2, -ws, ws, expert_rng);
        m.validate();
        *slot = std::move(m);
      } else {
        *slot = LinearParams{std::move(w), Matrix(1, spec.d_out)};
      }
    }
  }
  state.final_ln = {Matrix::filled(1, config.d_h, 1.0), Matrix(1, config.d_h)};
  return state;
}

Matrix encode(const EncoderState& state, const Matrix& x_s) {
  return encode_impl(state, x_s, nullptr);
}

Matrix encode_cached(const EncoderState& state, const Matrix& x_s,
                     EncoderCache& cache) {
  return encode_impl(state, x_s, &cache);
}

ExpertDistribution encoder_global_distribution(const EncoderState& state,
                                               const Matrix& x_s) {
  if (state.w_global.empty()) {
    throw InvalidInputError(
        "encoder_global_distribution: placement none has no global router");
  }
  return ExpertDistribution(softmax_rows(matmul(x_s, state.w_global)));
}

Matrix layer_norm(const LayerNormParams& params, const Matrix& x) {
  return layer_norm_impl(params, x, nullptr);
}

std::vector<std::pair<std::string, Matrix*>> parameter_tensors(
    EncoderState& state) {
  return parameter_tensors_impl<EncoderState, Matrix*>(state);
}

std::vector<std::pair<std::string, const Matrix*>> parameter_tensors(
    const EncoderState& state) {
  return parameter_tensors_impl<const EncoderState, const Matrix*>(state);
}

EncoderGrads encoder_backward(const EncoderState& state,
                              const EncoderCache& cache,
                              const Matrix& output_grad) {
  const EncoderConfig& cfg = state.config;
  if (!output_grad.same_shape(cache.output)) {
    throw ShapeError("encoder_backward: output grad " +
                     output_grad.shape_str() + " vs output " +
                     cache.output.shape_str());
  }
  EncoderGrads eg;
  for (const auto& [name, ptr] : parameter_tensors(state)) {
    eg.tensors.emplace(name, Matrix(ptr->rows(), ptr->cols()));
  }
  const bool has_global = !cache.p_global.empty();
  Matrix d_p_global;
  if (has_global) {
    d_p_global = Matrix(cache.p_global.rows(), cache.p_global.cols());
  }
  const Matrix* pg = has_global ? &cache.p_global : nullptr;
  Matrix* dpg = has_global ? &d_p_global : nullptr;
  const FusionMode mode = cfg.fusion_mode;
  const std::size_t H = cfg.num_heads;
  const std::size_t dk = cfg.d_h / H;
  const double att_scale = 1.0 / std::sqrt(static_cast<double>(dk));

  Matrix dx = layer_norm_backward(state.final_ln, cache.final_ln, output_grad,
                                  eg.tensors.at("final_ln.gain"),
                                  eg.tensors.at("final_ln.offset"));

  for (std::size_t bi = state.blocks.size(); bi-- > 0;) {
    const BlockParams& bp = state.blocks[bi];
    const BlockCache& bc = cache.blocks[bi];
    const std::string pre = "block" + std::to_string(bi);

    // FFN sub-layer: x_next = x_mid + ffn2(gelu(ffn1(ln2(x_mid)))).
    Matrix d_act = slot_backward(bp.ffn2, bc.ffn2, mode, dx, pre + ".ffn2",
                                 eg.tensors, pg, dpg);
    Matrix d_f1(d_act.rows(), d_act.cols());
    for (std::size_t i = 0; i < d_f1.data().size(); ++i) {
      d_f1.data()[i] = d_act.data()[i] * gelu_grad(bc.ffn_pre.data()[i]);
    }
    Matrix d_n2 = slot_backward(bp.ffn1, bc.ffn1, mode, d_f1, pre + ".ffn1",
                                eg.tensors, pg, dpg);
    Matrix d_xmid = dx + layer_norm_backward(bp.ln2, bc.ln2, d_n2,
                                             eg.tensors.at(pre + ".ln2.gain"),
                                             eg.tensors.at(pre + ".ln2.offset"));

    // Attention sub-layer: x_mid = x + o(attention(q, k, v)).
    Matrix d_ctx = slot_backward(bp.o, bc.o, mode, d_xmid, pre + ".o",
                                 eg.tensors, pg, dpg);
    Matrix dq(d_ctx.rows(), cfg.d_h);
    Matrix dk_m(d_ctx.rows(), cfg.d_h);
    Matrix dv(d_ctx.rows(), cfg.d_h);
    for (std::size_t h = 0; h < H; ++h) {
      const Matrix qh = cols_slice(bc.q_out, h * dk, dk);
      const Matrix kh = cols_slice(bc.k_out, h * dk, dk);
      const Matrix vh = cols_slice(bc.v_out, h * dk, dk);
      const Matrix dch = cols_slice(d_ctx, h * dk, dk);
      const Matrix& probs = bc.attn_probs[h];
      const Matrix d_probs = matmul_nt(dch, vh);
      Matrix d_scores = softmax_rows_backward(probs, d_probs);
      d_scores *= att_scale;
      cols_assign(dq, matmul(d_scores, kh), h * dk);
      cols_assign(dk_m, matmul_tn(d_scores, qh), h * dk);
      cols_assign(dv, matmul_tn(probs, dch), h * dk);
    }
    Matrix d_n1 = slot_backward(bp.q, bc.q, mode, dq, pre + ".q", eg.tensors,
                                pg, dpg);
    d_n1 += slot_backward(bp.k, bc.k, mode, dk_m, pre + ".k", eg.tensors, pg,
                          dpg);
    d_n1 += slot_backward(bp.v, bc.v, mode, dv, pre + ".v", eg.tensors, pg,
                          dpg);
    dx = d_xmid + layer_norm_backward(bp.ln1, bc.ln1, d_n1,
                                      eg.tensors.at(pre + ".ln1.gain"),
                                      eg.tensors.at(pre + ".ln1.offset"));
  }

  if (has_global) {
    const Matrix dz = softmax_rows_backward(cache.p_global, d_p_global);
    eg.tensors.at("w_global") += matmul_tn(cache.x_s, dz);
    dx += matmul_nt(dz, state.w_global);
  }
  eg.x_s = std::move(dx);
  return eg;
}

std::vector<std::pair<std::string, std::int64_t>> encoder_param_breakdown(
    const EncoderConfig& cfg) {
  cfg.validate();
  std::vector<std::pair<std::string, std::int64_t>> rows;
  const auto din = [](std::size_t v) { return static_cast<std::int64_t>(v); };
  if (cfg.placement != Placement::none) {
    rows.emplace_back("w_global", din(cfg.d_h) * din(cfg.num_experts));
  }
  const auto specs = slot_specs(cfg);
  for (std::size_t b = 0; b < cfg.num_blocks; ++b) {
    const std::string pre = "block" + std::to_string(b);
    rows.emplace_back(pre + ".ln1", 2 * din(cfg.d_h));
    for (std::size_t si = 0; si < specs.size(); ++si) {
      if (si == 4) rows.emplace_back(pre + ".ln2", 2 * din(cfg.d_h));
      const SlotSpec& s = specs[si];
      std::int64_t count;
      if (placement_selects(cfg.placement, s.attention)) {
        count = count_mole_params(s.d_in, s.d_out, cfg.num_experts,
                                  cfg.lora_rank, /*include_global=*/false);
      } else {
        count = din(s.d_out) * din(s.d_in) + din(s.d_out);
      }
      rows.emplace_back(pre + "." + s.name, count);
    }
  }
  rows.emplace_back("final_ln", 2 * din(cfg.d_h));
  return rows;
}

std::int64_t count_encoder_params(const EncoderConfig& cfg) {
  std::int64_t total = 0;
  for (const auto& [name, count] : encoder_param_breakdown(cfg)) total += count;
  return total;
}

GradCheckReport encoder_grad_check(const EncoderConfig& config, Rng& rng,
                                   double tolerance, std::size_t seq_len) {
  config.validate();
  if (seq_len < 1 || seq_len > 8 || config.d_h > 16 || config.num_blocks > 2) {
    throw ConfigError(
        "encoder_grad_check: desk-scale configs only "
        "(1 <= seq_len <= 8, d_h <= 16, blocks <= 2)");
  }
  EncoderState state = build_encoder(config, rng);
  // Wake the expert paths: at the B = 0 init every LoRA and router gradient
  // vanishes identically and the check would be vacuous.
  for (BlockParams& block : state.blocks) {
    for (std::size_t si = 0; si < 6; ++si) {
      SlotParams* slot = block_slot(block, si);
      if (auto* m = std::get_if<MoleLayerParams>(slot)) {
        for (LoraExpert& e : m->experts) {
          e.b = Matrix::random_uniform(e.b.rows(), e.b.cols(), -0.4, 0.4, rng);
        }
      }
    }
  }
  const Matrix x_s =
      Matrix::random_uniform(seq_len, config.d_h, -1.0, 1.0, rng);
  const Matrix target =
      Matrix::random_uniform(seq_len, config.d_h, -1.0, 1.0, rng);
  const double inv_count = 1.0 / static_cast<double>(x_s.size());

  auto loss_of = [&](const EncoderState& s) {
    const Matrix y = encode(s, x_s);
    double acc = 0.0;
    for (std::size_t i = 0; i < y.data().size(); ++i) {
      const double d = y.data()[i] - target.data()[i];
      acc += d * d;
    }
    return acc * inv_count;
  };

  EncoderCache cache;
  const Matrix y = encode_cached(state, x_s, cache);
  Matrix d_out(y.rows(), y.cols());
  for (std::size_t i = 0; i < y.data().size(); ++i) {
    d_out.data()[i] = 2.0 * (y.data()[i] - target.data()[i]) * inv_count;
  }
  const EncoderGrads analytic = encoder_backward(state, cache, d_out);

  GradCheckReport report;
  report.tolerance = tolerance;
  for (auto& [name, ptr] : parameter_tensors(state)) {
    const std::vector<double> saved = ptr->data();
    auto f = [&](const std::vector<double>& theta) {
      ptr->data() = theta;
      return loss_of(state);
    };
    const std::vector<double> numeric = central_diff(f, saved, 1e-5);
    ptr->data() = saved;
    const Matrix& ga = analytic.tensors.at(name);
    GradCheckReport::TensorCheck check;
    check.name = name;
    check.analytic_norm = frobenius_norm(ga);
    double nn = 0.0;
    for (double v : numeric) nn += v * v;
    check.numeric_norm = std::sqrt(nn);
    check.rel_error = gradient_rel_error(ga.data(), numeric);
    if (check.rel_error >= report.max_rel_error) {
      report.max_rel_error = check.rel_error;
      report.worst_tensor = name;
    }
    report.tensors.push_back(std::move(check));
  }
  report.passed = report.max_rel_error <= tolerance;
  return report;
}

}  // namespace glad
