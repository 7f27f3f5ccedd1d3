#include "barfiq/model.hpp"

#include <cmath>

#include "barfiq/errors.hpp"
#include "barfiq/ops.hpp"

namespace barfiq::model {

void ModelConfig::validate(std::size_t window_len) const {
  if (d_model == 0 || d_model % 2 != 0) throw ConfigError("model.d_model must be positive and even");
  if (patch_len == 0 || patch_stride == 0) throw ConfigError("model.patch_len and model.patch_stride must be positive");
  if (patch_len > window_len) {
    throw ConfigError("model.patch_len (" + std::to_string(patch_len) + ") exceeds window length (" +
                      std::to_string(window_len) + ")");
  }
  if (n_experts == 0 || top_k == 0 || top_k > n_experts) throw ConfigError("model.top_k must lie in [1, n_experts]");
  if (d_r == 0 || expert_hidden == 0) throw ConfigError("model.d_r and model.expert_hidden must be positive");
  if (blocks_branch1 == 0 || blocks_branch2 == 0) throw ConfigError("each branch needs at least one block");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("model.dropout must lie in [0, 1)");
  if (!(eps >= 0.0) || !(router_eps >= 0.0)) throw ConfigError("model eps values must be >= 0");
  if (!(rope_base > 0.0)) throw ConfigError("model.rope_base must be positive");
}

std::size_t token_count(std::size_t window_len, std::size_t patch_len, std::size_t stride) {
  if (patch_len > window_len) throw ConfigError("patch length exceeds window length");
  if (stride == 0) throw ConfigError("patch stride must be positive");
  return (window_len - patch_len) / stride + 1;
}

std::pair<Var, Var> qk_normalize(const Var& q, const Var& k, const Var& gamma_q, const Var& gamma_k, double eps) {
  return {ops::scale_by(ops::row_normalize(q, eps), gamma_q), ops::scale_by(ops::row_normalize(k, eps), gamma_k)};
}

Tensor rope_rotate(std::span<const double> vec, std::size_t position, double base) {
  const std::size_t pos[1] = {position};
  return ops::rope_rows(constant(Tensor::row_vector(vec)), pos, base).value();
}

Var linear_attention(const Var& q_rot, const Var& k_rot, const Var& v, double eps) {
  const Var fq = ops::elu_plus_one(q_rot);
  const Var fk = ops::elu_plus_one(k_rot);
  const Var fk_t = ops::transpose(fk);
  const Var kv = ops::matmul(fk_t, v);                                  // d×d_v
  const Var ksum = ops::sum_cols(fk_t);                                 // d×1
  const Var num = ops::matmul(fq, kv);                                  // N×d_v
  const Var den = ops::add_scalar(ops::matmul(fq, ksum), eps);          // N×1
  return ops::div_col(num, den);
}

Var bar_retrieve(const Var& scores, const Var& values, std::vector<double>* alphas) {
  if (scores.rows() != 1 || scores.cols() != values.rows()) {
    throw ShapeError("bar_retrieve: scores " + scores.value().shape_string() + " vs values " +
                     values.value().shape_string());
  }
  const Var alpha = ops::softmax_rows(scores);
  if (alphas) alphas->assign(alpha.value().data().begin(), alpha.value().data().end());
  return ops::matmul(alpha, values);
}

Var bar_aggregate(const Var& current_summary, std::span<const BlockSummary> history, const Var& w_q,
                  const Var& w_k, const Var& w_v, std::size_t d_r, std::vector<double>* alphas) {
  if (history.empty()) throw DomainError("bar_aggregate: no preceding block summaries");
  std::vector<Var> rows;
  rows.reserve(history.size());
  for (const auto& b : history) rows.push_back(b.vector);
  const Var stacked = ops::concat_rows(rows);                      // ℓ×d
  const Var query = ops::matmul(current_summary, w_q);             // 1×d_r
  const Var keys = ops::matmul(stacked, w_k);                      // ℓ×d_r
  const Var scores = ops::scale(ops::matmul(query, ops::transpose(keys)), 1.0 / std::sqrt(static_cast<double>(d_r)));
  return bar_retrieve(scores, ops::matmul(stacked, w_v), alphas);
}

Var swiglu(const Var& x, const Expert& e) {
  return ops::matmul(ops::mul(ops::silu(ops::matmul(x, e.w_u)), ops::matmul(x, e.w_v)), e.w_o);
}

Var moe_ffn(const Var& x, std::span<const Expert> experts, const Var& router, std::size_t k, double eps,
            const ForwardContext& ctx, std::vector<std::vector<std::size_t>>* selected) {
  const std::size_t n = x.rows();
  if (router.cols() != experts.size()) throw ShapeError("moe: router width must equal expert count");
  const Var probs = ops::softmax_rows(ops::matmul(x, router));
  std::vector<std::vector<std::size_t>> sel;
  const Var weights = ops::topk_renormalize(probs, k, eps, &sel);

  Var out = constant(Tensor(n, x.cols()));
  for (std::size_t e = 0; e < experts.size(); ++e) {
    std::vector<std::size_t> routed;
    for (std::size_t t = 0; t < n; ++t)
      for (std::size_t chosen : sel[t])
        if (chosen == e) routed.push_back(t);
    if (routed.empty()) continue;
    if (ctx.expert_evaluations) *ctx.expert_evaluations += routed.size();
    const Var y = swiglu(ops::gather_rows(x, routed), experts[e]);
    const Var w = ops::gather_rows(ops::column(weights, e), routed);
    out = ops::add(out, ops::scatter_rows(ops::mul_col(y, w), routed, n));
  }
  if (selected) *selected = std::move(sel);
  return out;
}

PatchEmbed::PatchEmbed(ParameterSet& ps, const std::string& prefix, const ModelConfig& cfg, std::size_t window_len,
                       std::size_t n_channels, Rng& rng)
    : patch_len_(cfg.patch_len),
      stride_(cfg.patch_stride),
      window_len_(window_len),
      n_channels_(n_channels),
      n_tokens_(model::token_count(window_len, cfg.patch_len, cfg.patch_stride)) {
  const std::size_t fan_in = patch_len_ * n_channels_;
  weight = ps.add(prefix + ".weight", init_uniform(fan_in, cfg.d_model, fan_in, rng));
  bias = ps.add(prefix + ".bias", init_uniform(1, cfg.d_model, fan_in, rng));
}

TokenSequence PatchEmbed::forward(const Tensor& window) const {
  if (window.rows() != window_len_ || window.cols() != n_channels_) {
    throw ShapeError("patch_embed: expected window [" + std::to_string(window_len_) + "x" +
                     std::to_string(n_channels_) + "], got " + window.shape_string());
  }
  Tensor patches(n_tokens_, patch_len_ * n_channels_);
  TokenSequence seq;
  for (std::size_t k = 0; k < n_tokens_; ++k) {
    const std::size_t start = k * stride_;
    seq.positions.push_back(start);
    for (std::size_t p = 0; p < patch_len_; ++p)
      for (std::size_t m = 0; m < n_channels_; ++m) patches(k, p * n_channels_ + m) = window(start + p, m);
  }
  seq.tokens = ops::linear(constant(std::move(patches)), weight, bias);
  return seq;
}

BarBlock::BarBlock(ParameterSet& ps, const std::string& prefix, const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
  const std::size_t d = cfg.d_model;
  w_q = ps.add(prefix + ".attn.w_q", init_uniform(d, d, d, rng));
  w_k = ps.add(prefix + ".attn.w_k", init_uniform(d, d, d, rng));
  w_v = ps.add(prefix + ".attn.w_v", init_uniform(d, d, d, rng));
  w_o = ps.add(prefix + ".attn.w_o", init_uniform(d, d, d, rng));
  gamma_q = ps.add(prefix + ".attn.gamma_q", Tensor::scalar(cfg.gamma_q));
  gamma_k = ps.add(prefix + ".attn.gamma_k", Tensor::scalar(cfg.gamma_k));
  bar_q = ps.add(prefix + ".bar.w_q", init_uniform(d, cfg.d_r, d, rng));
  bar_k = ps.add(prefix + ".bar.w_k", init_uniform(d, cfg.d_r, d, rng));
  bar_v = ps.add(prefix + ".bar.w_v", init_uniform(d, d, d, rng));
  ln_gamma = ps.add(prefix + ".ln.gamma", Tensor(1, d, 1.0));
  ln_beta = ps.add(prefix + ".ln.beta", Tensor(1, d, 0.0));
  router = ps.add(prefix + ".moe.router", init_uniform(d, cfg.n_experts, d, rng));
  for (std::size_t e = 0; e < cfg.n_experts; ++e) {
    const std::string ep = prefix + ".moe.expert" + std::to_string(e);
    Expert ex;
    ex.w_u = ps.add(ep + ".w_u", init_uniform(d, cfg.expert_hidden, d, rng));
    ex.w_v = ps.add(ep + ".w_v", init_uniform(d, cfg.expert_hidden, d, rng));
    ex.w_o = ps.add(ep + ".w_o", init_uniform(cfg.expert_hidden, d, cfg.expert_hidden, rng));
    experts.push_back(ex);
  }
  gate_w = ps.add(prefix + ".gate.w", init_uniform(2 * d, d, 2 * d, rng));
  gate_b = ps.add(prefix + ".gate.b", init_uniform(1, d, 2 * d, rng));
}

Var BarBlock::forward(const Var& h, std::span<const std::size_t> positions, std::vector<BlockSummary>& history,
                      const ForwardContext& ctx, BarTrace* trace) const {
  const Var q = ops::matmul(h, w_q);
  const Var k = ops::matmul(h, w_k);
  const Var v = ops::matmul(h, w_v);
  const auto [qn, kn] = qk_normalize(q, k, gamma_q, gamma_k, cfg_.eps);
  const Var attn = linear_attention(ops::rope_rows(qn, positions, cfg_.rope_base),
                                    ops::rope_rows(kn, positions, cfg_.rope_base), v, cfg_.eps);
  Var projected = ops::matmul(attn, w_o);
  if (ctx.training && cfg_.dropout > 0.0) {
    if (!ctx.dropout_rng) throw ConfigError("training forward requires a dropout generator");
    projected = ops::dropout(projected, cfg_.dropout, *ctx.dropout_rng);
  }
  const Var z = ops::add(h, projected);

  Var u = z;
  if (!history.empty()) {
    BarTraceEntry entry;
    const Var r = bar_aggregate(ops::mean_rows(z), history, bar_q, bar_k, bar_v, cfg_.d_r, &entry.alphas);
    entry.retrieved_norm = r.value().frobenius_norm();
    if (trace) trace->entries.push_back(std::move(entry));
    u = ops::add_row(z, r);
  }

  const Var x = ops::layer_norm_rows(u, ln_gamma, ln_beta, cfg_.eps);
  const Var m = moe_ffn(x, experts, router, cfg_.top_k, cfg_.router_eps, ctx);
  const Var gate = ops::sigmoid(ops::linear(ops::concat_cols({u, m}), gate_w, gate_b));
  history.push_back({ops::mean_rows(h), history.size()});
  return ops::add(u, ops::mul(gate, m));
}

BarBranch::BarBranch(ParameterSet& ps, const std::string& prefix, const ModelConfig& cfg, std::size_t n_blocks,
                     Rng& rng) {
  for (std::size_t b = 0; b < n_blocks; ++b) blocks.emplace_back(ps, prefix + ".block" + std::to_string(b), cfg, rng);
}

Var BarBranch::forward(const TokenSequence& tokens, const ForwardContext& ctx, BarTrace* trace) const {
  std::vector<BlockSummary> history;
  Var h = tokens.tokens;
  for (const auto& block : blocks) h = block.forward(h, tokens.positions, history, ctx, trace);
  return h;
}

DualBranch::DualBranch(ParameterSet& ps, const std::string& prefix, const ModelConfig& cfg, Rng& rng)
    : branch1(ps, prefix + ".branch1", cfg, cfg.blocks_branch1, rng),
      branch2(ps, prefix + ".branch2", cfg, cfg.blocks_branch2, rng) {}

std::pair<Var, Var> DualBranch::forward_branches(const TokenSequence& tokens, const ForwardContext& ctx,
                                                 BarTrace* trace1, BarTrace* trace2) const {
  return {branch1.forward(tokens, ctx, trace1), branch2.forward(tokens, ctx, trace2)};
}

Var DualBranch::forward(const TokenSequence& tokens, const ForwardContext& ctx, BarTrace* trace1,
                        BarTrace* trace2) const {
  auto [h1, h2] = forward_branches(tokens, ctx, trace1, trace2);
  return ops::concat_cols({h1, h2});
}

}  // namespace barfiq::model
