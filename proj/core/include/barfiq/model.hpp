#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "barfiq/autodiff.hpp"
#include "barfiq/init.hpp"
#include "barfiq/parameters.hpp"

namespace barfiq::model {

struct ModelConfig {
  std::size_t d_model = 32;
  std::size_t patch_len = 4;
  std::size_t patch_stride = 4;
  std::size_t blocks_branch1 = 2;
  std::size_t blocks_branch2 = 2;
  std::size_t n_experts = 4;
  std::size_t top_k = 2;
  std::size_t d_r = 16;
  std::size_t expert_hidden = 32;
  double gamma_q = 1.0;
  double gamma_k = 1.0;
  double rope_base = 10000.0;
  double eps = 1e-6;
  double router_eps = 1e-8;
  double dropout = 0.1;

  void validate(std::size_t window_len) const;
};

/// floor((L - P) / stride) + 1; throws ConfigError when P > L.
std::size_t token_count(std::size_t window_len, std::size_t patch_len, std::size_t stride);

struct TokenSequence {
  Var tokens;                           // N×d
  std::vector<std::size_t> positions;  // patch start index per token
};

struct BlockSummary {
  Var vector;  // 1×d
  std::size_t depth = 0;
};

struct BarTraceEntry {
  std::vector<double> alphas;
  double retrieved_norm = 0.0;
};

// One entry per block that performed retrieval (block 0 never does).
struct BarTrace {
  std::vector<BarTraceEntry> entries;
};

// ---- building blocks (usable standalone and inside the network) ----

/// γ·v / (||v||_2 + eps) applied to every row of q and k.
std::pair<Var, Var> qk_normalize(const Var& q, const Var& k, const Var& gamma_q, const Var& gamma_k, double eps);

Tensor rope_rotate(std::span<const double> vec, std::size_t position, double base);

/// Kernelized attention with φ(x) = ELU(x) + 1, evaluated as
/// φ(Q)[φ(K)^T V] / (φ(Q)[φ(K)^T 1] + eps), linear in N.
Var linear_attention(const Var& q_rot, const Var& k_rot, const Var& v, double eps);

/// Softmax-weighted retrieval r = Σ softmax(scores)_j · values_j.
/// scores is 1×ℓ, values ℓ×d.
Var bar_retrieve(const Var& scores, const Var& values, std::vector<double>* alphas = nullptr);

/// Cross-depth residual retrieval from pooled block summaries:
/// s_j = (c W_q)·(B_j W_k) / sqrt(d_r), r = Σ α_j B_j W_v.
/// Throws DomainError on empty history.
Var bar_aggregate(const Var& current_summary, std::span<const BlockSummary> history, const Var& w_q,
                  const Var& w_k, const Var& w_v, std::size_t d_r, std::vector<double>* alphas = nullptr);

struct Expert {
  Var w_u;  // d×h
  Var w_v;  // d×h
  Var w_o;  // h×d
};

/// [SiLU(x W_u) ⊙ (x W_v)] W_o, row-wise.
Var swiglu(const Var& x, const Expert& e);

/// Sparse top-k mixture of SwiGLU experts. Only routed tokens are evaluated
/// by each expert. `selected` receives the chosen experts per token.
Var moe_ffn(const Var& x, std::span<const Expert> experts, const Var& router, std::size_t k, double eps,
            const ForwardContext& ctx, std::vector<std::vector<std::size_t>>* selected = nullptr);

class PatchEmbed {
 public:
  PatchEmbed(ParameterSet& ps, const std::string& prefix, const ModelConfig& cfg, std::size_t window_len,
             std::size_t n_channels, Rng& rng);

  TokenSequence forward(const Tensor& window) const;
  std::size_t token_count() const { return n_tokens_; }

  Var weight;  // (P·M)×d
  Var bias;    // 1×d

 private:
  std::size_t patch_len_, stride_, window_len_, n_channels_, n_tokens_;
};

class BarBlock {
 public:
  BarBlock(ParameterSet& ps, const std::string& prefix, const ModelConfig& cfg, Rng& rng);

  /// Runs one block on H. Retrieval uses `history` (summaries of earlier
  /// block inputs); afterwards the pooled input of this block is appended.
  Var forward(const Var& h, std::span<const std::size_t> positions, std::vector<BlockSummary>& history,
              const ForwardContext& ctx, BarTrace* trace = nullptr) const;

  Var w_q, w_k, w_v, w_o;
  Var gamma_q, gamma_k;
  Var bar_q, bar_k, bar_v;
  Var ln_gamma, ln_beta;
  Var router;
  std::vector<Expert> experts;
  Var gate_w, gate_b;

 private:
  ModelConfig cfg_;
};

class BarBranch {
 public:
  BarBranch(ParameterSet& ps, const std::string& prefix, const ModelConfig& cfg, std::size_t n_blocks, Rng& rng);

  Var forward(const TokenSequence& tokens, const ForwardContext& ctx, BarTrace* trace = nullptr) const;

  std::vector<BarBlock> blocks;
};

/// Two independent BAR branches over the same tokens, concatenated
/// channel-wise (N×2d).
class DualBranch {
 public:
  DualBranch(ParameterSet& ps, const std::string& prefix, const ModelConfig& cfg, Rng& rng);

  Var forward(const TokenSequence& tokens, const ForwardContext& ctx, BarTrace* trace1 = nullptr,
              BarTrace* trace2 = nullptr) const;
  std::pair<Var, Var> forward_branches(const TokenSequence& tokens, const ForwardContext& ctx,
                                       BarTrace* trace1 = nullptr, BarTrace* trace2 = nullptr) const;

  BarBranch branch1;
  BarBranch branch2;
};

}  // namespace barfiq::model
