#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "barfiq/autodiff.hpp"
#include "barfiq/init.hpp"
#include "barfiq/parameters.hpp"

namespace barfiq::fusion {

struct FusionConfig {
  std::size_t d_out = 32;
  std::vector<std::size_t> kernel_sizes{3, 5, 7};
  std::size_t reduction = 4;
  bool use_channel_attention = true;
  bool use_spatial_attention = true;

  void validate() const;
  std::string variant() const;  // ca_sa | sa | ca | none
  void set_variant(std::string_view name);
};

// Linear-in -> depthwise multiscale temporal conv -> linear-out.
struct ConvPathway {
  Var lin_in_w, lin_in_b;
  std::vector<Var> kernels;  // one c×k matrix per kernel size
  Var lin_out_w, lin_out_b;
};

struct ChannelGate {
  Var w1;  // d×(d/r)
  Var w2;  // (d/r)×d
};

struct SpatialGate {
  Var w;  // 2×1, applied to [avg_c; max_c]
  Var b;  // 1×1
};

struct AttentionTrace {
  Tensor channel_gate;  // 1×d
  Tensor spatial_gate;  // T×1
};

Var fuse_project(const std::vector<Var>& branch_outputs, const Var& w, const Var& b);

/// Sum over kernels of depthwise zero-padded 1-D temporal convolutions.
Var multiscale_conv(const Var& x, const std::vector<Var>& kernels);

Var conv_pathway(const Var& x, const ConvPathway& p);

/// X1 = X0 + C ⊙ sigmoid(W2 ReLU(W1 mean_t(C))), C = pathway(X0).
Var channel_attention(const Var& x0, const ConvPathway& p, const ChannelGate& g, Tensor* gate_out = nullptr);

/// X2 = X1 + S ⊙ sigmoid(conv1x1([avg_c(S); max_c(S)])), S = pathway(X1).
Var spatial_attention(const Var& x1, const ConvPathway& p, const SpatialGate& g, Tensor* gate_out = nullptr);

class FusionBlock {
 public:
  FusionBlock(ParameterSet& ps, const std::string& prefix, const FusionConfig& cfg, std::size_t branch_width,
              std::size_t d_model, Rng& rng);

  Var forward(const std::vector<Var>& branch_outputs, AttentionTrace* trace = nullptr) const;

  const FusionConfig& config() const { return cfg_; }

  Var proj_w, proj_b;
  ConvPathway ca_path, sa_path;
  ChannelGate ca_gate;
  SpatialGate sa_gate;
  Var out_w, out_b;

 private:
  FusionConfig cfg_;
};

}  // namespace barfiq::fusion
