#include "barfiq/fusion.hpp"

#include <algorithm>

#include "barfiq/errors.hpp"
#include "barfiq/ops.hpp"

namespace barfiq::fusion {

void FusionConfig::validate() const {
  if (d_out == 0) throw ConfigError("fusion.d_out must be positive");
  if (kernel_sizes.empty()) throw ConfigError("fusion.kernel_sizes must not be empty");
  for (std::size_t k : kernel_sizes)
    if (k % 2 == 0) throw ConfigError("fusion kernel sizes must be odd, got " + std::to_string(k));
  if (reduction == 0) throw ConfigError("fusion.reduction must be positive");
}

std::string FusionConfig::variant() const {
  if (use_channel_attention && use_spatial_attention) return "ca_sa";
  if (use_spatial_attention) return "sa";
  if (use_channel_attention) return "ca";
  return "none";
}

void FusionConfig::set_variant(std::string_view name) {
  if (name == "ca_sa") {
    use_channel_attention = use_spatial_attention = true;
  } else if (name == "sa") {
    use_channel_attention = false;
    use_spatial_attention = true;
  } else if (name == "ca") {
    use_channel_attention = true;
    use_spatial_attention = false;
  } else if (name == "none") {
    use_channel_attention = use_spatial_attention = false;
  } else {
    throw ConfigError("unknown fusion variant '" + std::string(name) + "' (expected ca_sa, sa, ca or none)");
  }
}

Var fuse_project(const std::vector<Var>& branch_outputs, const Var& w, const Var& b) {
  if (branch_outputs.empty()) throw ShapeError("fuse_project: no inputs");
  const std::size_t t = branch_outputs.front().rows();
  for (const auto& x : branch_outputs)
    if (x.rows() != t) throw ShapeError("fuse_project: branch outputs disagree on token count");
  return ops::linear(ops::concat_cols(branch_outputs), w, b);
}

Var multiscale_conv(const Var& x, const std::vector<Var>& kernels) {
  if (kernels.empty()) throw ShapeError("multiscale_conv: no kernels");
  Var acc = ops::conv1d_depthwise(x, kernels.front());
  for (std::size_t i = 1; i < kernels.size(); ++i) acc = ops::add(acc, ops::conv1d_depthwise(x, kernels[i]));
  return acc;
}

Var conv_pathway(const Var& x, const ConvPathway& p) {
  const Var h = ops::linear(x, p.lin_in_w, p.lin_in_b);
  return ops::linear(multiscale_conv(h, p.kernels), p.lin_out_w, p.lin_out_b);
}

Var channel_attention(const Var& x0, const ConvPathway& p, const ChannelGate& g, Tensor* gate_out) {
  const Var c = conv_pathway(x0, p);
  const Var z = ops::mean_rows(c);
  const Var a = ops::sigmoid(ops::matmul(ops::relu(ops::matmul(z, g.w1)), g.w2));
  if (gate_out) *gate_out = a.value();
  return ops::add(x0, ops::mul_row(c, a));
}

Var spatial_attention(const Var& x1, const ConvPathway& p, const SpatialGate& g, Tensor* gate_out) {
  const Var s = conv_pathway(x1, p);
  const Var pooled = ops::concat_cols({ops::mean_cols(s), ops::max_cols(s)});
  const Var a = ops::sigmoid(ops::linear(pooled, g.w, g.b));
  if (gate_out) *gate_out = a.value();
  return ops::add(x1, ops::mul_col(s, a));
}

namespace {

ConvPathway make_pathway(ParameterSet& ps, const std::string& prefix, const FusionConfig& cfg, std::size_t d,
                         Rng& rng) {
  ConvPathway p;
  p.lin_in_w = ps.add(prefix + ".lin_in.w", init_uniform(d, d, d, rng));
  p.lin_in_b = ps.add(prefix + ".lin_in.b", init_uniform(1, d, d, rng));
  for (std::size_t k : cfg.kernel_sizes)
    p.kernels.push_back(ps.add(prefix + ".conv" + std::to_string(k), init_uniform(d, k, k, rng)));
  p.lin_out_w = ps.add(prefix + ".lin_out.w", init_uniform(d, d, d, rng));
  p.lin_out_b = ps.add(prefix + ".lin_out.b", init_uniform(1, d, d, rng));
  return p;
}

}  // namespace

FusionBlock::FusionBlock(ParameterSet& ps, const std::string& prefix, const FusionConfig& cfg,
                         std::size_t branch_width, std::size_t d_model, Rng& rng)
    : cfg_(cfg) {
  cfg_.validate();
  const std::size_t d = d_model;
  proj_w = ps.add(prefix + ".proj.w", init_uniform(branch_width, d, branch_width, rng));
  proj_b = ps.add(prefix + ".proj.b", init_uniform(1, d, branch_width, rng));
  if (cfg_.use_channel_attention) {
    ca_path = make_pathway(ps, prefix + ".ca", cfg_, d, rng);
    const std::size_t hidden = std::max<std::size_t>(1, d / cfg_.reduction);
    ca_gate.w1 = ps.add(prefix + ".ca.gate.w1", init_uniform(d, hidden, d, rng));
    ca_gate.w2 = ps.add(prefix + ".ca.gate.w2", init_uniform(hidden, d, hidden, rng));
  }
  if (cfg_.use_spatial_attention) {
    sa_path = make_pathway(ps, prefix + ".sa", cfg_, d, rng);
    sa_gate.w = ps.add(prefix + ".sa.gate.w", init_uniform(2, 1, 2, rng));
    sa_gate.b = ps.add(prefix + ".sa.gate.b", init_uniform(1, 1, 2, rng));
  }
  out_w = ps.add(prefix + ".out.w", init_uniform(d, cfg_.d_out, d, rng));
  out_b = ps.add(prefix + ".out.b", init_uniform(1, cfg_.d_out, d, rng));
}

Var FusionBlock::forward(const std::vector<Var>& branch_outputs, AttentionTrace* trace) const {
  Var x = fuse_project(branch_outputs, proj_w, proj_b);
  if (cfg_.use_channel_attention) x = channel_attention(x, ca_path, ca_gate, trace ? &trace->channel_gate : nullptr);
  if (cfg_.use_spatial_attention) x = spatial_attention(x, sa_path, sa_gate, trace ? &trace->spatial_gate : nullptr);
  return ops::linear(x, out_w, out_b);
}

}  // namespace barfiq::fusion
