#include "barfiq/network.hpp"

#include "barfiq/errors.hpp"

namespace barfiq {

void NetworkConfig::validate(std::size_t window_len) const {
  model.validate(window_len);
  fusion.validate();
  qfm.validate();
  head.validate();
}

namespace {

const NetworkConfig& checked(const NetworkConfig& cfg, std::size_t window_len) {
  cfg.validate(window_len);
  return cfg;
}

}  // namespace

BarfiqNetwork::BarfiqNetwork(const NetworkConfig& cfg, std::size_t window_len, std::size_t n_channels,
                             std::uint64_t init_seed)
    : cfg_(checked(cfg, window_len)),
      window_len_(window_len),
      n_channels_(n_channels),
      init_rng_(init_seed),
      embed_(params_, "embed", cfg_.model, window_len, n_channels, init_rng_),
      branches_(params_, "bar", cfg_.model, init_rng_),
      fusion_(params_, "fusion", cfg_.fusion, 2 * cfg_.model.d_model, cfg_.model.d_model, init_rng_),
      qfm_(params_, "qfm", cfg_.qfm, cfg_.fusion.d_out, init_rng_),
      head_(params_, "head", cfg_.head, cfg_.qfm.d_q, init_rng_) {}

head::HeadOutput BarfiqNetwork::forward(const Tensor& window, const ForwardContext& ctx, NetworkTrace* trace) const {
  ForwardContext local = ctx;
  if (trace) local.expert_evaluations = &trace->expert_evaluations;
  const model::TokenSequence tokens = embed_.forward(window);
  const auto [h1, h2] = branches_.forward_branches(tokens, local, trace ? &trace->branch1 : nullptr,
                                                   trace ? &trace->branch2 : nullptr);
  const Var fused = fusion_.forward({h1, h2}, trace ? &trace->fusion : nullptr);
  if (trace) trace->fused = fused.value();
  const Var q = qfm_.forward(fused, local, trace ? &trace->qfm : nullptr);
  return head_.forward(q);
}

}  // namespace barfiq
