#pragma once

#include <cstdint>
#include <memory>

#include "barfiq/fusion.hpp"
#include "barfiq/head.hpp"
#include "barfiq/model.hpp"
#include "barfiq/qfm.hpp"

namespace barfiq {

struct NetworkConfig {
  model::ModelConfig model;
  fusion::FusionConfig fusion;
  qfm::QfmConfig qfm;
  head::HeadConfig head;

  void validate(std::size_t window_len) const;
};

struct NetworkTrace {
  model::BarTrace branch1, branch2;
  fusion::AttentionTrace fusion;
  qfm::QfmTrace qfm;
  Tensor fused;  // T×d_out
  std::size_t expert_evaluations = 0;
};

/// Patch embedding -> dual BAR branches -> fusion -> QFM -> forecasting head.
/// Holds its own ParameterSet; not copyable.
class BarfiqNetwork {
 public:
  BarfiqNetwork(const NetworkConfig& cfg, std::size_t window_len, std::size_t n_channels, std::uint64_t init_seed);
  BarfiqNetwork(const BarfiqNetwork&) = delete;
  BarfiqNetwork& operator=(const BarfiqNetwork&) = delete;

  head::HeadOutput forward(const Tensor& window, const ForwardContext& ctx, NetworkTrace* trace = nullptr) const;

  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }
  const NetworkConfig& config() const { return cfg_; }
  std::size_t window_len() const { return window_len_; }
  std::size_t n_channels() const { return n_channels_; }

 private:
  NetworkConfig cfg_;
  std::size_t window_len_, n_channels_;
  ParameterSet params_;
  Rng init_rng_;
  model::PatchEmbed embed_;
  model::DualBranch branches_;
  fusion::FusionBlock fusion_;
  qfm::QfmBlock qfm_;
  head::ForecastHead head_;
};

}  // namespace barfiq
