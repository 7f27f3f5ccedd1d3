#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "barfiq/dataio.hpp"
#include "barfiq/head.hpp"
#include "barfiq/network.hpp"

namespace barfiq::training {

struct TrainConfig {
  double lr = 1e-3;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 100;
  std::size_t patience = 15;
  double clip_norm = 1.0;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 42;

  void validate() const;
};

struct AdamState {
  std::map<std::string, Tensor> m, v;
  std::size_t step = 0;
};

/// One AdamW update over every parameter using its accumulated gradient:
/// theta -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta).
/// Throws NumericalError (parameters untouched) on a non-finite gradient.
void optimizer_step(ParameterSet& params, AdamState& state, const TrainConfig& cfg);

/// Scales all gradients by max_norm / g when the global norm g exceeds
/// max_norm. Returns the norm before clipping.
double clip_gradients(ParameterSet& params, double max_norm);

struct EpochRecord {
  std::size_t epoch = 0;  // 0-based
  double train_loss = 0.0;
  double val_mae = 0.0;
  double val_mse = 0.0;
  double max_grad_norm = 0.0;       // before clipping
  double max_clipped_norm = 0.0;    // after clipping
};

struct RunReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
  head::WrappedMetrics val_metrics;   // at best epoch
  head::WrappedMetrics test_metrics;  // after restoring the best epoch
  double wall_time_s = 0.0;
};

struct Evaluation {
  head::WrappedMetrics metrics;
  std::vector<double> phi_hat;
  std::vector<double> phi_true;
};

Evaluation evaluate(const BarfiqNetwork& net, std::span<const data::Sample> samples);

using EpochCallback = std::function<void(const EpochRecord&)>;

struct TrainResult {
  RunReport report;
  std::unique_ptr<BarfiqNetwork> network;  // holds best-epoch parameters
};

/// Shuffled mini-batch AdamW with clipping and early stopping on validation
/// wrapped MAE. Deterministic under cfg.seed. Throws NumericalError on a
/// non-finite loss; the network is left at the last good parameters.
TrainResult train(const data::DatasetSplit& split, const NetworkConfig& net_cfg, const TrainConfig& cfg,
                  const head::LossConfig& loss_cfg, const EpochCallback& on_epoch = {});

/// Predicts the next residual phase as the last observed one.
Evaluation persistence_baseline(const data::DatasetSplit& split, std::span<const data::Sample> samples);

/// Predicts the circular mean of the training targets for every sample.
Evaluation constant_mean_baseline(const data::DatasetSplit& split, std::span<const data::Sample> samples);

}  // namespace barfiq::training
