#include "barfiq/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "barfiq/errors.hpp"

namespace barfiq::training {

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("train.lr must be positive");
  if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (max_epochs == 0) throw ConfigError("train.max_epochs must be positive");
  if (patience == 0) throw ConfigError("train.patience must be positive");
  if (!(clip_norm > 0.0)) throw ConfigError("train.clip_norm must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("train betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("train.adam_eps must be positive");
}

void optimizer_step(ParameterSet& params, AdamState& state, const TrainConfig& cfg) {
  for (const auto& [name, v] : params.params())
    for (double g : v.grad().data())
      if (!std::isfinite(g)) throw NumericalError("non-finite gradient in parameter " + name);

  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (auto& [name, v] : params.params()) {
    Tensor& theta = v.mutable_value();
    const Tensor& g = v.grad();
    auto [mit, m_new] = state.m.try_emplace(name, theta.rows(), theta.cols());
    auto [vit, v_new] = state.v.try_emplace(name, theta.rows(), theta.cols());
    Tensor& m = mit->second;
    Tensor& s = vit->second;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      s[i] = cfg.beta2 * s[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = s[i] / bc2;
      theta[i] -= cfg.lr * (m_hat / (std::sqrt(v_hat) + cfg.adam_eps) + cfg.weight_decay * theta[i]);
    }
  }
}

double clip_gradients(ParameterSet& params, double max_norm) {
  if (!(max_norm > 0.0)) throw ConfigError("clip norm must be positive");
  const double norm = params.grad_norm();
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& [_, v] : params.params())
      for (double& g : v.mutable_grad().data()) g *= s;
  }
  return norm;
}

Evaluation evaluate(const BarfiqNetwork& net, std::span<const data::Sample> samples) {
  Evaluation ev;
  ev.phi_hat.reserve(samples.size());
  ev.phi_true.reserve(samples.size());
  const ForwardContext ctx;
  for (const auto& s : samples) {
    ev.phi_hat.push_back(net.forward(s.x.values, ctx).forecast.phi_hat);
    ev.phi_true.push_back(s.y.angle());
  }
  ev.metrics = head::wrapped_error_metrics(ev.phi_hat, ev.phi_true);
  return ev;
}

TrainResult train(const data::DatasetSplit& split, const NetworkConfig& net_cfg, const TrainConfig& cfg,
                  const head::LossConfig& loss_cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  loss_cfg.validate();
  if (split.train.empty() || split.val.empty() || split.test.empty())
    throw DataError("training needs non-empty train, validation and test splits");

  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t L = split.train.front().x.values.rows();
  const std::size_t M = split.train.front().x.values.cols();
  TrainResult result;
  result.network = std::make_unique<BarfiqNetwork>(net_cfg, L, M, cfg.seed);
  BarfiqNetwork& net = *result.network;
  ParameterSet& params = net.parameters();

  // Separate streams for initialization, shuffling and dropout.
  Rng shuffle_rng(cfg.seed ^ 0x53485546464c45ULL);
  Rng dropout_rng(cfg.seed ^ 0x44524f504f5554ULL);
  ForwardContext ctx;
  ctx.training = true;
  ctx.dropout_rng = &dropout_rng;

  AdamState adam;
  std::vector<std::size_t> order(split.train.size());
  RunReport& report = result.report;
  double best_mae = std::numeric_limits<double>::infinity();
  ParameterSet::Snapshot best = params.snapshot();
  std::size_t since_best = 0;

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    EpochRecord rec;
    rec.epoch = epoch;
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const double inv_b = 1.0 / static_cast<double>(stop - start);
      const ParameterSet::Snapshot last_good = params.snapshot();
      params.zero_grad();
      for (std::size_t i = start; i < stop; ++i) {
        const data::Sample& s = split.train[order[i]];
        const head::HeadOutput out = net.forward(s.x.values, ctx);
        const Var loss = head::total_loss(out.normalized, s.y, loss_cfg);
        const double lv = loss.item();
        if (!std::isfinite(lv)) {
          params.restore(last_good);
          throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch) + ", sample " +
                               std::to_string(s.target_index));
        }
        loss_sum += lv;
        backward(loss, inv_b);
      }
      rec.max_grad_norm = std::max(rec.max_grad_norm, clip_gradients(params, cfg.clip_norm));
      rec.max_clipped_norm = std::max(rec.max_clipped_norm, params.grad_norm());
      optimizer_step(params, adam, cfg);
    }
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    const head::WrappedMetrics val = evaluate(net, split.val).metrics;
    rec.val_mae = val.mae;
    rec.val_mse = val.mse;
    report.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (val.mae < best_mae) {
      best_mae = val.mae;
      best = params.snapshot();
      report.best_epoch = epoch;
      report.val_metrics = val;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      report.stopped_early = epoch + 1 < cfg.max_epochs;
      break;
    }
  }

  params.restore(best);
  params.zero_grad();
  report.test_metrics = evaluate(net, split.test).metrics;
  report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

Evaluation persistence_baseline(const data::DatasetSplit& split, std::span<const data::Sample> samples) {
  Evaluation ev;
  for (const auto& s : samples) {
    ev.phi_hat.push_back(split.raw_value(s, s.x.values.rows() - 1, data::kDeltaPhi));
    ev.phi_true.push_back(s.y.angle());
  }
  ev.metrics = head::wrapped_error_metrics(ev.phi_hat, ev.phi_true);
  return ev;
}

Evaluation constant_mean_baseline(const data::DatasetSplit& split, std::span<const data::Sample> samples) {
  if (split.train.empty()) throw DomainError("constant-mean baseline needs training samples");
  double sc = 0.0, ss = 0.0;
  for (const auto& s : split.train) {
    sc += s.y.cos_c;
    ss += s.y.sin_c;
  }
  const double mean = std::atan2(ss, sc);
  Evaluation ev;
  for (const auto& s : samples) {
    ev.phi_hat.push_back(mean);
    ev.phi_true.push_back(s.y.angle());
  }
  ev.metrics = head::wrapped_error_metrics(ev.phi_hat, ev.phi_true);
  return ev;
}

}  // namespace barfiq::training
