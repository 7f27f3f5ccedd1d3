#include "barfiq/head.hpp"

#include <cmath>

#include "json.hpp"

#include "barfiq/errors.hpp"
#include "barfiq/ops.hpp"

namespace barfiq::head {

void HeadConfig::validate() const {
  if (hidden == 0) throw ConfigError("head.hidden must be positive");
  if (!(ln_eps > 0.0) || !(circle_eps >= 0.0)) throw ConfigError("head eps values invalid");
}

void LossConfig::validate() const {
  if (!(lambda >= 0.0)) throw ConfigError("loss lambda must be >= 0");
  if (!(eps >= 0.0)) throw ConfigError("loss eps must be >= 0");
}

Forecast circle_normalize(double cos_hat, double sin_hat, double eps) {
  Forecast f;
  f.cos_hat = cos_hat;
  f.sin_hat = sin_hat;
  const double n = std::hypot(cos_hat, sin_hat);
  f.degenerate = n == 0.0;
  if (f.degenerate) return f;  // (1, 0), phi 0
  f.cos_norm = cos_hat / (n + eps);
  f.sin_norm = sin_hat / (n + eps);
  f.phi_hat = std::atan2(f.sin_norm, f.cos_norm);
  return f;
}

ForecastHead::ForecastHead(ParameterSet& ps, const std::string& prefix, const HeadConfig& cfg, std::size_t d_in,
                           Rng& rng)
    : cfg_(cfg) {
  cfg_.validate();
  ln_gamma = ps.add(prefix + ".ln.gamma", Tensor(1, d_in, 1.0));
  ln_beta = ps.add(prefix + ".ln.beta", Tensor(1, d_in, 0.0));
  w1 = ps.add(prefix + ".mlp.w1", init_uniform(d_in, cfg_.hidden, d_in, rng));
  b1 = ps.add(prefix + ".mlp.b1", init_uniform(1, cfg_.hidden, d_in, rng));
  w2 = ps.add(prefix + ".mlp.w2", init_uniform(cfg_.hidden, 2, cfg_.hidden, rng));
  b2 = ps.add(prefix + ".mlp.b2", init_uniform(1, 2, cfg_.hidden, rng));
}

HeadOutput ForecastHead::forward(const Var& q) const {
  const Var pooled = ops::mean_rows(ops::layer_norm_rows(q, ln_gamma, ln_beta, cfg_.ln_eps));
  const Var raw = ops::linear(ops::gelu(ops::linear(pooled, w1, b1)), w2, b2);
  HeadOutput out;
  out.normalized = ops::div_col(raw, ops::add_scalar(ops::row_norm(raw), cfg_.circle_eps));
  out.forecast = circle_normalize(raw.value()[0], raw.value()[1], cfg_.circle_eps);
  return out;
}

namespace {

Var target_var(const data::CircularTarget& t) { return constant(Tensor(1, 2, {t.cos_c, t.sin_c})); }

}  // namespace

Var circular_loss(const Var& pred, const data::CircularTarget& target) {
  return ops::sum_all(ops::square(ops::sub(pred, target_var(target))));
}

Var cosine_loss(const Var& pred, const data::CircularTarget& target, double eps) {
  const double tn = std::hypot(target.cos_c, target.sin_c);
  const Var dot = ops::sum_all(ops::mul(pred, target_var(target)));
  const Var denom = ops::add_scalar(ops::scale(ops::row_norm(pred), tn), eps);
  return ops::add_scalar(ops::scale(ops::div(dot, denom), -1.0), 1.0);
}

Var total_loss(const Var& pred, const data::CircularTarget& target, const LossConfig& cfg) {
  const Var circ = circular_loss(pred, target);
  if (cfg.lambda == 0.0) return circ;
  return ops::add(circ, ops::scale(cosine_loss(pred, target, cfg.eps), cfg.lambda));
}

double circular_loss(std::array<double, 2> pred, std::array<double, 2> target) {
  const double a = pred[0] - target[0], b = pred[1] - target[1];
  return a * a + b * b;
}

double cosine_loss(std::array<double, 2> pred, std::array<double, 2> target, double eps) {
  const double dot = pred[0] * target[0] + pred[1] * target[1];
  return 1.0 - dot / (std::hypot(pred[0], pred[1]) * std::hypot(target[0], target[1]) + eps);
}

double total_loss(std::array<double, 2> pred, std::array<double, 2> target, const LossConfig& cfg) {
  return circular_loss(pred, target) + cfg.lambda * cosine_loss(pred, target, cfg.eps);
}

WrappedMetrics wrapped_error_metrics(std::span<const double> phi_hat, std::span<const double> phi_true) {
  if (phi_hat.empty()) throw DomainError("wrapped_error_metrics: empty input");
  if (phi_hat.size() != phi_true.size()) throw DomainError("wrapped_error_metrics: length mismatch");
  WrappedMetrics m;
  m.n_samples = phi_hat.size();
  for (std::size_t i = 0; i < phi_hat.size(); ++i) {
    const double d = phi_hat[i] - phi_true[i];
    if (!std::isfinite(d)) throw DomainError("wrapped_error_metrics: non-finite phase");
    const double e = std::atan2(std::sin(d), std::cos(d));
    m.mse += e * e;
    m.mae += std::abs(e);
  }
  m.mse /= static_cast<double>(m.n_samples);
  m.mae /= static_cast<double>(m.n_samples);
  m.rmse = std::sqrt(m.mse);
  return m;
}

std::string metrics_to_json(const WrappedMetrics& m) {
  nlohmann::ordered_json j;
  j["mse"] = m.mse;
  j["mae"] = m.mae;
  j["rmse"] = m.rmse;
  j["n_samples"] = m.n_samples;
  return j.dump(2) + "\n";
}

WrappedMetrics metrics_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    WrappedMetrics m;
    m.mse = j.at("mse").get<double>();
    m.mae = j.at("mae").get<double>();
    m.rmse = j.at("rmse").get<double>();
    m.n_samples = j.at("n_samples").get<std::size_t>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed metrics document: ") + e.what());
  }
}

}  // namespace barfiq::head
