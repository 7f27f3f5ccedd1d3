#pragma once

#include <array>
#include <span>
#include <string>

#include "barfiq/autodiff.hpp"
#include "barfiq/dataio.hpp"
#include "barfiq/init.hpp"
#include "barfiq/parameters.hpp"

namespace barfiq::head {

struct HeadConfig {
  std::size_t hidden = 32;
  double ln_eps = 1e-5;
  double circle_eps = 1e-8;

  void validate() const;
};

struct LossConfig {
  double lambda = 0.0;
  double eps = 1e-8;

  void validate() const;
};

struct Forecast {
  double cos_hat = 0.0, sin_hat = 0.0;    // raw head outputs
  double cos_norm = 1.0, sin_norm = 0.0;  // circle-normalized
  double phi_hat = 0.0;                   // atan2(sin_norm, cos_norm)
  bool degenerate = false;                // raw pair was (0, 0)
};

/// (cos, sin) / (||(cos, sin)|| + eps) and its angle.
Forecast circle_normalize(double cos_hat, double sin_hat, double eps);

struct HeadOutput {
  Var normalized;  // 1×2
  Forecast forecast;
};

class ForecastHead {
 public:
  ForecastHead(ParameterSet& ps, const std::string& prefix, const HeadConfig& cfg, std::size_t d_in, Rng& rng);

  /// LayerNorm -> mean over tokens -> Linear -> GELU -> Linear -> 2 outputs.
  HeadOutput forward(const Var& q) const;

  Var ln_gamma, ln_beta;
  Var w1, b1, w2, b2;

 private:
  HeadConfig cfg_;
};

// ---- losses on a 1×2 prediction ----

Var circular_loss(const Var& pred, const data::CircularTarget& target);
Var cosine_loss(const Var& pred, const data::CircularTarget& target, double eps);
Var total_loss(const Var& pred, const data::CircularTarget& target, const LossConfig& cfg);

double circular_loss(std::array<double, 2> pred, std::array<double, 2> target);
double cosine_loss(std::array<double, 2> pred, std::array<double, 2> target, double eps);
double total_loss(std::array<double, 2> pred, std::array<double, 2> target, const LossConfig& cfg);

// ---- metrics on wrapped angular error ----

struct WrappedMetrics {
  double mse = 0.0;
  double mae = 0.0;
  double rmse = 0.0;
  std::size_t n_samples = 0;
};

/// e_i = atan2(sin(p_i - t_i), cos(p_i - t_i)). Throws DomainError on empty
/// or mismatched inputs.
WrappedMetrics wrapped_error_metrics(std::span<const double> phi_hat, std::span<const double> phi_true);

std::string metrics_to_json(const WrappedMetrics& m);
WrappedMetrics metrics_from_json(const std::string& text);

}  // namespace barfiq::head
