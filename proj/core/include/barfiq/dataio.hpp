#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "barfiq/fringe.hpp"
#include "barfiq/tensor.hpp"

namespace barfiq::data {

/// Synthetic stream parameters. The residual phase follows
/// offset + drift_amp·sin(2πi/drift_period) + AR(1)(ar_coeff, noise_sigma);
/// the real-time estimate is a slow ramp rt_offset + rt_ramp·i.
struct GeneratorConfig {
  std::size_t n_shots = 4000;
  double p0_true = 0.5;
  double c_true = 0.2;
  double theta_step = 0.39269908169872414;  // pi / 8
  double drift_amp = 0.5;
  double drift_period = 400.0;
  double ar_coeff = 0.9;
  double noise_sigma = 0.05;
  double delta_offset = 0.0;
  double rt_ramp = 1e-4;  // stays inside (-pi, pi) over the default stream
  double rt_offset = 0.0;
  std::uint64_t seed = 42;

  void validate() const;
};

struct GeneratedStream {
  std::vector<fringe::ShotRecord> shots;
  std::vector<double> true_delta_phi;  // wrapped
  std::vector<double> true_phi_ai;     // wrapped
};

/// Deterministic under cfg.seed.
GeneratedStream generate_stream(const GeneratorConfig& cfg);

enum Channel : std::size_t {
  kElapsedTime = 0,
  kDt,
  kTheta,
  kRho,
  kPhiRt,
  kDeltaPhi,
  kAuxA,
  kAuxC,
  kAuxR,
  kNumChannels
};

const std::array<std::string, kNumChannels>& channel_names();

/// L×M history; rows are stream indices t_end-L+1 .. t_end.
struct FeatureMatrix {
  Tensor values;
  std::size_t t_end = 0;

  std::size_t t_begin() const { return t_end + 1 - values.rows(); }
};

struct CircularTarget {
  double cos_c = 1.0;
  double sin_c = 0.0;

  static CircularTarget from_angle(double phi);
  double angle() const;
};

struct Sample {
  FeatureMatrix x;
  CircularTarget y;
  std::size_t target_index = 0;  // stream index of the forecast step (t_end + 1)
};

/// Stride-1 windows of length L with next-step targets. Any window whose
/// rows or target touch a missing phase is dropped. L exceeding the stream
/// yields an empty list.
std::vector<Sample> build_windows(std::span<const fringe::ShotRecord> shots,
                                  std::span<const fringe::PhaseResult> phases, std::size_t window_len);

struct NormStats {
  std::array<double, kNumChannels> mean{};
  // Divisor actually applied (1 for channels that were only centered).
  std::array<double, kNumChannels> scale{};
  // Raw standard deviation measured on the train rows.
  std::array<double, kNumChannels> std_dev{};
};

struct DatasetSplit {
  std::vector<Sample> train;
  std::vector<Sample> val;
  std::vector<Sample> test;
  // Set once normalize() has been applied; maps normalized values back.
  std::optional<NormStats> norm_stats;

  double raw_value(const Sample& s, std::size_t row, Channel ch) const;
};

/// Time-ordered contiguous split (default 70/15/15).
DatasetSplit split_time_ordered(std::vector<Sample> samples, double train_frac = 0.7, double val_frac = 0.15);

NormStats compute_norm_stats(std::span<const Sample> train);

/// Per-channel z-score with train-only statistics. Channels whose train std
/// is below 1e-8 are centered but not scaled. Targets are untouched.
DatasetSplit normalize(const DatasetSplit& split);

}  // namespace barfiq::data
