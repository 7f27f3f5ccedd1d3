#include "barfiq/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "barfiq/angle.hpp"
#include "barfiq/errors.hpp"

namespace barfiq::data {

void GeneratorConfig::validate() const {
  if (n_shots == 0) throw ConfigError("gen.n_shots must be positive");
  if (!(p0_true > 0.0 && p0_true < 1.0)) throw ConfigError("gen.p0 must lie in (0, 1)");
  if (!(c_true >= 0.0)) throw ConfigError("gen.contrast must be >= 0");
  if (!(noise_sigma >= 0.0)) throw ConfigError("gen.noise_sigma must be >= 0");
  if (!(drift_period > 0.0)) throw ConfigError("gen.drift_period must be positive");
  for (double v : {theta_step, drift_amp, ar_coeff, delta_offset, rt_ramp, rt_offset}) {
    if (!std::isfinite(v)) throw ConfigError("generator parameters must be finite");
  }
}

GeneratedStream generate_stream(const GeneratorConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  GeneratedStream out;
  out.shots.reserve(cfg.n_shots);
  out.true_delta_phi.reserve(cfg.n_shots);
  out.true_phi_ai.reserve(cfg.n_shots);

  const double two_c = 2.0 * cfg.c_true;
  double ar = 0.0;
  for (std::size_t i = 0; i < cfg.n_shots; ++i) {
    const double fi = static_cast<double>(i);
    ar = cfg.ar_coeff * ar + cfg.noise_sigma * normal(rng);
    const double delta = cfg.delta_offset + cfg.drift_amp * std::sin(kTwoPi * fi / cfg.drift_period) + ar;

    fringe::ShotRecord s;
    s.iter = static_cast<std::int64_t>(i);
    s.theta = wrap_pi(fi * cfg.theta_step);
    s.phi_rt = wrap_pi(cfg.rt_offset + cfg.rt_ramp * fi);
    const double phi_ai = wrap_pi(s.phi_rt + delta);
    const double raw = cfg.p0_true + two_c * std::cos(s.theta + phi_ai) + cfg.noise_sigma * normal(rng);
    s.rho = std::clamp(raw, 0.0, 1.0);
    s.aux_a = two_c + cfg.noise_sigma * normal(rng);
    s.aux_c = cfg.c_true + cfg.noise_sigma * normal(rng);
    s.aux_r = raw;

    out.shots.push_back(s);
    out.true_delta_phi.push_back(wrap_pi(delta));
    out.true_phi_ai.push_back(phi_ai);
  }
  return out;
}

const std::array<std::string, kNumChannels>& channel_names() {
  static const std::array<std::string, kNumChannels> names{
      "elapsed_time", "dt", "theta", "rho", "phi_rt", "delta_phi", "aux_a", "aux_c", "aux_r"};
  return names;
}

CircularTarget CircularTarget::from_angle(double phi) { return {std::cos(phi), std::sin(phi)}; }

double CircularTarget::angle() const { return atan2_phase(sin_c, cos_c); }

std::vector<Sample> build_windows(std::span<const fringe::ShotRecord> shots,
                                  std::span<const fringe::PhaseResult> phases, std::size_t window_len) {
  if (window_len < 2) throw ConfigError("window length must be >= 2");
  if (phases.size() != shots.size()) throw DataError("phases must align one-to-one with shots");
  std::vector<Sample> out;
  const std::size_t n = shots.size();
  if (n < window_len + 1) return out;

  // Prefix count of missing phases for O(1) window checks.
  std::vector<std::size_t> missing(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) missing[i + 1] = missing[i] + (phases[i].ok() ? 0 : 1);

  const auto iter0 = shots.front().iter;
  for (std::size_t t = window_len - 1; t + 1 < n; ++t) {
    const std::size_t begin = t + 1 - window_len;
    if (missing[t + 2] - missing[begin] != 0) continue;
    Sample s;
    s.x.t_end = t;
    s.x.values = Tensor(window_len, kNumChannels);
    for (std::size_t r = 0; r < window_len; ++r) {
      const std::size_t j = begin + r;
      const auto& shot = shots[j];
      auto row = s.x.values.row(r);
      row[kElapsedTime] = static_cast<double>(shot.iter - iter0);
      row[kDt] = j > 0 ? static_cast<double>(shot.iter - shots[j - 1].iter) : 0.0;
      row[kTheta] = shot.theta;
      row[kRho] = shot.rho;
      row[kPhiRt] = shot.phi_rt;
      row[kDeltaPhi] = *phases[j].delta_phi;
      row[kAuxA] = shot.aux_a;
      row[kAuxC] = shot.aux_c;
      row[kAuxR] = shot.aux_r;
    }
    s.target_index = t + 1;
    s.y = CircularTarget::from_angle(*phases[t + 1].delta_phi);
    out.push_back(std::move(s));
  }
  return out;
}

double DatasetSplit::raw_value(const Sample& s, std::size_t row, Channel ch) const {
  const double v = s.x.values(row, ch);
  if (!norm_stats) return v;
  return v * norm_stats->scale[ch] + norm_stats->mean[ch];
}

DatasetSplit split_time_ordered(std::vector<Sample> samples, double train_frac, double val_frac) {
  if (!(train_frac > 0.0) || !(val_frac >= 0.0) || train_frac + val_frac >= 1.0) {
    throw ConfigError("split fractions must satisfy train > 0, val >= 0, train + val < 1");
  }
  std::sort(samples.begin(), samples.end(),
            [](const Sample& a, const Sample& b) { return a.target_index < b.target_index; });
  const std::size_t n = samples.size();
  const auto n_train = static_cast<std::size_t>(std::floor(train_frac * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::floor(val_frac * static_cast<double>(n)));
  DatasetSplit split;
  auto it = std::make_move_iterator(samples.begin());
  split.train.assign(it, it + static_cast<long>(n_train));
  split.val.assign(it + static_cast<long>(n_train), it + static_cast<long>(n_train + n_val));
  split.test.assign(it + static_cast<long>(n_train + n_val), std::make_move_iterator(samples.end()));
  return split;
}

NormStats compute_norm_stats(std::span<const Sample> train) {
  if (train.empty()) throw DomainError("normalize: empty train split");
  NormStats st;
  std::size_t count = 0;
  for (const auto& s : train) {
    for (std::size_t r = 0; r < s.x.values.rows(); ++r)
      for (std::size_t c = 0; c < kNumChannels; ++c) st.mean[c] += s.x.values(r, c);
    count += s.x.values.rows();
  }
  for (double& m : st.mean) m /= static_cast<double>(count);
  std::array<double, kNumChannels> var{};
  for (const auto& s : train)
    for (std::size_t r = 0; r < s.x.values.rows(); ++r)
      for (std::size_t c = 0; c < kNumChannels; ++c) {
        const double d = s.x.values(r, c) - st.mean[c];
        var[c] += d * d;
      }
  for (std::size_t c = 0; c < kNumChannels; ++c) {
    st.std_dev[c] = std::sqrt(var[c] / static_cast<double>(count));
    st.scale[c] = st.std_dev[c] < 1e-8 ? 1.0 : st.std_dev[c];
  }
  return st;
}

DatasetSplit normalize(const DatasetSplit& split) {
  const NormStats st = compute_norm_stats(split.train);
  DatasetSplit out = split;
  for (auto* part : {&out.train, &out.val, &out.test})
    for (auto& s : *part)
      for (std::size_t r = 0; r < s.x.values.rows(); ++r)
        for (std::size_t c = 0; c < kNumChannels; ++c) s.x.values(r, c) = (s.x.values(r, c) - st.mean[c]) / st.scale[c];

  if (split.norm_stats) {
    // Compose with the earlier transform so raw_value() still maps to raw data.
    NormStats combined = st;
    for (std::size_t c = 0; c < kNumChannels; ++c) {
      combined.mean[c] = split.norm_stats->mean[c] + st.mean[c] * split.norm_stats->scale[c];
      combined.scale[c] = split.norm_stats->scale[c] * st.scale[c];
      combined.std_dev[c] = split.norm_stats->std_dev[c];
    }
    out.norm_stats = combined;
  } else {
    out.norm_stats = st;
  }
  return out;
}

}  // namespace barfiq::data
