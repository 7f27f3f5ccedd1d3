#pragma once

#include <complex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "barfiq/autodiff.hpp"
#include "barfiq/init.hpp"
#include "barfiq/parameters.hpp"

namespace barfiq::qfm {

// How the token-axis standardization behaves outside training.
enum class NormEval { running, token };

std::string to_string(NormEval m);
NormEval norm_eval_from_string(std::string_view s);

struct QfmConfig {
  std::size_t n_qubits = 4;
  std::size_t depth = 2;
  std::size_t n_heads = 3;
  std::size_t d_q = 8;
  std::size_t post_hidden = 16;
  double norm_eps = 1e-5;
  double norm_momentum = 0.1;
  NormEval norm_eval = NormEval::running;

  void validate() const;
};

using Amplitude = std::complex<double>;

// Amplitudes indexed with qubit 1 as the most significant bit.
class StateVector {
 public:
  explicit StateVector(std::size_t n_qubits);  // |0...0>

  std::size_t n_qubits() const { return n_; }
  std::span<const Amplitude> amplitudes() const { return amps_; }
  std::span<Amplitude> amplitudes() { return amps_; }
  double norm_squared() const;

  // Qubits are 0-based here: qubit 0 is the most significant bit.
  void apply_ry(std::size_t qubit, double theta);
  void apply_cnot(std::size_t control, std::size_t target);

 private:
  std::size_t n_;
  std::vector<Amplitude> amps_;
};

/// D repetitions of [RY(θ_r) on every qubit, then CNOT(r -> r+1 mod n) for
/// ascending r], all layers reusing the same angles.
StateVector run_circuit(std::span<const double> angles, std::size_t n_qubits, std::size_t depth);

/// Like run_circuit but with separate angles per layer (depth × n_qubits,
/// row-major). Used by the parameter-shift gradient.
StateVector run_layered_circuit(std::span<const double> layer_angles, std::size_t n_qubits, std::size_t depth);

/// <Z_r> for every qubit. Throws NumericalError if the state is not normalized.
std::vector<double> measure_z(const StateVector& state);

/// Row-wise circuit expectations: angles T×n_q -> T×n_q. The backward pass
/// uses the exact parameter-shift rule summed over the layers sharing an angle.
Var expectation_op(const Var& angles, std::size_t depth);

std::vector<double> head_angles(std::span<const double> z_row, const Tensor& w_theta, const Tensor& b_theta);

struct HeadParams {
  Var w_theta;  // d_q×n_q
  Var b_theta;  // 1×n_q
};

Var qfm_head_forward(const Var& z, const HeadParams& head, const QfmConfig& cfg);

Var qfm_mix(const Var& z, const std::vector<Var>& maps, const Var& w_m, const Var& b_m);

struct PostParams {
  Var scale, shift;  // 1×d_q
  Var w1, b1, w2, b2;
};

/// Normalization statistics used instead of the token statistics.
struct FixedStats {
  Tensor mean;      // 1×d_q
  Tensor variance;  // 1×d_q
};

/// Q = Y + MLP(scale ⊙ standardize(Y) + shift). With `fixed` the
/// standardization uses the given statistics, otherwise the token-axis ones.
Var qfm_postprocess(const Var& y, const PostParams& p, double eps, const FixedStats* fixed = nullptr);

// Pearson correlation; entries touching a constant column are nullopt.
struct Correlation {
  std::size_t n = 0;
  std::vector<std::optional<double>> entries;

  const std::optional<double>& at(std::size_t i, std::size_t j) const { return entries[i * n + j]; }
};

Correlation pearson_correlation(const Tensor& x);

struct CorrelationReport {
  std::vector<Correlation> pre;   // per head, over the encoding angles
  std::vector<Correlation> post;  // per head, over the measurement map
};

CorrelationReport correlation_maps(const std::vector<Tensor>& pre_inputs, const std::vector<Tensor>& maps);

struct QfmTrace {
  std::vector<Tensor> angles;  // per head, T×n_q
  std::vector<Tensor> maps;    // per head, T×n_q
};

class QfmBlock {
 public:
  QfmBlock(ParameterSet& ps, const std::string& prefix, const QfmConfig& cfg, std::size_t d_in, Rng& rng);

  /// In training mode the token statistics are used and folded into the
  /// running statistics.
  Var forward(const Var& fused, const ForwardContext& ctx, QfmTrace* trace = nullptr) const;

  const QfmConfig& config() const { return cfg_; }

  Var proj_w, proj_b;
  std::vector<HeadParams> heads;
  Var mix_w, mix_b;
  PostParams post;

 private:
  QfmConfig cfg_;
  Tensor* running_mean_;
  Tensor* running_var_;
};

}  // namespace barfiq::qfm
