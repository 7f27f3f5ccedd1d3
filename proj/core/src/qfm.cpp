#include "barfiq/qfm.hpp"

#include <algorithm>
#include <cmath>

#include "barfiq/angle.hpp"
#include "barfiq/errors.hpp"
#include "barfiq/ops.hpp"

namespace barfiq::qfm {

std::string to_string(NormEval m) { return m == NormEval::running ? "running" : "token"; }

NormEval norm_eval_from_string(std::string_view s) {
  if (s == "running") return NormEval::running;
  if (s == "token") return NormEval::token;
  throw ConfigError("qfm.norm_eval must be 'running' or 'token', got '" + std::string(s) + "'");
}

void QfmConfig::validate() const {
  if (n_qubits < 2) throw ConfigError("qfm.n_qubits must be >= 2 for ring entanglement");
  if (n_qubits > 20) throw ConfigError("qfm.n_qubits too large for dense simulation");
  if (depth < 1) throw ConfigError("qfm.depth must be >= 1");
  if (n_heads < 1) throw ConfigError("qfm.n_heads must be >= 1");
  if (d_q == 0 || post_hidden == 0) throw ConfigError("qfm.d_q and qfm.post_hidden must be positive");
  if (!(norm_eps > 0.0)) throw ConfigError("qfm.norm_eps must be positive");
  if (!(norm_momentum > 0.0 && norm_momentum <= 1.0)) throw ConfigError("qfm.norm_momentum must lie in (0, 1]");
}

StateVector::StateVector(std::size_t n_qubits) : n_(n_qubits), amps_(std::size_t{1} << n_qubits) {
  amps_[0] = 1.0;
}

double StateVector::norm_squared() const {
  double s = 0.0;
  for (const auto& a : amps_) s += std::norm(a);
  return s;
}

void StateVector::apply_ry(std::size_t qubit, double theta) {
  const std::size_t bit = std::size_t{1} << (n_ - 1 - qubit);
  const double c = std::cos(0.5 * theta), s = std::sin(0.5 * theta);
  for (std::size_t i = 0; i < amps_.size(); ++i) {
    if (i & bit) continue;
    const Amplitude a0 = amps_[i], a1 = amps_[i | bit];
    amps_[i] = c * a0 - s * a1;
    amps_[i | bit] = s * a0 + c * a1;
  }
}

void StateVector::apply_cnot(std::size_t control, std::size_t target) {
  if (control == target) throw DomainError("cnot: control equals target");
  const std::size_t cb = std::size_t{1} << (n_ - 1 - control);
  const std::size_t tb = std::size_t{1} << (n_ - 1 - target);
  for (std::size_t i = 0; i < amps_.size(); ++i)
    if ((i & cb) && !(i & tb)) std::swap(amps_[i], amps_[i | tb]);
}

StateVector run_layered_circuit(std::span<const double> layer_angles, std::size_t n_qubits, std::size_t depth) {
  if (n_qubits < 2) throw ConfigError("circuit needs at least 2 qubits");
  if (layer_angles.size() != n_qubits * depth) throw ShapeError("circuit: angle count does not match depth × qubits");
  StateVector psi(n_qubits);
  for (std::size_t l = 0; l < depth; ++l) {
    for (std::size_t r = 0; r < n_qubits; ++r) psi.apply_ry(r, layer_angles[l * n_qubits + r]);
    for (std::size_t r = 0; r < n_qubits; ++r) psi.apply_cnot(r, (r + 1) % n_qubits);
  }
  return psi;
}

StateVector run_circuit(std::span<const double> angles, std::size_t n_qubits, std::size_t depth) {
  if (angles.size() != n_qubits) throw ShapeError("circuit: expected one angle per qubit");
  std::vector<double> layered;
  layered.reserve(n_qubits * depth);
  for (std::size_t l = 0; l < depth; ++l) layered.insert(layered.end(), angles.begin(), angles.end());
  return run_layered_circuit(layered, n_qubits, depth);
}

std::vector<double> measure_z(const StateVector& state) {
  const double nrm = state.norm_squared();
  if (!(std::abs(nrm - 1.0) <= 1e-8)) throw NumericalError("measure_z: state norm deviates from 1 (|psi|^2 = " + std::to_string(nrm) + ")");
  const std::size_t n = state.n_qubits();
  std::vector<double> z(n, 0.0);
  const auto amps = state.amplitudes();
  for (std::size_t i = 0; i < amps.size(); ++i) {
    const double p = std::norm(amps[i]);
    for (std::size_t r = 0; r < n; ++r) z[r] += (i >> (n - 1 - r)) & 1U ? -p : p;
  }
  return z;
}

Var expectation_op(const Var& angles, std::size_t depth) {
  const Tensor& A = angles.value();
  const std::size_t T = A.rows(), n = A.cols();
  Tensor out(T, n);
  for (std::size_t t = 0; t < T; ++t) {
    const auto m = measure_z(run_circuit(A.row(t), n, depth));
    for (std::size_t r = 0; r < n; ++r) out(t, r) = m[r];
  }
  Tensor saved = A;
  return make_op(std::move(out), {angles}, [A = std::move(saved), depth](const Tensor& g, std::vector<Tensor*>& pg) {
    if (!pg[0]) return;
    const std::size_t T = A.rows(), n = A.cols();
    std::vector<double> layered(n * depth);
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t l = 0; l < depth; ++l)
        for (std::size_t r = 0; r < n; ++r) layered[l * n + r] = A(t, r);
      for (std::size_t s = 0; s < n; ++s) {
        double acc = 0.0;
        for (std::size_t l = 0; l < depth; ++l) {
          double& slot = layered[l * n + s];
          const double base = slot;
          slot = base + 0.5 * kPi;
          const auto plus = measure_z(run_layered_circuit(layered, n, depth));
          slot = base - 0.5 * kPi;
          const auto minus = measure_z(run_layered_circuit(layered, n, depth));
          slot = base;
          for (std::size_t r = 0; r < n; ++r) acc += g(t, r) * 0.5 * (plus[r] - minus[r]);
        }
        (*pg[0])(t, s) += acc;
      }
    }
  });
}

std::vector<double> head_angles(std::span<const double> z_row, const Tensor& w_theta, const Tensor& b_theta) {
  if (z_row.size() != w_theta.rows() || b_theta.cols() != w_theta.cols() || b_theta.rows() != 1)
    throw ShapeError("head_angles: parameter shapes do not match input");
  std::vector<double> theta(b_theta.data().begin(), b_theta.data().end());
  for (std::size_t i = 0; i < z_row.size(); ++i)
    for (std::size_t r = 0; r < theta.size(); ++r) theta[r] += z_row[i] * w_theta(i, r);
  return theta;
}

Var qfm_head_forward(const Var& z, const HeadParams& head, const QfmConfig& cfg) {
  if (head.w_theta.cols() != cfg.n_qubits) throw ShapeError("qfm head: angle width must equal n_qubits");
  return expectation_op(ops::linear(z, head.w_theta, head.b_theta), cfg.depth);
}

Var qfm_mix(const Var& z, const std::vector<Var>& maps, const Var& w_m, const Var& b_m) {
  return ops::add(z, ops::linear(ops::concat_cols(maps), w_m, b_m));
}

Var qfm_postprocess(const Var& y, const PostParams& p, double eps, const FixedStats* fixed) {
  Var yhat;
  if (fixed) {
    Tensor neg_mean = fixed->mean;
    Tensor inv_std(1, fixed->variance.cols());
    for (std::size_t c = 0; c < inv_std.cols(); ++c) {
      neg_mean[c] = -neg_mean[c];
      inv_std[c] = 1.0 / std::sqrt(fixed->variance[c] + eps);
    }
    yhat = ops::mul_row(ops::add_row(y, constant(std::move(neg_mean))), constant(std::move(inv_std)));
  } else {
    yhat = ops::standardize_cols(y, eps);
  }
  const Var bn = ops::add_row(ops::mul_row(yhat, p.scale), p.shift);
  const Var h = ops::relu(ops::linear(bn, p.w1, p.b1));
  return ops::add(y, ops::linear(h, p.w2, p.b2));
}

Correlation pearson_correlation(const Tensor& x) {
  const std::size_t T = x.rows(), n = x.cols();
  if (T < 2) throw DomainError("correlation needs at least 2 rows");
  std::vector<double> mean(n, 0.0), sd(n, 0.0);
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t t = 0; t < T; ++t) mean[c] += x(t, c);
    mean[c] /= static_cast<double>(T);
    for (std::size_t t = 0; t < T; ++t) sd[c] += (x(t, c) - mean[c]) * (x(t, c) - mean[c]);
    sd[c] = std::sqrt(sd[c]);
  }
  Correlation out;
  out.n = n;
  out.entries.resize(n * n);
  // A column is treated as constant when its spread is at rounding level.
  auto constant_col = [&](std::size_t c) {
    return sd[c] <= 1e-12 * std::max(1.0, std::abs(mean[c])) * std::sqrt(static_cast<double>(T));
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (constant_col(i) || constant_col(j)) continue;
      if (i == j) {
        out.entries[i * n + j] = 1.0;
        continue;
      }
      double cov = 0.0;
      for (std::size_t t = 0; t < T; ++t) cov += (x(t, i) - mean[i]) * (x(t, j) - mean[j]);
      out.entries[i * n + j] = std::clamp(cov / (sd[i] * sd[j]), -1.0, 1.0);
    }
  }
  return out;
}

CorrelationReport correlation_maps(const std::vector<Tensor>& pre_inputs, const std::vector<Tensor>& maps) {
  if (pre_inputs.size() != maps.size()) throw ShapeError("correlation_maps: head counts differ");
  CorrelationReport rep;
  for (std::size_t k = 0; k < maps.size(); ++k) {
    rep.pre.push_back(pearson_correlation(pre_inputs[k]));
    rep.post.push_back(pearson_correlation(maps[k]));
  }
  return rep;
}

QfmBlock::QfmBlock(ParameterSet& ps, const std::string& prefix, const QfmConfig& cfg, std::size_t d_in, Rng& rng)
    : cfg_(cfg) {
  cfg_.validate();
  const std::size_t dq = cfg_.d_q, nq = cfg_.n_qubits, hid = cfg_.post_hidden;
  proj_w = ps.add(prefix + ".proj.w", init_uniform(d_in, dq, d_in, rng));
  proj_b = ps.add(prefix + ".proj.b", init_uniform(1, dq, d_in, rng));
  for (std::size_t k = 0; k < cfg_.n_heads; ++k) {
    const std::string hp = prefix + ".head" + std::to_string(k);
    HeadParams h;
    h.w_theta = ps.add(hp + ".w_theta", init_uniform(dq, nq, dq, rng));
    h.b_theta = ps.add(hp + ".b_theta", init_uniform(1, nq, dq, rng));
    heads.push_back(h);
  }
  const std::size_t mix_in = nq * cfg_.n_heads;
  mix_w = ps.add(prefix + ".mix.w", init_uniform(mix_in, dq, mix_in, rng));
  mix_b = ps.add(prefix + ".mix.b", init_uniform(1, dq, mix_in, rng));
  post.scale = ps.add(prefix + ".post.norm.scale", Tensor(1, dq, 1.0));
  post.shift = ps.add(prefix + ".post.norm.shift", Tensor(1, dq, 0.0));
  post.w1 = ps.add(prefix + ".post.w1", init_uniform(dq, hid, dq, rng));
  post.b1 = ps.add(prefix + ".post.b1", init_uniform(1, hid, dq, rng));
  post.w2 = ps.add(prefix + ".post.w2", init_uniform(hid, dq, hid, rng));
  post.b2 = ps.add(prefix + ".post.b2", init_uniform(1, dq, hid, rng));
  running_mean_ = &ps.add_buffer(prefix + ".post.norm.running_mean", Tensor(1, dq, 0.0));
  running_var_ = &ps.add_buffer(prefix + ".post.norm.running_var", Tensor(1, dq, 1.0));
}

Var QfmBlock::forward(const Var& fused, const ForwardContext& ctx, QfmTrace* trace) const {
  const Var z = ops::linear(fused, proj_w, proj_b);
  std::vector<Var> maps;
  maps.reserve(heads.size());
  for (const auto& h : heads) {
    const Var theta = ops::linear(z, h.w_theta, h.b_theta);
    const Var m = expectation_op(theta, cfg_.depth);
    if (trace) {
      trace->angles.push_back(theta.value());
      trace->maps.push_back(m.value());
    }
    maps.push_back(m);
  }
  const Var y = qfm_mix(z, maps, mix_w, mix_b);

  if (ctx.training) {
    const Tensor& Y = y.value();
    const double T = static_cast<double>(Y.rows());
    const double mom = cfg_.norm_momentum;
    for (std::size_t c = 0; c < Y.cols(); ++c) {
      double mean = 0.0, var = 0.0;
      for (std::size_t t = 0; t < Y.rows(); ++t) mean += Y(t, c);
      mean /= T;
      for (std::size_t t = 0; t < Y.rows(); ++t) var += (Y(t, c) - mean) * (Y(t, c) - mean);
      var /= T;
      (*running_mean_)[c] = (1.0 - mom) * (*running_mean_)[c] + mom * mean;
      (*running_var_)[c] = (1.0 - mom) * (*running_var_)[c] + mom * var;
    }
    return qfm_postprocess(y, post, cfg_.norm_eps);
  }
  if (cfg_.norm_eval == NormEval::token) return qfm_postprocess(y, post, cfg_.norm_eps);
  const FixedStats stats{*running_mean_, *running_var_};
  return qfm_postprocess(y, post, cfg_.norm_eps, &stats);
}

}  // namespace barfiq::qfm
