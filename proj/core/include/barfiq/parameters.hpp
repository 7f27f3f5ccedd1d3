#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "barfiq/autodiff.hpp"

namespace barfiq {

/// Named trainable parameters plus non-trainable buffers (running
/// statistics), ordered by their dotted module path.
class ParameterSet {
 public:
  Var add(const std::string& name, Tensor init);
  Tensor& add_buffer(const std::string& name, Tensor init);

  const Var& get(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  const std::map<std::string, Var>& params() const { return params_; }
  std::map<std::string, Var>& params() { return params_; }
  const std::map<std::string, Tensor>& buffers() const { return buffers_; }
  std::map<std::string, Tensor>& buffers() { return buffers_; }

  std::size_t scalar_count() const;
  void zero_grad();
  // Global l2 norm over every parameter gradient.
  double grad_norm() const;

  // Value copies of parameters and buffers, used for best-epoch restore.
  struct Snapshot {
    std::map<std::string, Tensor> params;
    std::map<std::string, Tensor> buffers;
  };
  Snapshot snapshot() const;
  void restore(const Snapshot& s);

 private:
  std::map<std::string, Var> params_;
  std::map<std::string, Tensor> buffers_;
};

struct ParamGradError {
  std::string name;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t param_count = 0;
  std::vector<ParamGradError> per_param_errors;
};

/// Compares reverse-mode gradients of `loss` against central differences
/// (f(θ+h) - f(θ-h)) / 2h for every scalar parameter. Relative error uses
/// the denominator max(|g|, |g_fd|, 1e-8). Throws NumericalError if any
/// evaluated loss is non-finite.
GradCheckReport grad_check(ParameterSet& params, const std::function<Var()>& loss, double probe_step);

}  // namespace barfiq
