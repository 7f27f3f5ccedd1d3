#include "barfiq/parameters.hpp"

#include <algorithm>
#include <cmath>

#include "barfiq/errors.hpp"

namespace barfiq {

Var ParameterSet::add(const std::string& name, Tensor init) {
  if (params_.count(name) || buffers_.count(name)) throw ConfigError("duplicate parameter name: " + name);
  Var v = parameter(std::move(init));
  params_.emplace(name, v);
  return v;
}

Tensor& ParameterSet::add_buffer(const std::string& name, Tensor init) {
  if (params_.count(name) || buffers_.count(name)) throw ConfigError("duplicate buffer name: " + name);
  return buffers_.emplace(name, std::move(init)).first->second;
}

const Var& ParameterSet::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, v] : params_) n += v.value().size();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& [_, v] : params_) v.zero_grad();
}

double ParameterSet::grad_norm() const {
  double s = 0.0;
  for (const auto& [_, v] : params_)
    for (double g : v.grad().data()) s += g * g;
  return std::sqrt(s);
}

ParameterSet::Snapshot ParameterSet::snapshot() const {
  Snapshot s;
  for (const auto& [name, v] : params_) s.params.emplace(name, v.value());
  s.buffers = buffers_;
  return s;
}

void ParameterSet::restore(const Snapshot& s) {
  for (auto& [name, v] : params_) {
    auto it = s.params.find(name);
    if (it == s.params.end() || !it->second.same_shape(v.value())) {
      throw ConfigError("snapshot does not match parameter " + name);
    }
    v.mutable_value() = it->second;
  }
  for (auto& [name, b] : buffers_) {
    auto it = s.buffers.find(name);
    if (it == s.buffers.end() || !it->second.same_shape(b)) {
      throw ConfigError("snapshot does not match buffer " + name);
    }
    b = it->second;
  }
}

GradCheckReport grad_check(ParameterSet& params, const std::function<Var()>& loss, double probe_step) {
  if (!(probe_step > 0.0)) throw DomainError("grad_check: probe step must be positive");
  GradCheckReport report;

  params.zero_grad();
  Var l = loss();
  if (!std::isfinite(l.item())) throw NumericalError("grad_check: non-finite loss");
  backward(l);
  std::map<std::string, Tensor> analytic;
  for (auto& [name, v] : params.params()) analytic.emplace(name, v.grad());

  auto eval = [&]() {
    const double f = loss().item();
    if (!std::isfinite(f)) throw NumericalError("grad_check: non-finite loss at probe");
    return f;
  };

  for (auto& [name, v] : params.params()) {
    ParamGradError pe{name, 0.0};
    Tensor& theta = v.mutable_value();
    const Tensor& g = analytic.at(name);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double saved = theta[i];
      theta[i] = saved + probe_step;
      const double fp = eval();
      theta[i] = saved - probe_step;
      const double fm = eval();
      theta[i] = saved;
      const double fd = (fp - fm) / (2.0 * probe_step);
      const double denom = std::max({std::abs(g[i]), std::abs(fd), 1e-8});
      pe.max_rel_error = std::max(pe.max_rel_error, std::abs(g[i] - fd) / denom);
      ++report.param_count;
    }
    report.max_rel_error = std::max(report.max_rel_error, pe.max_rel_error);
    report.per_param_errors.push_back(std::move(pe));
  }
  params.zero_grad();
  return report;
}

}  // namespace barfiq
