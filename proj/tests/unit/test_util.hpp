#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "barfiq/autodiff.hpp"
#include "barfiq/ops.hpp"
#include "barfiq/parameters.hpp"

namespace testutil {

inline barfiq::Tensor randn(std::size_t r, std::size_t c, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  barfiq::Tensor t(r, c);
  for (double& x : t.data()) x = n(rng);
  return t;
}

// Gradient of sum(f(inputs) ⊙ R) for a fixed random R, checked against
// central differences on every input entry.
inline double op_grad_error(std::vector<barfiq::Tensor> inputs,
                            const std::function<barfiq::Var(const std::vector<barfiq::Var>&)>& f,
                            std::uint64_t seed = 7, double h = 1e-6) {
  barfiq::ParameterSet ps;
  std::vector<barfiq::Var> vars;
  for (std::size_t i = 0; i < inputs.size(); ++i) vars.push_back(ps.add("in" + std::to_string(i), inputs[i]));
  std::mt19937_64 rng(seed);
  const barfiq::Tensor probe = f(vars).value();
  // weights bounded away from zero so no output contributes a vanishing gradient
  std::uniform_real_distribution<double> mag(0.5, 1.5);
  std::bernoulli_distribution sign(0.5);
  barfiq::Tensor w(probe.rows(), probe.cols());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = sign(rng) ? mag(rng) : -mag(rng);
  const barfiq::Var weights = barfiq::constant(std::move(w));
  auto loss = [&] { return barfiq::ops::sum_all(barfiq::ops::mul(f(vars), weights)); };
  return barfiq::grad_check(ps, loss, h).max_rel_error;
}

}  // namespace testutil
