#pragma once

#include <cstddef>
#include <random>

#include "barfiq/tensor.hpp"

namespace barfiq {

using Rng = std::mt19937_64;

// Uniform in ±1/sqrt(fan_in).
Tensor init_uniform(std::size_t rows, std::size_t cols, std::size_t fan_in, Rng& rng);

// Per-forward switches shared by every module.
struct ForwardContext {
  bool training = false;
  Rng* dropout_rng = nullptr;
  // Incremented once per (token, expert) evaluation inside sparse MoE layers.
  std::size_t* expert_evaluations = nullptr;
};

}  // namespace barfiq
