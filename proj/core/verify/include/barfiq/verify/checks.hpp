#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "barfiq/network.hpp"

namespace barfiq::verify {

struct CheckResult {
  std::string name;
  bool passed = false;
  double worst = 0.0;      // largest observed violation / error
  double tolerance = 0.0;
  std::size_t cases = 0;
  std::string detail;
  double seconds = 0.0;
};

// Random BAR retrieval instances with ℓ ≤ 8 and d ≤ 16.
CheckResult check_bar_partition(std::size_t instances, std::uint64_t seed);
CheckResult check_bar_boundedness(std::size_t instances, std::uint64_t seed);
CheckResult check_bar_limiting(std::size_t instances, std::uint64_t seed);
CheckResult check_bar_dominance(std::size_t instances, std::uint64_t seed);

// Gate-wise simulator vs dense unitaries, n_q ∈ {2,3,4}, D ∈ {1,2}.
CheckResult check_qfm_oracle(std::size_t angle_sets, std::uint64_t seed);
CheckResult check_qfm_bounds(std::size_t angle_sets, std::uint64_t seed);

// L=8, M=9, d=8, d_q=4, n_q=2, K=2, E=2, k=1, no dropout.
NetworkConfig tiny_network_config();
CheckResult check_pipeline_gradients(std::uint64_t seed);

CheckResult check_loss_identities(std::size_t cases, std::uint64_t seed);

std::vector<CheckResult> run_selftest(std::uint64_t seed);

}  // namespace barfiq::verify
