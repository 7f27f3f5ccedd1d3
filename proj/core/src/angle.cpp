#include "barfiq/angle.hpp"

#include <algorithm>
#include <cmath>

#include "barfiq/errors.hpp"

namespace barfiq {

double wrap_pi(double x) {
  if (!std::isfinite(x)) throw DomainError("wrap_pi: non-finite angle");
  double r = std::fmod(x + kPi, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  // r + 2pi can round up to exactly 2pi for tiny negative r.
  if (r >= kTwoPi) r -= kTwoPi;
  return r - kPi;
}

double atan2_phase(double sin_c, double cos_c) {
  if (!std::isfinite(sin_c) || !std::isfinite(cos_c)) {
    throw DomainError("atan2_phase: non-finite component");
  }
  if (sin_c == 0.0 && cos_c == 0.0) throw DomainError("atan2_phase: (0, 0) has no direction");
  return std::atan2(sin_c, cos_c);
}

double circular_diff(double a, double b) { return wrap_pi(a - b); }

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw DomainError("softmax: empty input");
  double mx = logits[0];
  for (double v : logits) {
    if (!std::isfinite(v)) throw DomainError("softmax: non-finite logit");
    mx = std::max(mx, v);
  }
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

}  // namespace barfiq
