#pragma once

#include <numbers>
#include <span>
#include <vector>

namespace barfiq {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Maps an angle onto [-pi, pi) via ((x + pi) mod 2pi) - pi with a
/// nonnegative modulo. Throws DomainError on non-finite input.
double wrap_pi(double x);

/// Two-argument arctangent in (-pi, pi]. Throws DomainError when both
/// arguments are zero.
double atan2_phase(double sin_c, double cos_c);

/// Shortest signed circular difference a - b, in [-pi, pi).
double circular_diff(double a, double b);

/// Numerically stable softmax (max-subtracted). Throws on empty or
/// non-finite input.
std::vector<double> softmax(std::span<const double> logits);

}  // namespace barfiq
