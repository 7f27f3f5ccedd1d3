#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "barfiq/errors.hpp"

namespace barfiq::fringe {

/// One interferometer shot.
struct ShotRecord {
  std::int64_t iter = 0;
  double theta = 0.0;   // applied scan phase [rad]
  double rho = 0.0;     // population ratio
  double phi_rt = 0.0;  // real-time classical phase estimate [rad]
  double aux_a = 0.0;
  double aux_c = 0.0;
  double aux_r = 0.0;
};

/// Local least-squares fit of P(θ) = P0 + a cos θ + b sin θ.
struct FringeFit {
  double p0_hat = 0.0;
  double a_hat = 0.0;
  double b_hat = 0.0;
  double r_hat = 0.0;  // sqrt(a^2 + b^2) = 2 * contrast
  std::size_t window_size = 0;

  double contrast() const { return 0.5 * r_hat; }
};

enum class PhaseStatus { ok, missing_insufficient_window, missing_degenerate_amplitude };

std::string_view to_string(PhaseStatus s);
PhaseStatus phase_status_from_string(std::string_view s);

struct PhaseResult {
  std::int64_t iter = 0;
  std::optional<double> phi_ai;
  std::optional<double> delta_phi;
  PhaseStatus status = PhaseStatus::ok;
  // Both inversion candidates (d - θ, -d - θ), present when status == ok.
  std::optional<std::array<double, 2>> candidates;

  bool ok() const { return status == PhaseStatus::ok; }
};

class FitError : public DataError {
 public:
  enum class Kind { insufficient_window, degenerate_fit };
  FitError(Kind kind, const std::string& what) : DataError(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct ReconstructOptions {
  std::size_t window_half_width = 10;
  std::size_t min_points = 5;
  double eps_amp = 1e-3;
};

/// Solves the 3×3 normal equations for the fringe model over `window`.
/// Throws FitError{insufficient_window} when fewer than `min_points` shots
/// are given and FitError{degenerate_fit} when the design matrix is
/// numerically rank deficient (condition estimate above 1e12).
FringeFit fit_fringe_window(std::span<const ShotRecord> window, std::size_t min_points = 5);

/// Inverts one shot against a fitted fringe: two arccos candidates, the one
/// circularly closest to phi_rt wins (ties go to d - θ).
PhaseResult invert_shot(const ShotRecord& shot, const FringeFit& fit, double eps_amp);

/// Per-shot local fit + inversion over a centered index window. Throws
/// DomainError on an empty stream.
std::vector<PhaseResult> reconstruct_stream(std::span<const ShotRecord> shots,
                                            const ReconstructOptions& opts = {});

// CSV: header `iter,theta,rho,phi_rt,a,c,r`.
std::vector<ShotRecord> read_shots_csv(std::istream& in);
void write_shots_csv(std::ostream& out, std::span<const ShotRecord> shots);
// CSV: header `iter,phi_ai,delta_phi,status`; missing phases are empty fields.
void write_phases_csv(std::ostream& out, std::span<const PhaseResult> phases);
std::vector<PhaseResult> read_phases_csv(std::istream& in);

}  // namespace barfiq::fringe
