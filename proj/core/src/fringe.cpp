#include "barfiq/fringe.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "barfiq/angle.hpp"
#include "barfiq/csv.hpp"

namespace barfiq::fringe {

std::string_view to_string(PhaseStatus s) {
  switch (s) {
    case PhaseStatus::ok:
      return "ok";
    case PhaseStatus::missing_insufficient_window:
      return "missing_insufficient_window";
    case PhaseStatus::missing_degenerate_amplitude:
      return "missing_degenerate_amplitude";
  }
  return "unknown";
}

PhaseStatus phase_status_from_string(std::string_view s) {
  if (s == "ok") return PhaseStatus::ok;
  if (s == "missing_insufficient_window") return PhaseStatus::missing_insufficient_window;
  if (s == "missing_degenerate_amplitude") return PhaseStatus::missing_degenerate_amplitude;
  throw DataError("unknown phase status '" + std::string(s) + "'");
}

namespace {

using Mat3 = std::array<std::array<double, 3>, 3>;

double norm1(const Mat3& m) {
  double best = 0.0;
  for (int c = 0; c < 3; ++c) {
    double s = 0.0;
    for (int r = 0; r < 3; ++r) s += std::abs(m[r][c]);
    best = std::max(best, s);
  }
  return best;
}

// Gauss-Jordan inverse with partial pivoting; nullopt if a pivot vanishes.
std::optional<Mat3> invert3(Mat3 a) {
  Mat3 inv{};
  for (int i = 0; i < 3; ++i) inv[i][i] = 1.0;
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    if (a[piv][col] == 0.0) return std::nullopt;
    std::swap(a[piv], a[col]);
    std::swap(inv[piv], inv[col]);
    const double p = a[col][col];
    for (int c = 0; c < 3; ++c) {
      a[col][c] /= p;
      inv[col][c] /= p;
    }
    for (int r = 0; r < 3; ++r) {
      if (r == col) continue;
      const double f = a[r][col];
      if (f == 0.0) continue;
      for (int c = 0; c < 3; ++c) {
        a[r][c] -= f * a[col][c];
        inv[r][c] -= f * inv[col][c];
      }
    }
  }
  return inv;
}

}  // namespace

FringeFit fit_fringe_window(std::span<const ShotRecord> window, std::size_t min_points) {
  if (window.size() < min_points || window.size() < 3) {
    throw FitError(FitError::Kind::insufficient_window,
                   "fringe window has " + std::to_string(window.size()) + " points, need " +
                       std::to_string(std::max<std::size_t>(min_points, 3)));
  }
  Mat3 xtx{};
  std::array<double, 3> xtp{};
  for (const auto& s : window) {
    const std::array<double, 3> row{1.0, std::cos(s.theta), std::sin(s.theta)};
    for (int i = 0; i < 3; ++i) {
      xtp[i] += row[i] * s.rho;
      for (int j = 0; j < 3; ++j) xtx[i][j] += row[i] * row[j];
    }
  }
  const auto inv = invert3(xtx);
  if (!inv || norm1(xtx) * norm1(*inv) > 1e12) {
    throw FitError(FitError::Kind::degenerate_fit, "fringe design matrix is rank deficient");
  }
  FringeFit fit;
  std::array<double, 3> beta{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) beta[i] += (*inv)[i][j] * xtp[j];
  fit.p0_hat = beta[0];
  fit.a_hat = beta[1];
  fit.b_hat = beta[2];
  fit.r_hat = std::hypot(fit.a_hat, fit.b_hat);
  fit.window_size = window.size();
  return fit;
}

PhaseResult invert_shot(const ShotRecord& shot, const FringeFit& fit, double eps_amp) {
  PhaseResult res;
  res.iter = shot.iter;
  if (fit.r_hat <= eps_amp) {
    res.status = PhaseStatus::missing_degenerate_amplitude;
    return res;
  }
  const double u = std::clamp((shot.rho - fit.p0_hat) / fit.r_hat, -1.0, 1.0);
  const double d = std::acos(u);
  const double c1 = wrap_pi(d - shot.theta);
  const double c2 = wrap_pi(-d - shot.theta);
  const double dist1 = std::abs(wrap_pi(c1 - shot.phi_rt));
  const double dist2 = std::abs(wrap_pi(c2 - shot.phi_rt));
  const double phi = dist1 <= dist2 ? c1 : c2;
  res.phi_ai = phi;
  res.delta_phi = wrap_pi(phi - shot.phi_rt);
  res.candidates = std::array<double, 2>{c1, c2};
  return res;
}

std::vector<PhaseResult> reconstruct_stream(std::span<const ShotRecord> shots, const ReconstructOptions& opts) {
  if (shots.empty()) throw DomainError("reconstruct_stream: empty stream");
  std::vector<PhaseResult> out;
  out.reserve(shots.size());
  const std::size_t n = shots.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= opts.window_half_width ? i - opts.window_half_width : 0;
    const std::size_t hi = std::min(n - 1, i + opts.window_half_width);
    try {
      const FringeFit fit = fit_fringe_window(shots.subspan(lo, hi - lo + 1), opts.min_points);
      out.push_back(invert_shot(shots[i], fit, opts.eps_amp));
    } catch (const FitError& e) {
      PhaseResult res;
      res.iter = shots[i].iter;
      res.status = e.kind() == FitError::Kind::insufficient_window ? PhaseStatus::missing_insufficient_window
                                                                     : PhaseStatus::missing_degenerate_amplitude;
      out.push_back(res);
    }
  }
  return out;
}

std::vector<ShotRecord> read_shots_csv(std::istream& in) {
  csv::Reader reader(in, {"iter", "theta", "rho", "phi_rt", "a", "c", "r"});
  std::vector<ShotRecord> shots;
  std::vector<std::string> f;
  while (reader.next(f)) {
    ShotRecord s;
    s.iter = csv::parse_int(f[0], reader.line());
    s.theta = csv::parse_double(f[1], reader.line());
    s.rho = csv::parse_double(f[2], reader.line());
    s.phi_rt = csv::parse_double(f[3], reader.line());
    s.aux_a = csv::parse_double(f[4], reader.line());
    s.aux_c = csv::parse_double(f[5], reader.line());
    s.aux_r = csv::parse_double(f[6], reader.line());
    if (!std::isfinite(s.theta) || !std::isfinite(s.phi_rt)) {
      throw DataError("line " + std::to_string(reader.line()) + ": theta and phi_rt must be finite");
    }
    if (!shots.empty() && s.iter <= shots.back().iter) {
      throw DataError("line " + std::to_string(reader.line()) + ": iter must be strictly increasing");
    }
    shots.push_back(s);
  }
  return shots;
}

void write_shots_csv(std::ostream& out, std::span<const ShotRecord> shots) {
  out << "iter,theta,rho,phi_rt,a,c,r\n";
  for (const auto& s : shots) {
    out << s.iter << ',' << csv::format_double(s.theta) << ',' << csv::format_double(s.rho) << ','
        << csv::format_double(s.phi_rt) << ',' << csv::format_double(s.aux_a) << ','
        << csv::format_double(s.aux_c) << ',' << csv::format_double(s.aux_r) << '\n';
  }
}

void write_phases_csv(std::ostream& out, std::span<const PhaseResult> phases) {
  out << "iter,phi_ai,delta_phi,status\n";
  for (const auto& p : phases) {
    out << p.iter << ',';
    if (p.phi_ai) out << csv::format_double(*p.phi_ai);
    out << ',';
    if (p.delta_phi) out << csv::format_double(*p.delta_phi);
    out << ',' << to_string(p.status) << '\n';
  }
}

std::vector<PhaseResult> read_phases_csv(std::istream& in) {
  csv::Reader reader(in, {"iter", "phi_ai", "delta_phi", "status"});
  std::vector<PhaseResult> out;
  std::vector<std::string> f;
  while (reader.next(f)) {
    PhaseResult p;
    p.iter = csv::parse_int(f[0], reader.line());
    if (!f[1].empty()) p.phi_ai = csv::parse_double(f[1], reader.line());
    if (!f[2].empty()) p.delta_phi = csv::parse_double(f[2], reader.line());
    p.status = phase_status_from_string(f[3]);
    if (p.ok() != (p.phi_ai.has_value() && p.delta_phi.has_value())) {
      throw DataError("line " + std::to_string(reader.line()) + ": phase fields inconsistent with status");
    }
    out.push_back(p);
  }
  return out;
}

}  // namespace barfiq::fringe
