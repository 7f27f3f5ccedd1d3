#include "barfiq/verify/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "barfiq/angle.hpp"
#include "barfiq/head.hpp"
#include "barfiq/model.hpp"
#include "barfiq/qfm.hpp"
#include "barfiq/verify/dense_oracle.hpp"

namespace barfiq::verify {

namespace {

using Clock = std::chrono::steady_clock;

Tensor random_tensor(std::size_t r, std::size_t c, double sd, Rng& rng) {
  std::normal_distribution<double> n(0.0, sd);
  Tensor t(r, c);
  for (double& x : t.data()) x = n(rng);
  return t;
}

std::size_t pick(std::size_t lo, std::size_t hi, Rng& rng) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

double l2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

CheckResult finish(CheckResult r, Clock::time_point t0) {
  r.passed = r.worst <= r.tolerance;
  r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return r;
}

struct BarInstance {
  std::vector<model::BlockSummary> history;
  Var c, wq, wk, wv;
  std::size_t d = 0, d_r = 0;
};

BarInstance random_bar_instance(Rng& rng) {
  BarInstance in;
  const std::size_t ell = pick(1, 8, rng);
  in.d = pick(1, 16, rng);
  in.d_r = pick(1, 16, rng);
  for (std::size_t j = 0; j < ell; ++j) in.history.push_back({constant(random_tensor(1, in.d, 1.0, rng)), j});
  in.c = constant(random_tensor(1, in.d, 1.0, rng));
  in.wq = constant(random_tensor(in.d, in.d_r, 1.0, rng));
  in.wk = constant(random_tensor(in.d, in.d_r, 1.0, rng));
  in.wv = constant(random_tensor(in.d, in.d, 1.0, rng));
  return in;
}

}  // namespace

CheckResult check_bar_partition(std::size_t instances, std::uint64_t seed) {
  const auto t0 = Clock::now();
  CheckResult r{"bar: alpha > 0 and sum(alpha) = 1", false, 0.0, 1e-10, instances, {}, 0.0};
  Rng rng(seed);
  std::size_t nonpositive = 0;
  for (std::size_t i = 0; i < instances; ++i) {
    const BarInstance in = random_bar_instance(rng);
    std::vector<double> alphas;
    model::bar_aggregate(in.c, in.history, in.wq, in.wk, in.wv, in.d_r, &alphas);
    double sum = 0.0;
    for (double a : alphas) {
      if (!(a > 0.0)) ++nonpositive;
      sum += a;
    }
    r.worst = std::max(r.worst, std::abs(sum - 1.0));
  }
  r.detail = std::to_string(nonpositive) + " non-positive weights";
  if (nonpositive) r.worst = std::max(r.worst, 1.0);
  return finish(r, t0);
}

CheckResult check_bar_boundedness(std::size_t instances, std::uint64_t seed) {
  const auto t0 = Clock::now();
  CheckResult r{"bar: ||r|| <= max_j ||B_j W_v||", false, 0.0, 1e-9, instances, {}, 0.0};
  Rng rng(seed);
  for (std::size_t i = 0; i < instances; ++i) {
    const BarInstance in = random_bar_instance(rng);
    double bound = 0.0;
    for (const auto& b : in.history) bound = std::max(bound, matmul(b.vector.value(), in.wv.value()).frobenius_norm());
    const Var out = model::bar_aggregate(in.c, in.history, in.wq, in.wk, in.wv, in.d_r);
    r.worst = std::max(r.worst, out.value().frobenius_norm() - bound);
  }
  r.detail = "max excess over bound";
  return finish(r, t0);
}

CheckResult check_bar_limiting(std::size_t instances, std::uint64_t seed) {
  const auto t0 = Clock::now();
  CheckResult r{"bar: margin-30 scores reduce to the last summary", false, 0.0, 1e-10, instances, {}, 0.0};
  Rng rng(seed);
  std::uniform_real_distribution<double> extra(0.0, 5.0);
  for (std::size_t i = 0; i < instances; ++i) {
    const std::size_t ell = pick(1, 8, rng), d = pick(1, 16, rng);
    Tensor scores = random_tensor(1, ell, 2.0, rng);
    double top = -1e300;
    for (std::size_t j = 0; j + 1 < ell; ++j) top = std::max(top, scores[j]);
    if (ell > 1) scores[ell - 1] = top + 30.0 + extra(rng);
    const Tensor values = random_tensor(ell, d, 1.0, rng);
    const Var out = model::bar_retrieve(constant(scores), constant(values));
    for (std::size_t k = 0; k < d; ++k) r.worst = std::max(r.worst, std::abs(out.value()[k] - values(ell - 1, k)));
  }
  r.detail = "max |r - v_last|";
  return finish(r, t0);
}

CheckResult check_bar_dominance(std::size_t instances, std::uint64_t seed) {
  const auto t0 = Clock::now();
  CheckResult r{"bar: alpha_* >= 1/(1+(l-1)e^-delta)", false, 0.0, 1e-12, instances, {}, 0.0};
  Rng rng(seed);
  std::uniform_real_distribution<double> gap(0.0, 12.0);
  for (std::size_t i = 0; i < instances; ++i) {
    const std::size_t ell = pick(2, 8, rng), star = pick(0, ell - 1, rng);
    Tensor scores = random_tensor(1, ell, 3.0, rng);
    double runner_up = -1e300;
    for (std::size_t j = 0; j < ell; ++j)
      if (j != star) runner_up = std::max(runner_up, scores[j]);
    scores[star] = runner_up + gap(rng);
    const double delta = scores[star] - runner_up;
    std::vector<double> alphas;
    model::bar_retrieve(constant(scores), constant(Tensor(ell, 1, 1.0)), &alphas);
    const double bound = 1.0 / (1.0 + static_cast<double>(ell - 1) * std::exp(-delta));
    r.worst = std::max(r.worst, bound - alphas[star]);
  }
  r.worst = std::max(r.worst, 0.0);
  r.detail = "max shortfall below bound";
  return finish(r, t0);
}

CheckResult check_qfm_oracle(std::size_t angle_sets, std::uint64_t seed) {
  const auto t0 = Clock::now();
  CheckResult r{"qfm: statevector == dense unitary product", false, 0.0, 1e-10, 0, {}, 0.0};
  Rng rng(seed);
  std::uniform_real_distribution<double> ang(-2.0 * kPi, 2.0 * kPi);
  for (std::size_t nq = 2; nq <= 4; ++nq) {
    for (std::size_t depth = 1; depth <= 2; ++depth) {
      for (std::size_t s = 0; s < angle_sets; ++s) {
        std::vector<double> angles(nq);
        for (double& a : angles) a = ang(rng);
        const auto fast = qfm::run_circuit(angles, nq, depth);
        const auto dense = dense_circuit_state(angles, nq, depth);
        for (std::size_t i = 0; i < dense.size(); ++i)
          r.worst = std::max(r.worst, std::abs(fast.amplitudes()[i] - dense[i]));
        ++r.cases;
      }
    }
  }
  r.detail = "max |amplitude difference|";
  return finish(r, t0);
}

CheckResult check_qfm_bounds(std::size_t angle_sets, std::uint64_t seed) {
  const auto t0 = Clock::now();
  CheckResult r{"qfm: <Z> in [-1,1], ||m|| <= sqrt(n_q), unit norm", false, 0.0, 1e-10, 0, {}, 0.0};
  Rng rng(seed);
  std::uniform_real_distribution<double> ang(-10.0, 10.0);
  for (std::size_t nq = 2; nq <= 6; ++nq) {
    for (std::size_t depth = 1; depth <= 4; ++depth) {
      for (std::size_t s = 0; s < angle_sets; ++s) {
        std::vector<double> angles(nq);
        for (double& a : angles) a = ang(rng);
        // norm after every gate
        qfm::StateVector psi(nq);
        for (std::size_t l = 0; l < depth; ++l) {
          for (std::size_t q = 0; q < nq; ++q) {
            psi.apply_ry(q, angles[q]);
            r.worst = std::max(r.worst, std::abs(psi.norm_squared() - 1.0));
          }
          for (std::size_t q = 0; q < nq; ++q) {
            psi.apply_cnot(q, (q + 1) % nq);
            r.worst = std::max(r.worst, std::abs(psi.norm_squared() - 1.0));
          }
        }
        const auto m = qfm::measure_z(psi);
        for (double z : m) r.worst = std::max(r.worst, std::abs(z) - 1.0);
        r.worst = std::max(r.worst, l2(m) - std::sqrt(static_cast<double>(nq)));
        ++r.cases;
      }
    }
  }
  r.worst = std::max(r.worst, 0.0);
  r.detail = "max violation";
  return finish(r, t0);
}

NetworkConfig tiny_network_config() {
  NetworkConfig c;
  c.model.d_model = 8;
  c.model.patch_len = 4;
  c.model.patch_stride = 4;
  c.model.blocks_branch1 = 2;
  c.model.blocks_branch2 = 3;
  c.model.n_experts = 2;
  c.model.top_k = 1;
  c.model.d_r = 4;
  c.model.expert_hidden = 8;
  c.model.dropout = 0.0;
  c.fusion.d_out = 8;
  c.fusion.reduction = 4;
  c.qfm.n_qubits = 2;
  c.qfm.depth = 2;
  c.qfm.n_heads = 2;
  c.qfm.d_q = 4;
  c.qfm.post_hidden = 8;
  c.head.hidden = 8;
  return c;
}

CheckResult check_pipeline_gradients(std::uint64_t seed) {
  const auto t0 = Clock::now();
  CheckResult r{"pipeline gradient vs central differences", false, 0.0, 1e-4, 0, {}, 0.0};
  const std::size_t L = 8, M = 9;
  BarfiqNetwork net(tiny_network_config(), L, M, seed);
  Rng rng(seed + 1);
  const Tensor window = random_tensor(L, M, 1.0, rng);
  const auto target = data::CircularTarget::from_angle(std::uniform_real_distribution<double>(-kPi, kPi)(rng));
  head::LossConfig loss_cfg;
  loss_cfg.lambda = 0.5;
  ForwardContext ctx;
  ctx.training = true;  // token-statistics path; dropout is configured off
  const auto report = grad_check(net.parameters(), [&] {
    return head::total_loss(net.forward(window, ctx).normalized, target, loss_cfg);
  }, 1e-5);
  r.worst = report.max_rel_error;
  r.cases = report.param_count;
  std::string worst_name;
  double worst = -1.0;
  for (const auto& p : report.per_param_errors)
    if (p.max_rel_error > worst) {
      worst = p.max_rel_error;
      worst_name = p.name;
    }
  r.detail = "worst parameter " + worst_name;
  return finish(r, t0);
}

CheckResult check_loss_identities(std::size_t cases, std::uint64_t seed) {
  const auto t0 = Clock::now();
  CheckResult r{"loss identities (lambda=0, chord, 2pi invariance)", false, 0.0, 1e-12, cases, {}, 0.0};
  Rng rng(seed);
  std::uniform_real_distribution<double> ang(-kPi, kPi);
  std::uniform_int_distribution<int> turns(-3, 3);
  head::LossConfig zero;
  std::vector<double> p, t, p_shift;
  for (std::size_t i = 0; i < cases; ++i) {
    const double a = ang(rng), b = ang(rng);
    const std::array<double, 2> pu{std::cos(a), std::sin(a)}, tu{std::cos(b), std::sin(b)};
    const double circ = head::circular_loss(pu, tu);
    r.worst = std::max(r.worst, std::abs(head::total_loss(pu, tu, zero) - circ));
    r.worst = std::max(r.worst, std::abs(circ - (2.0 - 2.0 * std::cos(a - b))));
    const auto target = data::CircularTarget::from_angle(b);
    const Var pv = constant(Tensor(1, 2, {pu[0], pu[1]}));
    r.worst = std::max(r.worst, std::abs(head::total_loss(pv, target, zero).item() - head::circular_loss(pv, target).item()));
    p.push_back(a);
    t.push_back(b);
    p_shift.push_back(a + kTwoPi * turns(rng));
  }
  const auto m0 = head::wrapped_error_metrics(p, t);
  const auto m1 = head::wrapped_error_metrics(p_shift, t);
  r.worst = std::max({r.worst, std::abs(m0.mse - m1.mse), std::abs(m0.mae - m1.mae), std::abs(m0.rmse - m1.rmse)});
  r.detail = "max identity residual";
  return finish(r, t0);
}

std::vector<CheckResult> run_selftest(std::uint64_t seed) {
  return {
      check_bar_partition(1000, seed),
      check_bar_boundedness(1000, seed + 1),
      check_bar_limiting(1000, seed + 2),
      check_bar_dominance(1000, seed + 3),
      check_qfm_oracle(200, seed + 4),
      check_qfm_bounds(20, seed + 5),
      check_pipeline_gradients(seed + 6),
      check_loss_identities(1000, seed + 7),
  };
}

}  // namespace barfiq::verify
