#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "barfiq/angle.hpp"
#include "barfiq/errors.hpp"
#include "barfiq/qfm.hpp"
#include "barfiq/verify/dense_oracle.hpp"
#include "test_util.hpp"

using namespace barfiq;
using namespace barfiq::qfm;
using testutil::randn;

namespace {

std::vector<double> z_of(std::span<const double> angles, std::size_t nq, std::size_t depth) {
  return measure_z(run_circuit(angles, nq, depth));
}

}  // namespace

TEST(QfmConfig, Validation) {
  QfmConfig c;
  EXPECT_NO_THROW(c.validate());
  c.n_qubits = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = QfmConfig{};
  c.depth = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = QfmConfig{};
  c.n_heads = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_EQ(norm_eval_from_string("token"), NormEval::token);
  EXPECT_EQ(to_string(NormEval::running), "running");
  EXPECT_THROW(norm_eval_from_string("batch"), ConfigError);
}

TEST(Circuit, ZeroAnglesStayInGroundState) {
  for (std::size_t depth : {1u, 2u, 5u}) {
    const std::vector<double> zero(3, 0.0);
    const StateVector s = run_circuit(zero, 3, depth);
    EXPECT_EQ(s.amplitudes()[0], Amplitude(1.0, 0.0));
    for (double z : measure_z(s)) EXPECT_DOUBLE_EQ(z, 1.0);
  }
}

TEST(Circuit, TwoQubitExamples) {
  const double flip[2] = {kPi, 0.0};
  StateVector s = run_circuit(flip, 2, 1);
  const double want1[4] = {0, 1, 0, 0};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(std::abs(s.amplitudes()[i]), want1[i], 1e-15);

  const double half[2] = {kPi / 2, 0.0};
  s = run_circuit(half, 2, 1);
  const double r = 1.0 / std::sqrt(2.0);
  const double want2[4] = {r, r, 0, 0};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(s.amplitudes()[i].real(), want2[i], 1e-15);
  const auto z = measure_z(s);
  EXPECT_NEAR(z[0], 1.0, 1e-15);
  EXPECT_NEAR(z[1], 0.0, 1e-15);
}

TEST(Measure, UniformSuperpositionIsBalanced) {
  StateVector s(3);
  for (auto& a : s.amplitudes()) a = Amplitude(std::pow(2.0, -1.5), 0.0);
  for (double z : measure_z(s)) EXPECT_NEAR(z, 0.0, 1e-15);
  s.amplitudes()[0] = 2.0;
  EXPECT_THROW(measure_z(s), NumericalError);
}

TEST(Circuit, MatchesDenseUnitaries) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-kPi, kPi);
  for (std::size_t nq = 2; nq <= 4; ++nq)
    for (std::size_t depth = 1; depth <= 3; ++depth)
      for (int t = 0; t < 20; ++t) {
        std::vector<double> a(nq);
        for (double& x : a) x = u(rng);
        const auto dense = verify::dense_circuit_state(a, nq, depth);
        const StateVector s = run_circuit(a, nq, depth);
        for (std::size_t i = 0; i < dense.size(); ++i) ASSERT_LT(std::abs(s.amplitudes()[i] - dense[i]), 1e-10);
      }
}

TEST(Circuit, CnotTruthTable) {
  StateVector s(3);
  s.amplitudes()[0] = 0.0;
  s.amplitudes()[0b110] = 1.0;  // q0 = 1, q1 = 1, q2 = 0
  s.apply_cnot(1, 2);
  EXPECT_EQ(s.amplitudes()[0b111], Amplitude(1.0));
  s.apply_cnot(2, 0);
  EXPECT_EQ(s.amplitudes()[0b011], Amplitude(1.0));
}

TEST(Circuit, NormPreservedAndOutputsBounded) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (std::size_t nq = 2; nq <= 6; ++nq) {
    std::vector<double> a(nq);
    for (double& x : a) x = u(rng);
    StateVector s(nq);
    for (std::size_t layer = 0; layer < 3; ++layer) {
      for (std::size_t q = 0; q < nq; ++q) {
        s.apply_ry(q, a[q]);
        ASSERT_NEAR(s.norm_squared(), 1.0, 1e-10);
      }
      for (std::size_t q = 0; q < nq; ++q) {
        s.apply_cnot(q, (q + 1) % nq);
        ASSERT_NEAR(s.norm_squared(), 1.0, 1e-10);
      }
    }
    const auto z = measure_z(s);
    double n2 = 0;
    for (double v : z) {
      EXPECT_GE(v, -1.0);
      EXPECT_LE(v, 1.0);
      n2 += v * v;
    }
    EXPECT_LE(std::sqrt(n2), std::sqrt(static_cast<double>(nq)) + 1e-12);
  }
}

TEST(Circuit, LayeredWithRepeatedAnglesEqualsShared) {
  const std::vector<double> a{0.3, -1.2, 2.0};
  std::vector<double> layered;
  for (int d = 0; d < 2; ++d) layered.insert(layered.end(), a.begin(), a.end());
  const StateVector x = run_circuit(a, 3, 2), y = run_layered_circuit(layered, 3, 2);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(x.amplitudes()[i], y.amplitudes()[i]);
}

TEST(ExpectationOp, ParameterShiftMatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  for (std::size_t nq : {2u, 3u, 4u})
    for (std::size_t depth : {1u, 2u, 3u}) {
      const double err = testutil::op_grad_error({randn(3, nq, rng)},
                                                 [&](const std::vector<Var>& v) { return expectation_op(v[0], depth); },
                                                 5, 1e-6);
      EXPECT_LT(err, 1e-5) << "nq=" << nq << " depth=" << depth;
    }
}

TEST(ExpectationOp, RowsMatchPerTokenCircuits) {
  std::mt19937_64 rng(4);
  const Tensor a = randn(3, 3, rng);
  const Tensor m = expectation_op(constant(a), 2).value();
  for (std::size_t t = 0; t < 3; ++t) {
    const auto z = z_of(a.row(t), 3, 2);
    for (std::size_t q = 0; q < 3; ++q) EXPECT_NEAR(m(t, q), z[q], 1e-10);
  }
}

TEST(HeadAngles, Examples) {
  std::mt19937_64 rng(5);
  const Tensor w = randn(4, 3, rng), b = randn(1, 3, rng);
  const std::vector<double> zero(4, 0.0);
  const auto a = head_angles(zero, w, Tensor(1, 3));
  for (double v : a) EXPECT_EQ(v, 0.0);
  const auto c = head_angles(zero, w, b);
  for (std::size_t r = 0; r < 3; ++r) EXPECT_EQ(c[r], b(0, r));
  const Tensor z = randn(1, 4, rng);
  const auto d = head_angles(z.data(), w, b);
  const Tensor want = matmul(z, w);
  for (std::size_t r = 0; r < 3; ++r) EXPECT_NEAR(d[r], want(0, r) + b(0, r), 1e-12);
  EXPECT_THROW(head_angles(std::vector<double>(3), w, b), ShapeError);
}

TEST(HeadForward, ZeroParametersGiveAllOnes) {
  QfmConfig cfg;
  cfg.n_qubits = 3;
  std::mt19937_64 rng(6);
  const HeadParams h{constant(Tensor(5, 3)), constant(Tensor(1, 3))};
  const Tensor m = qfm_head_forward(constant(randn(4, 5, rng)), h, cfg).value();
  for (double v : m.data()) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(Mix, Examples) {
  std::mt19937_64 rng(7);
  const Tensor z = randn(3, 4, rng), m1 = randn(3, 4, rng), m2 = randn(3, 2, rng);
  EXPECT_EQ(max_abs_diff(qfm_mix(constant(z), {constant(m1)}, constant(Tensor(4, 4)), constant(Tensor(1, 4))).value(), z),
            0.0);
  Tensor eye(4, 4);
  for (std::size_t i = 0; i < 4; ++i) eye(i, i) = 1.0;
  Tensor zm = z;
  for (std::size_t i = 0; i < zm.size(); ++i) zm[i] += m1[i];
  EXPECT_LT(max_abs_diff(qfm_mix(constant(z), {constant(m1)}, constant(eye), constant(Tensor(1, 4))).value(), zm),
            1e-15);
  const Tensor w = randn(6, 4, rng), b = randn(1, 4, rng);
  const Tensor got = qfm_mix(constant(z), {constant(m1), constant(m2)}, constant(w), constant(b)).value();
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t j = 0; j < 4; ++j) {
      double want = z(t, j) + b(0, j);
      for (std::size_t c = 0; c < 4; ++c) want += m1(t, c) * w(c, j);
      for (std::size_t c = 0; c < 2; ++c) want += m2(t, c) * w(4 + c, j);
      EXPECT_NEAR(got(t, j), want, 1e-12);
    }
}

namespace {

PostParams random_post(std::size_t d, std::size_t h, std::mt19937_64& rng) {
  return {constant(randn(1, d, rng)), constant(randn(1, d, rng)), constant(randn(d, h, rng)),
          constant(randn(1, h, rng)), constant(randn(h, d, rng)),  constant(randn(1, d, rng))};
}

}  // namespace

TEST(Postprocess, ZeroOutputLayerIsIdentity) {
  std::mt19937_64 rng(8);
  PostParams p = random_post(3, 4, rng);
  p.w2 = constant(Tensor(4, 3));
  p.b2 = constant(Tensor(1, 3));
  const Tensor y = randn(5, 3, rng);
  EXPECT_EQ(max_abs_diff(qfm_postprocess(constant(y), p, 1e-5).value(), y), 0.0);
}

TEST(Postprocess, ConstantColumnBecomesShift) {
  std::mt19937_64 rng(9);
  PostParams p = random_post(2, 3, rng);
  Tensor y = randn(4, 2, rng);
  for (std::size_t t = 0; t < 4; ++t) y(t, 1) = 2.5;
  // with an identity-like probe: first-layer input column 1 must equal shift[1]
  const Var yhat = ops::standardize_cols(constant(y), 1e-5);
  const Tensor bn = ops::add_row(ops::mul_row(yhat, p.scale), p.shift).value();
  for (std::size_t t = 0; t < 4; ++t) EXPECT_EQ(bn(t, 1), p.shift.value()(0, 1));
  EXPECT_TRUE(qfm_postprocess(constant(y), p, 1e-5).value().all_finite());
}

TEST(Postprocess, FixedStatisticsOracle) {
  std::mt19937_64 rng(10);
  const std::size_t d = 3, h = 4;
  const PostParams p = random_post(d, h, rng);
  const Tensor y = randn(5, d, rng);
  FixedStats st{randn(1, d, rng), Tensor(1, d)};
  for (std::size_t c = 0; c < d; ++c) st.variance[c] = 0.5 + c;
  const Tensor got = qfm_postprocess(constant(y), p, 1e-5, &st).value();
  for (std::size_t t = 0; t < 5; ++t) {
    std::vector<double> bn(d), hid(h);
    for (std::size_t c = 0; c < d; ++c)
      bn[c] = p.scale.value()[c] * (y(t, c) - st.mean[c]) / std::sqrt(st.variance[c] + 1e-5) + p.shift.value()[c];
    for (std::size_t j = 0; j < h; ++j) {
      double s = p.b1.value()[j];
      for (std::size_t c = 0; c < d; ++c) s += bn[c] * p.w1.value()(c, j);
      hid[j] = std::max(0.0, s);
    }
    for (std::size_t c = 0; c < d; ++c) {
      double s = y(t, c) + p.b2.value()[c];
      for (std::size_t j = 0; j < h; ++j) s += hid[j] * p.w2.value()(j, c);
      EXPECT_NEAR(got(t, c), s, 1e-10);
    }
  }
}

TEST(Correlation, Examples) {
  std::mt19937_64 rng(11);
  Tensor x = randn(8, 3, rng);
  for (std::size_t t = 0; t < 8; ++t) {
    x(t, 1) = x(t, 0);
    x(t, 2) = -x(t, 0);
  }
  const Correlation c = pearson_correlation(x);
  EXPECT_NEAR(*c.at(0, 1), 1.0, 1e-12);
  EXPECT_NEAR(*c.at(0, 2), -1.0, 1e-12);

  const Tensor r = randn(8, 3, rng);
  const Correlation cr = pearson_correlation(r);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double mi = 0, mj = 0;
      for (std::size_t t = 0; t < 8; ++t) {
        mi += r(t, i) / 8;
        mj += r(t, j) / 8;
      }
      double cov = 0, vi = 0, vj = 0;
      for (std::size_t t = 0; t < 8; ++t) {
        cov += (r(t, i) - mi) * (r(t, j) - mj);
        vi += (r(t, i) - mi) * (r(t, i) - mi);
        vj += (r(t, j) - mj) * (r(t, j) - mj);
      }
      EXPECT_NEAR(*cr.at(i, j), cov / std::sqrt(vi * vj), 1e-10);
    }
}

TEST(Correlation, ConstantColumnIsUndefined) {
  Tensor x = Tensor::from_rows({{1, 3}, {2, 3}, {4, 3}});
  const Correlation c = pearson_correlation(x);
  EXPECT_TRUE(c.at(0, 0).has_value());
  EXPECT_FALSE(c.at(0, 1).has_value());
  EXPECT_FALSE(c.at(1, 1).has_value());
  EXPECT_THROW(pearson_correlation(Tensor(1, 2)), DomainError);
  const CorrelationReport rep = correlation_maps({x, x}, {x, x});
  EXPECT_EQ(rep.pre.size(), 2u);
  EXPECT_EQ(rep.post.size(), 2u);
  EXPECT_THROW(correlation_maps({x, x}, {x}), std::exception);
}

TEST(QfmBlock, RunningStatisticsAndModes) {
  QfmConfig cfg;
  cfg.n_qubits = 2;
  cfg.n_heads = 2;
  cfg.d_q = 3;
  cfg.post_hidden = 4;
  ParameterSet ps;
  Rng rng(12);
  QfmBlock blk(ps, "qfm", cfg, 5, rng);
  EXPECT_TRUE(ps.contains("qfm.head1.w_theta"));
  ASSERT_EQ(ps.buffers().count("qfm.post.norm.running_mean"), 1u);
  const Tensor mean0 = ps.buffers().at("qfm.post.norm.running_mean");
  std::mt19937_64 g(13);
  const Var x = constant(randn(4, 5, g));
  ForwardContext train;
  train.training = true;
  QfmTrace trace;
  const Tensor out_train = blk.forward(x, train, &trace).value();
  EXPECT_EQ(trace.maps.size(), 2u);
  EXPECT_GT(max_abs_diff(ps.buffers().at("qfm.post.norm.running_mean"), mean0), 0.0);
  const Tensor snapshot_mean = ps.buffers().at("qfm.post.norm.running_mean");
  const Tensor out_eval = blk.forward(x, ForwardContext{}).value();
  EXPECT_EQ(max_abs_diff(ps.buffers().at("qfm.post.norm.running_mean"), snapshot_mean), 0.0);
  EXPECT_GT(max_abs_diff(out_eval, out_train), 0.0);

  cfg.norm_eval = NormEval::token;
  ParameterSet ps2;
  Rng rng2(12);
  QfmBlock tok(ps2, "qfm", cfg, 5, rng2);
  // same init; token mode in eval reproduces the training-mode output
  EXPECT_LT(max_abs_diff(tok.forward(x, ForwardContext{}).value(), out_train), 1e-15);
}

TEST(QfmBlock, GradientsMatchFiniteDifferences) {
  QfmConfig cfg;
  cfg.n_qubits = 2;
  cfg.n_heads = 2;
  cfg.d_q = 3;
  cfg.post_hidden = 4;
  ParameterSet ps;
  Rng rng(14);
  QfmBlock blk(ps, "qfm", cfg, 4, rng);
  std::mt19937_64 g(15);
  const Var x = constant(randn(5, 4, g));
  const Var w = constant(randn(5, 3, g));
  const auto rep = grad_check(ps, [&] { return ops::sum_all(ops::mul(blk.forward(x, ForwardContext{}), w)); }, 1e-5);
  EXPECT_LT(rep.max_rel_error, 1e-4);
}
