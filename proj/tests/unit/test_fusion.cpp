#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "barfiq/errors.hpp"
#include "barfiq/fusion.hpp"
#include "test_util.hpp"

using namespace barfiq;
using namespace barfiq::fusion;
using testutil::randn;

namespace {

double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

ConvPathway random_pathway(std::size_t d, std::mt19937_64& g) {
  ConvPathway p;
  p.lin_in_w = constant(randn(d, d, g));
  p.lin_in_b = constant(randn(1, d, g));
  for (std::size_t k : {3, 5, 7}) p.kernels.push_back(constant(randn(d, k, g)));
  p.lin_out_w = constant(randn(d, d, g));
  p.lin_out_b = constant(randn(1, d, g));
  return p;
}

// Plain-loop version of linear-in -> depthwise convs -> linear-out.
Tensor pathway_oracle(const Tensor& x, const ConvPathway& p) {
  const std::size_t t = x.rows(), d = x.cols();
  Tensor h(t, d), c(t, d), o(t, d);
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      h(i, j) = p.lin_in_b.value()(0, j);
      for (std::size_t m = 0; m < d; ++m) h(i, j) += x(i, m) * p.lin_in_w.value()(m, j);
    }
  for (const Var& kv : p.kernels) {
    const Tensor& w = kv.value();
    const long k = static_cast<long>(w.cols());
    for (long i = 0; i < static_cast<long>(t); ++i)
      for (std::size_t ch = 0; ch < d; ++ch)
        for (long j = 0; j < k; ++j) {
          const long src = i + j - k / 2;
          if (src >= 0 && src < static_cast<long>(t)) c(i, ch) += w(ch, j) * h(src, ch);
        }
  }
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      o(i, j) = p.lin_out_b.value()(0, j);
      for (std::size_t m = 0; m < d; ++m) o(i, j) += c(i, m) * p.lin_out_w.value()(m, j);
    }
  return o;
}

void zero_out(ConvPathway& p) {
  p.lin_out_w.mutable_value().fill(0.0);
  p.lin_out_b.mutable_value().fill(0.0);
}

}  // namespace

TEST(FusionConfig, Variants) {
  FusionConfig c;
  EXPECT_EQ(c.variant(), "ca_sa");
  for (const char* v : {"sa", "ca", "none", "ca_sa"}) {
    c.set_variant(v);
    EXPECT_EQ(c.variant(), v);
  }
  EXPECT_THROW(c.set_variant("both"), ConfigError);
  c.kernel_sizes = {3, 4};
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(FuseProject, Examples) {
  std::mt19937_64 g(1);
  const Tensor s = randn(3, 2, g);
  Tensor w(4, 2);
  w(0, 0) = w(2, 0) = w(1, 1) = w(3, 1) = 0.5;
  const Tensor out = fuse_project({constant(s), constant(s)}, constant(w), constant(Tensor(1, 2))).value();
  EXPECT_LT(max_abs_diff(out, s), 1e-15);
  EXPECT_EQ(fuse_project({constant(Tensor(3, 2)), constant(Tensor(3, 2))}, constant(randn(4, 5, g)),
                         constant(Tensor(1, 5)))
                .value()
                .frobenius_norm(),
            0.0);
  const Tensor a = randn(2, 2, g), b = randn(2, 3, g), W = randn(5, 4, g), bias = randn(1, 4, g);
  const Tensor got = fuse_project({constant(a), constant(b)}, constant(W), constant(bias)).value();
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      double want = bias(0, j);
      for (std::size_t m = 0; m < 2; ++m) want += a(i, m) * W(m, j);
      for (std::size_t m = 0; m < 3; ++m) want += b(i, m) * W(2 + m, j);
      EXPECT_NEAR(got(i, j), want, 1e-12);
    }
  EXPECT_THROW(fuse_project({constant(Tensor(2, 2)), constant(Tensor(3, 2))}, constant(W), constant(bias)),
               ShapeError);
}

TEST(FuseProject, TimePermutationEquivariance) {
  std::mt19937_64 g(2);
  const Tensor a = randn(5, 3, g), b = randn(5, 3, g), W = randn(6, 4, g), bias = randn(1, 4, g);
  const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  const Tensor base = fuse_project({constant(a), constant(b)}, constant(W), constant(bias)).value();
  const Var pa = ops::gather_rows(constant(a), perm), pb = ops::gather_rows(constant(b), perm);
  const Tensor permuted = fuse_project({pa, pb}, constant(W), constant(bias)).value();
  const Tensor unperm = ops::scatter_rows(constant(permuted), perm, 5).value();
  EXPECT_LT(max_abs_diff(unperm, base), 1e-15);
}

TEST(MultiscaleConv, Examples) {
  std::mt19937_64 g(3);
  std::vector<Var> zero{constant(Tensor(2, 3)), constant(Tensor(2, 5)), constant(Tensor(2, 7))};
  EXPECT_EQ(multiscale_conv(constant(randn(6, 2, g)), zero).value().frobenius_norm(), 0.0);
  Tensor impulse(5, 1);
  impulse(2, 0) = 1.0;
  std::vector<Var> delta{constant(Tensor::from_rows({{0, 1, 0}})), constant(Tensor(1, 5)), constant(Tensor(1, 7))};
  EXPECT_EQ(max_abs_diff(multiscale_conv(constant(impulse), delta).value(), impulse), 0.0);

  ConvPathway p = random_pathway(2, g);
  p.lin_in_w = constant(Tensor::from_rows({{1, 0}, {0, 1}}));
  p.lin_in_b = constant(Tensor(1, 2));
  p.lin_out_w = p.lin_in_w;
  p.lin_out_b = p.lin_in_b;
  const Tensor x = randn(6, 2, g);
  EXPECT_LT(max_abs_diff(multiscale_conv(constant(x), p.kernels).value(), pathway_oracle(x, p)), 1e-12);
}

TEST(ChannelAttention, ZeroCorrectionAndOracle) {
  std::mt19937_64 g(4);
  ConvPathway p = random_pathway(3, g);
  ChannelGate gate{constant(randn(3, 1, g)), constant(randn(1, 3, g))};
  const Tensor x = randn(2, 3, g);
  Tensor a;
  const Tensor got = channel_attention(constant(x), p, gate, &a).value();
  const Tensor c = pathway_oracle(x, p);
  double hidden = 0.0;
  for (std::size_t j = 0; j < 3; ++j) hidden += 0.5 * (c(0, j) + c(1, j)) * gate.w1.value()(j, 0);
  hidden = std::max(hidden, 0.0);
  for (std::size_t j = 0; j < 3; ++j) {
    const double aj = sigm(hidden * gate.w2.value()(0, j));
    EXPECT_NEAR(a(0, j), aj, 1e-12);
    EXPECT_GT(a(0, j), 0.0);
    EXPECT_LT(a(0, j), 1.0);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(got(i, j), x(i, j) + c(i, j) * aj, 1e-10);
  }
  zero_out(p);
  EXPECT_EQ(max_abs_diff(channel_attention(constant(x), p, gate).value(), x), 0.0);
}

TEST(SpatialAttention, ZeroCorrectionConstantPoolAndOracle) {
  std::mt19937_64 g(5);
  ConvPathway p = random_pathway(2, g);
  SpatialGate gate{constant(randn(2, 1, g)), constant(randn(1, 1, g))};
  const Tensor x = randn(4, 2, g);
  Tensor a;
  const Tensor got = spatial_attention(constant(x), p, gate, &a).value();
  const Tensor s = pathway_oracle(x, p);
  for (std::size_t i = 0; i < 4; ++i) {
    const double avg = 0.5 * (s(i, 0) + s(i, 1)), mx = std::max(s(i, 0), s(i, 1));
    const double ai = sigm(avg * gate.w.value()(0, 0) + mx * gate.w.value()(1, 0) + gate.b.value()(0, 0));
    EXPECT_NEAR(a(i, 0), ai, 1e-12);
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(got(i, j), x(i, j) + s(i, j) * ai, 1e-10);
  }
  // a pathway that ignores its input is constant over time
  ConvPathway flat = p;
  flat.lin_in_w = constant(Tensor(2, 2));
  flat.lin_in_b = constant(Tensor(1, 2));
  spatial_attention(constant(x), flat, gate, &a);
  for (std::size_t i = 1; i < 4; ++i) EXPECT_EQ(a(i, 0), a(0, 0));
  zero_out(p);
  EXPECT_EQ(max_abs_diff(spatial_attention(constant(x), p, gate).value(), x), 0.0);
}

TEST(Attention, OrderSensitive) {
  std::mt19937_64 g(6);
  ConvPathway p = random_pathway(3, g);
  ChannelGate gate{constant(randn(3, 1, g)), constant(randn(1, 3, g))};
  const Tensor x = randn(5, 3, g);
  const std::vector<std::size_t> perm{4, 2, 0, 3, 1};
  const Tensor base = channel_attention(constant(x), p, gate).value();
  const Tensor back =
      ops::scatter_rows(channel_attention(ops::gather_rows(constant(x), perm), p, gate), perm, 5).value();
  EXPECT_GT(max_abs_diff(base, back), 1e-6);
}

TEST(FusionBlock, ParametersPerVariant) {
  for (const char* v : {"ca_sa", "sa", "ca", "none"}) {
    FusionConfig c;
    c.d_out = 6;
    c.set_variant(v);
    ParameterSet ps;
    Rng rng(7);
    FusionBlock fb(ps, "fusion", c, 8, 4, rng);
    EXPECT_EQ(ps.contains("fusion.ca.gate.w1"), c.use_channel_attention) << v;
    EXPECT_EQ(ps.contains("fusion.sa.gate.w"), c.use_spatial_attention) << v;
    EXPECT_EQ(ps.get("fusion.proj.w").value().shape(), (std::array<std::size_t, 2>{8, 4}));
    EXPECT_EQ(ps.get("fusion.out.w").value().shape(), (std::array<std::size_t, 2>{4, 6}));
  }
}

TEST(FusionBlock, NoneVariantIsTwoLinears) {
  FusionConfig c;
  c.d_out = 5;
  c.set_variant("none");
  ParameterSet ps;
  Rng rng(8);
  FusionBlock fb(ps, "fusion", c, 6, 4, rng);
  std::mt19937_64 g(9);
  const Var a = constant(randn(3, 3, g)), b = constant(randn(3, 3, g));
  const Tensor want = ops::linear(ops::linear(ops::concat_cols({a, b}), fb.proj_w, fb.proj_b), fb.out_w, fb.out_b).value();
  EXPECT_LT(max_abs_diff(fb.forward({a, b}).value(), want), 1e-15);
}

TEST(FusionBlock, ZeroPathwaysMatchNoneVariant) {
  FusionConfig full;
  full.d_out = 5;
  FusionConfig none = full;
  none.set_variant("none");
  ParameterSet ps1, ps2;
  Rng r1(10), r2(11);
  FusionBlock a(ps1, "fusion", full, 6, 4, r1);
  FusionBlock b(ps2, "fusion", none, 6, 4, r2);
  for (const char* n : {"fusion.proj.w", "fusion.proj.b", "fusion.out.w", "fusion.out.b"})
    ps1.params().at(n).mutable_value() = ps2.get(n).value();
  zero_out(a.ca_path);
  zero_out(a.sa_path);
  std::mt19937_64 g(12);
  const Var x = constant(randn(4, 3, g)), y = constant(randn(4, 3, g));
  AttentionTrace trace;
  EXPECT_EQ(max_abs_diff(a.forward({x, y}, &trace).value(), b.forward({x, y}).value()), 0.0);
  for (double v : trace.channel_gate.data()) EXPECT_TRUE(v > 0.0 && v < 1.0);
  for (double v : trace.spatial_gate.data()) EXPECT_TRUE(v > 0.0 && v < 1.0);
}

TEST(FusionBlock, GradientsMatchFiniteDifferences) {
  FusionConfig c;
  c.d_out = 3;
  c.reduction = 2;
  ParameterSet ps;
  Rng rng(13);
  FusionBlock fb(ps, "fusion", c, 6, 4, rng);
  std::mt19937_64 g(14);
  const Var x = constant(randn(5, 3, g)), y = constant(randn(5, 3, g));
  const Var w = constant(randn(5, 3, g));
  const auto rep = grad_check(ps, [&] { return ops::sum_all(ops::mul(fb.forward({x, y}), w)); }, 1e-5);
  EXPECT_LT(rep.max_rel_error, 1e-4);
}
