#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "barfiq/angle.hpp"
#include "barfiq/errors.hpp"
#include "barfiq/head.hpp"
#include "test_util.hpp"

using namespace barfiq;
using namespace barfiq::head;
using testutil::randn;

namespace {

data::CircularTarget target(double phi) { return data::CircularTarget::from_angle(phi); }

}  // namespace

TEST(CircleNormalize, Examples) {
  const Forecast f = circle_normalize(3.0, 4.0, 0.0);
  EXPECT_NEAR(f.cos_norm, 0.6, 1e-15);
  EXPECT_NEAR(f.sin_norm, 0.8, 1e-15);
  EXPECT_NEAR(f.phi_hat, std::atan2(0.8, 0.6), 1e-15);
  EXPECT_FALSE(f.degenerate);
  EXPECT_EQ(circle_normalize(1.0, 0.0, 1e-8).phi_hat, 0.0);
  EXPECT_TRUE(circle_normalize(0.0, 0.0, 1e-8).degenerate);
}

TEST(ForecastHead, MatchesScalarOracle) {
  HeadConfig cfg;
  cfg.hidden = 3;
  ParameterSet ps;
  Rng rng(1);
  ForecastHead h(ps, "head", cfg, 4, rng);
  std::mt19937_64 g(2);
  for (auto& [name, p] : ps.params()) p.mutable_value() = randn(p.rows(), p.cols(), g);
  const Tensor q = randn(3, 4, g);
  const HeadOutput out = h.forward(constant(q));

  std::vector<double> pooled(4, 0.0);
  for (std::size_t t = 0; t < 3; ++t) {
    double m = 0, v = 0;
    for (std::size_t c = 0; c < 4; ++c) m += q(t, c) / 4;
    for (std::size_t c = 0; c < 4; ++c) v += (q(t, c) - m) * (q(t, c) - m) / 4;
    for (std::size_t c = 0; c < 4; ++c)
      pooled[c] += (h.ln_gamma.value()[c] * (q(t, c) - m) / std::sqrt(v + cfg.ln_eps) + h.ln_beta.value()[c]) / 3;
  }
  std::vector<double> hid(3);
  for (std::size_t j = 0; j < 3; ++j) {
    double s = h.b1.value()[j];
    for (std::size_t c = 0; c < 4; ++c) s += pooled[c] * h.w1.value()(c, j);
    hid[j] = 0.5 * s * (1.0 + std::erf(s / std::sqrt(2.0)));
  }
  double raw[2];
  for (std::size_t o = 0; o < 2; ++o) {
    raw[o] = h.b2.value()[o];
    for (std::size_t j = 0; j < 3; ++j) raw[o] += hid[j] * h.w2.value()(j, o);
  }
  const double n = std::hypot(raw[0], raw[1]) + cfg.circle_eps;
  EXPECT_NEAR(out.forecast.cos_hat, raw[0], 1e-10);
  EXPECT_NEAR(out.forecast.sin_hat, raw[1], 1e-10);
  EXPECT_NEAR(out.normalized.value()(0, 0), raw[0] / n, 1e-10);
  EXPECT_NEAR(out.normalized.value()(0, 1), raw[1] / n, 1e-10);
  EXPECT_NEAR(out.forecast.phi_hat, std::atan2(raw[1], raw[0]), 1e-10);
}

TEST(ForecastHead, TotalLossGradientsMatchFiniteDifferences) {
  HeadConfig cfg;
  cfg.hidden = 5;
  ParameterSet ps;
  Rng rng(3);
  ForecastHead h(ps, "head", cfg, 4, rng);
  std::mt19937_64 g(4);
  const Tensor q = randn(3, 4, g);
  LossConfig lc;
  lc.lambda = 0.3;
  const auto rep =
      grad_check(ps, [&] { return total_loss(h.forward(constant(q)).normalized, target(0.7), lc); }, 1e-5);
  EXPECT_LT(rep.max_rel_error, 1e-4);
}

TEST(Loss, CircularExamples) {
  EXPECT_EQ(circular_loss({0.6, 0.8}, {0.6, 0.8}), 0.0);
  EXPECT_NEAR(circular_loss({1.0, 0.0}, {-1.0, 0.0}), 4.0, 1e-15);
  EXPECT_NEAR(circular_loss({1.0, 0.0}, {std::cos(0.5), std::sin(0.5)}), 2.0 - 2.0 * std::cos(0.5), 1e-15);
}

TEST(Loss, CosineExamples) {
  EXPECT_NEAR(cosine_loss({1.0, 0.0}, {1.0, 0.0}, 0.0), 0.0, 1e-15);
  EXPECT_NEAR(cosine_loss({1.0, 0.0}, {0.0, 1.0}, 0.0), 1.0, 1e-15);
  EXPECT_NEAR(cosine_loss({1.0, 0.0}, {-1.0, 0.0}, 0.0), 2.0, 1e-15);
}

TEST(Loss, TotalExamples) {
  LossConfig zero;
  LossConfig tenth;
  tenth.lambda = 0.1;
  tenth.eps = 0.0;
  EXPECT_EQ(total_loss({0.3, -0.2}, {0.6, 0.8}, zero), circular_loss({0.3, -0.2}, {0.6, 0.8}));
  EXPECT_NEAR(total_loss({0.6, 0.8}, {0.6, 0.8}, tenth), 0.0, 1e-15);
  EXPECT_NEAR(total_loss({1.0, 0.0}, {0.0, 1.0}, tenth), 2.1, 1e-15);
  LossConfig bad;
  bad.lambda = -1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Loss, VarFormsAgreeWithScalarForms) {
  std::mt19937_64 g(5);
  std::uniform_real_distribution<double> u(-kPi, kPi);
  LossConfig lc;
  lc.lambda = 0.4;
  for (int i = 0; i < 100; ++i) {
    const double a = u(g), b = u(g);
    const Var p = constant(Tensor::from_rows({{std::cos(a) * 0.9, std::sin(a) * 1.1}}));
    const auto t = target(b);
    const std::array<double, 2> pa{p.value()[0], p.value()[1]}, ta{t.cos_c, t.sin_c};
    EXPECT_NEAR(circular_loss(p, t).item(), circular_loss(pa, ta), 1e-14);
    EXPECT_NEAR(cosine_loss(p, t, 1e-8).item(), cosine_loss(pa, ta, 1e-8), 1e-14);
    EXPECT_NEAR(total_loss(p, t, lc).item(), total_loss(pa, ta, lc), 1e-14);
  }
}

TEST(Loss, ChordIdentity) {
  std::mt19937_64 g(6);
  std::uniform_real_distribution<double> u(-kPi, kPi);
  for (int i = 0; i < 1000; ++i) {
    const double a = u(g), b = u(g);
    EXPECT_NEAR(circular_loss({std::cos(a), std::sin(a)}, {std::cos(b), std::sin(b)}), 2.0 - 2.0 * std::cos(a - b),
                1e-12);
  }
}

TEST(Metrics, Examples) {
  const std::vector<double> x{0.1, -2.0, 3.0};
  const WrappedMetrics same = wrapped_error_metrics(x, x);
  EXPECT_EQ(same.mse, 0.0);
  EXPECT_EQ(same.mae, 0.0);
  EXPECT_EQ(same.n_samples, 3u);
  const std::vector<double> p{kPi - 0.1}, t{-kPi + 0.1};
  EXPECT_NEAR(wrapped_error_metrics(p, t).mae, 0.2, 1e-12);
  const std::vector<double> p2{0.5, -0.5}, t2{0.0, 0.0};
  const WrappedMetrics m = wrapped_error_metrics(p2, t2);
  EXPECT_NEAR(m.mse, 0.25, 1e-15);
  EXPECT_NEAR(m.mae, 0.5, 1e-15);
  EXPECT_NEAR(m.rmse, 0.5, 1e-15);
}

TEST(Metrics, TwoPiInvariance) {
  std::mt19937_64 g(7);
  std::uniform_real_distribution<double> u(-kPi, kPi);
  std::vector<double> p(50), t(50);
  for (std::size_t i = 0; i < 50; ++i) {
    p[i] = u(g);
    t[i] = u(g);
  }
  const WrappedMetrics base = wrapped_error_metrics(p, t);
  for (std::size_t i = 0; i < 50; i += 3) p[i] += kTwoPi;
  for (std::size_t i = 1; i < 50; i += 4) t[i] -= kTwoPi;
  const WrappedMetrics shifted = wrapped_error_metrics(p, t);
  EXPECT_NEAR(shifted.mse, base.mse, 1e-12);
  EXPECT_NEAR(shifted.mae, base.mae, 1e-12);
}

TEST(Metrics, AtanFormAgreesWithWrapInside) {
  std::mt19937_64 g(8);
  std::uniform_real_distribution<double> u(-kPi + 1e-9, kPi - 1e-9);
  for (int i = 0; i < 1000; ++i) {
    const double d = u(g);
    EXPECT_NEAR(std::atan2(std::sin(d), std::cos(d)), wrap_pi(d), 1e-9);
  }
}

TEST(Metrics, Errors) {
  EXPECT_THROW(wrapped_error_metrics(std::vector<double>{}, std::vector<double>{}), DomainError);
  EXPECT_THROW(wrapped_error_metrics(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}), DomainError);
  EXPECT_THROW(wrapped_error_metrics(std::vector<double>{NAN}, std::vector<double>{1.0}), DomainError);
}

TEST(Metrics, JsonRoundTrip) {
  WrappedMetrics m{0.125, 0.25, std::sqrt(0.125), 17};
  const std::string js = metrics_to_json(m);
  const WrappedMetrics back = metrics_from_json(js);
  EXPECT_EQ(back.mse, m.mse);
  EXPECT_EQ(back.mae, m.mae);
  EXPECT_EQ(back.rmse, m.rmse);
  EXPECT_EQ(back.n_samples, 17u);
  EXPECT_THROW(metrics_from_json("{\"mse\": 1}"), DataError);
  EXPECT_THROW(metrics_from_json("not json"), DataError);
}
