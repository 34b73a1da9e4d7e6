#include <kedge/hardkuma.hpp>
#include <kedge/rng.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "testutil.hpp"

using namespace kedge;
using testutil::close_rel;

namespace {

Real mc_sigma(Real p, int n) { return std::sqrt(p * (1.0 - p) / n); }

}  // namespace

TEST_CASE("kuma_cdf basics") {
  CHECK(kuma_cdf(0.5, 1.0, 1.0) == 0.5);  // alpha=beta=1 is the uniform
  for (Real a : {0.3, 1.0, 2.0, 5.0})
    for (Real b : {0.5, 1.0, 4.0}) {
      CHECK(kuma_cdf(0.0, a, b) == 0.0);
      CHECK(kuma_cdf(1.0, a, b) == 1.0);
    }
  CHECK_THROWS_AS(kuma_cdf(-0.1, 1.0, 1.0), DomainError);
  CHECK_THROWS_AS(kuma_cdf(1.1, 1.0, 1.0), DomainError);
  CHECK_THROWS_AS(kuma_cdf(0.5, 0.0, 1.0), DomainError);
}

TEST_CASE("kuma_cdf against quadrature of the density") {
  // Hand value: F(0.25; 2, 2) = 1 - (1 - 0.0625)^2.
  CHECK(kuma_cdf(0.25, 2.0, 2.0) == Catch::Approx(0.12109375).margin(1e-15));
  const Real by_quadrature =
      testutil::integrate([](Real y) { return kuma_pdf(y, 2.0, 2.0); }, 0.0, 0.25);
  CHECK(close_rel(by_quadrature, 0.12109375, 1e-8));

  // A shape with interior mass and one with bathtub singularities.
  for (auto [a, b] : {std::pair{3.0, 1.7}, std::pair{0.5, 0.5}}) {
    for (Real y : {0.15, 0.5, 0.85}) {
      const Real q = testutil::integrate([=](Real t) { return kuma_pdf(t, a, b); }, 0.0, y);
      CHECK(close_rel(kuma_cdf(y, a, b), q, 1e-7));
    }
  }
}

TEST_CASE("kuma_pdf basics and normalization") {
  for (Real y : {0.01, 0.4, 0.99}) CHECK(kuma_pdf(y, 1.0, 1.0) == 1.0);
  CHECK_THROWS_AS(kuma_pdf(0.0, 1.0, 1.0), DomainError);
  CHECK_THROWS_AS(kuma_pdf(1.0, 1.0, 1.0), DomainError);

  const Real total =
      testutil::integrate([](Real y) { return kuma_pdf(y, 0.5, 0.5); }, 0.0, 1.0);
  CHECK(std::abs(total - 1.0) < 1e-6);
}

TEST_CASE("kuma_pdf is the derivative of kuma_cdf") {
  for (auto [a, b] : {std::pair{2.0, 2.0}, std::pair{0.7, 1.3}, std::pair{4.0, 0.8}}) {
    for (Real y : {0.2, 0.5, 0.8}) {
      const Real fd = testutil::central_diff(
          [=](Real t) { return kuma_cdf(t, a, b); }, y, 1e-6);
      CHECK(close_rel(fd, kuma_pdf(y, a, b), 1e-5));
    }
  }
}

TEST_CASE("kuma_icdf endpoints, identity case, and frozen round trip") {
  CHECK(kuma_icdf(0.0, 2.0, 3.0) == 0.0);
  CHECK(kuma_icdf(1.0, 2.0, 3.0) == 1.0);
  for (Real u : {0.1, 0.37, 0.92}) CHECK(kuma_icdf(u, 1.0, 1.0) == Catch::Approx(u).margin(1e-15));
  CHECK(kuma_icdf(0.12109375, 2.0, 2.0) == Catch::Approx(0.25).margin(1e-12));
}

TEST_CASE("cdf/icdf round trip stays within 1e-10 (or the float64 floor)") {
  // Near u=1 with alpha >> beta the true quantile y* falls within one ulp of
  // 1 and the forward density exceeds 1e7, so |F(fl(y*)) - u| can reach
  // pdf(y)*ulp(y) > 1e-10 for any double-precision implementation. At those
  // few grid points we require machine-optimal rounding instead of 1e-10.
  int floor_limited = 0;
  for (Real a : {0.3, 0.5, 1.0, 2.0, 5.0})
    for (Real b : {0.3, 0.5, 1.0, 2.0, 5.0})
      for (int i = 0; i <= 1000; ++i) {
        const Real u = i / 1000.0;
        const Real y = kuma_icdf(u, a, b);
        const Real err = std::abs(kuma_cdf(y, a, b) - u);
        Real allowed = 1e-10;
        if (y > 0.0 && y < 1.0) {
          const Real ulp = std::nextafter(y, 2.0) - y;
          allowed = std::max(allowed, kuma_pdf(y, a, b) * ulp);
        }
        if (err > 1e-10) ++floor_limited;
        REQUIRE(err <= allowed);
      }
  CHECK(floor_limited <= 5);
}

TEST_CASE("hardkuma_sample: uniform shapes with the default support") {
  const KumaSupport s{-0.1, 1.1};
  // z = clamp(-0.1 + 1.2u) when alpha = beta = 1.
  CHECK(hardkuma_sample(0.05, 1.0, 1.0, s) == 0.0);
  CHECK(hardkuma_sample(0.5, 1.0, 1.0, s) == Catch::Approx(0.5).margin(1e-15));
  CHECK(hardkuma_sample(0.95, 1.0, 1.0, s) == 1.0);
  CHECK_THROWS_AS(hardkuma_sample(0.0, 1.0, 1.0, s), DomainError);
  CHECK_THROWS_AS(hardkuma_sample(1.0, 1.0, 1.0, s), DomainError);
  CHECK_THROWS_AS(hardkuma_sample(0.5, 1.0, 1.0, KumaSupport{0.1, 1.1}), DomainError);
}

TEST_CASE("hardkuma_sample is monotone in u") {
  for (auto [a, b] : {std::pair{0.5, 0.5}, std::pair{2.0, 1.0}, std::pair{1.3, 3.0}}) {
    Real prev = 0.0;
    for (int i = 1; i < 400; ++i) {
      const Real z = hardkuma_sample(i / 400.0, a, b);
      REQUIRE(z >= prev);
      prev = z;
    }
  }
}

TEST_CASE("point masses: closed forms and complementarity") {
  const KumaSupport s{-0.1, 1.1};  // cut points 1/12 and 11/12
  CHECK(hardkuma_prob_zero(1.0, 1.0, s) == Catch::Approx(1.0 / 12.0).margin(1e-15));
  CHECK(hardkuma_prob_one(1.0, 1.0, s) == Catch::Approx(1.0 / 12.0).margin(1e-15));

  const Real p0_half = 1.0 - std::sqrt(1.0 - std::sqrt(1.0 / 12.0));
  CHECK(hardkuma_prob_zero(0.5, 0.5, s) == Catch::Approx(p0_half).margin(1e-12));
  CHECK(p0_half == Catch::Approx(0.15660).margin(5e-6));

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<Real> shape(0.3, 4.0);
  for (int trial = 0; trial < 25; ++trial) {
    const Real a = shape(rng), b = shape(rng);
    const Real p0 = hardkuma_prob_zero(a, b, s);
    const Real p1 = hardkuma_prob_one(a, b, s);
    const Real pc = kuma_cdf(11.0 / 12.0, a, b) - kuma_cdf(1.0 / 12.0, a, b);
    CHECK(p0 > 0.0);
    CHECK(p1 > 0.0);
    CHECK(std::abs(p0 + p1 + pc - 1.0) < 1e-12);
  }
}

TEST_CASE("point masses match Monte-Carlo frequencies") {
  const KumaSupport s{-0.1, 1.1};
  const int n = 1'000'000;
  for (auto [a, b] : {std::pair{0.5, 0.5}, std::pair{1.7, 0.9}}) {
    int zeros = 0, ones = 0;
    for (int i = 0; i < n; ++i) {
      const Real z = hardkuma_sample(counter_uniform(42, 0, 0, i), a, b, s);
      zeros += z == 0.0;
      ones += z == 1.0;
    }
    const Real p0 = hardkuma_prob_zero(a, b, s);
    const Real p1 = hardkuma_prob_one(a, b, s);
    CHECK(std::abs(zeros / Real(n) - p0) <= 3.0 * mc_sigma(p0, n));
    CHECK(std::abs(ones / Real(n) - p1) <= 3.0 * mc_sigma(p1, n));
  }
}

TEST_CASE("kuma_mean closed form") {
  CHECK(kuma_mean(1.0, 1.0) == Catch::Approx(0.5).margin(1e-15));
  // integral of y * 4y(1-y^2) over (0,1) is 8/15
  CHECK(kuma_mean(2.0, 2.0) == Catch::Approx(8.0 / 15.0).margin(1e-12));
  const Real quad = testutil::integrate(
      [](Real y) { return y * kuma_pdf(y, 2.0, 2.0); }, 0.0, 1.0);
  CHECK(close_rel(quad, 8.0 / 15.0, 1e-8));
}

TEST_CASE("kuma_mean matches Monte-Carlo sample mean") {
  const int n = 1'000'000;
  for (auto [a, b] : {std::pair{2.0, 2.0}, std::pair{0.6, 1.4}}) {
    Real sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
      const Real y = kuma_icdf(counter_uniform(9, 1, 0, i), a, b);
      sum += y;
      sumsq += y * y;
    }
    const Real mean = sum / n;
    const Real sd = std::sqrt((sumsq / n - mean * mean) / n);
    CHECK(std::abs(mean - kuma_mean(a, b)) <= 3.0 * sd);
  }
}

TEST_CASE("hardkuma_sample_grad: clamped samples have zero gradient") {
  const KumaSupport s{-0.1, 1.1};
  const auto low = hardkuma_sample_grad(0.01, 1.0, 1.0, s);   // t = -0.088
  const auto high = hardkuma_sample_grad(0.99, 1.0, 1.0, s);  // t =  1.088
  CHECK(low.d_alpha == 0.0);
  CHECK(low.d_beta == 0.0);
  CHECK(high.d_alpha == 0.0);
  CHECK(high.d_beta == 0.0);
}

TEST_CASE("hardkuma_sample_grad matches finite differences on a dense sweep") {
  const KumaSupport s{-0.1, 1.1};
  const Real h = 1e-6;
  int interior_points = 0;
  for (Real u : {0.15, 0.3, 0.45, 0.6, 0.75, 0.9})
    for (Real a : {0.5, 0.9, 1.5, 3.0})
      for (Real b : {0.4, 1.0, 2.5}) {
        const Real z = hardkuma_sample(u, a, b, s);
        if (z == 0.0 || z == 1.0) continue;
        // stay away from the clamp so the difference quotient is smooth
        if (hardkuma_sample(u, a - 2 * h, b - 2 * h, s) == 0.0) continue;
        if (hardkuma_sample(u, a + 2 * h, b + 2 * h, s) == 1.0) continue;
        ++interior_points;
        const auto g = hardkuma_sample_grad(u, a, b, s);
        const Real fd_a = testutil::central_diff(
            [=](Real t) { return hardkuma_sample(u, t, b, s); }, a, h);
        const Real fd_b = testutil::central_diff(
            [=](Real t) { return hardkuma_sample(u, a, t, s); }, b, h);
        REQUIRE(close_rel(g.d_alpha, fd_a, 1e-4, 1e-9));
        REQUIRE(close_rel(g.d_beta, fd_b, 1e-4, 1e-9));
      }
  CHECK(interior_points > 30);
}

TEST_CASE("kuma_cdf_grad matches finite differences") {
  for (Real y : {1.0 / 12.0, 0.4, 11.0 / 12.0})
    for (auto [a, b] : {std::pair{0.5, 0.5}, std::pair{1.0, 1.0}, std::pair{2.2, 0.7}}) {
      const auto g = kuma_cdf_grad(y, a, b);
      const Real fd_a = testutil::central_diff(
          [=](Real t) { return kuma_cdf(y, t, b); }, a, 1e-6);
      const Real fd_b = testutil::central_diff(
          [=](Real t) { return kuma_cdf(y, a, t); }, b, 1e-6);
      CHECK(close_rel(g.d_alpha, fd_a, 1e-5, 1e-10));
      CHECK(close_rel(g.d_beta, fd_b, 1e-5, 1e-10));
    }
}

TEST_CASE("shape clamp floors and caps") {
  CHECK(clamp_shape(0.0) == kShapeFloor);
  CHECK(clamp_shape(1e9) == kShapeCap);
  CHECK(clamp_shape(0.37) == 0.37);
}
