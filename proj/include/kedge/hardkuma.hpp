#pragma once

// The Kumaraswamy ("Kuma") distribution family behind the edge gates:
//
//   Kuma(alpha, beta)            pdf f(y) = alpha*beta*y^(alpha-1)*(1-y^alpha)^(beta-1) on (0,1)
//   stretched Kuma               affine map of y onto (l, r) with l < 0 < 1 < r
//   rectified ("hard") Kuma      hard sigmoid of the stretched sample, z = min(1, max(0, t))
//
// Rectification piles the mass of (l,0] onto {0} and [1,r) onto {1}, so a
// gate can be exactly closed or exactly open while staying reparameterizable:
// z is a deterministic function of a uniform draw and (alpha, beta), and the
// derivative w.r.t. the shape parameters exists wherever the clamp is
// inactive. All functions are pure; the caller owns the RNG.

#include <kedge/common.hpp>

#include <cmath>

namespace kedge {

struct KumaSupport {
  Real l = -0.1;
  Real r = 1.1;
};

// Attention softmaxes can underflow to 0 for high-degree nodes; shape
// parameters are floored/capped to keep the inverse-CDF exponents finite.
inline constexpr Real kShapeFloor = 1e-4;
inline constexpr Real kShapeCap = 1e4;

inline Real clamp_shape(Real a) {
  if (a < kShapeFloor) return kShapeFloor;
  if (a > kShapeCap) return kShapeCap;
  return a;
}

namespace detail {

inline void check_shapes(Real alpha, Real beta) {
  if (!(alpha > 0.0) || !(beta > 0.0))
    throw DomainError("Kuma shape parameters must be positive");
}

inline void check_support(const KumaSupport& s) {
  if (!(s.l < 0.0) || !(s.r > 1.0))
    throw DomainError("hard-Kuma support must satisfy l < 0 < 1 < r");
}

// log(1 - exp(e)) for e <= 0 without losing either end.
inline Real log1mexp(Real e) {
  constexpr Real ln_half = -0.6931471805599453;
  return e > ln_half ? std::log(-std::expm1(e)) : std::log1p(-std::exp(e));
}

}  // namespace detail

// CDF: F(y) = 1 - (1 - y^alpha)^beta.
inline Real kuma_cdf(Real y, Real alpha, Real beta) {
  detail::check_shapes(alpha, beta);
  if (!(y >= 0.0 && y <= 1.0)) throw DomainError("kuma_cdf: y outside [0,1]");
  if (y == 0.0) return 0.0;
  if (y == 1.0) return 1.0;
  return -std::expm1(beta * detail::log1mexp(alpha * std::log(y)));
}

inline Real kuma_pdf(Real y, Real alpha, Real beta) {
  detail::check_shapes(alpha, beta);
  if (!(y > 0.0 && y < 1.0)) throw DomainError("kuma_pdf: y outside (0,1)");
  const Real log_y = std::log(y);
  return alpha * beta * std::exp((alpha - 1.0) * log_y +
                                 (beta - 1.0) * detail::log1mexp(alpha * log_y));
}

// Inverse CDF: y = (1 - (1-u)^(1/beta))^(1/alpha), in the expm1/log1p form
// that stays accurate near both endpoints.
inline Real kuma_icdf(Real u, Real alpha, Real beta) {
  detail::check_shapes(alpha, beta);
  if (!(u >= 0.0 && u <= 1.0)) throw DomainError("kuma_icdf: u outside [0,1]");
  if (u == 0.0) return 0.0;
  if (u == 1.0) return 1.0;
  const Real w = -std::expm1(std::log1p(-u) / beta);  // 1 - (1-u)^(1/beta)
  if (w <= 0.0) return 0.0;
  return std::exp(std::log(w) / alpha);
}

// First moment of the (unstretched) Kuma:
//   E[Y] = beta * B(1 + 1/alpha, beta) = Gamma(1+1/alpha) Gamma(1+beta) / Gamma(1+1/alpha+beta),
// evaluated through lgamma so large shapes do not overflow. Quadrature and
// Monte-Carlo cross-checks live in the test suite.
inline Real kuma_mean(Real alpha, Real beta) {
  detail::check_shapes(alpha, beta);
  const Real inv_a = 1.0 / alpha;
  return std::exp(std::lgamma(1.0 + inv_a) + std::lgamma(1.0 + beta) -
                  std::lgamma(1.0 + inv_a + beta));
}

// One rectified sample: z = min(1, max(0, l + (r-l) * icdf(u))).
// u must be strictly inside (0,1); the endpoints have infinite icdf slope.
inline Real hardkuma_sample(Real u, Real alpha, Real beta, const KumaSupport& s = {}) {
  detail::check_support(s);
  if (!(u > 0.0 && u < 1.0)) throw DomainError("hardkuma_sample: u must lie strictly in (0,1)");
  const Real t = s.l + (s.r - s.l) * kuma_icdf(u, alpha, beta);
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return t;
}

struct ShapeGrad {
  Real d_alpha = 0.0;
  Real d_beta = 0.0;
};

// d z / d(alpha, beta) at fixed u. Exactly zero whenever the hard sigmoid
// clamps (including the kinks themselves).
inline ShapeGrad hardkuma_sample_grad(Real u, Real alpha, Real beta, const KumaSupport& s = {}) {
  detail::check_support(s);
  if (!(u > 0.0 && u < 1.0)) throw DomainError("hardkuma_sample_grad: u must lie strictly in (0,1)");
  detail::check_shapes(alpha, beta);
  const Real log1mu = std::log1p(-u);
  const Real q = std::exp(log1mu / beta);  // (1-u)^(1/beta)
  const Real w = -std::expm1(log1mu / beta);
  if (w <= 0.0) return {};
  const Real log_w = std::log(w);
  const Real y = std::exp(log_w / alpha);
  const Real t = s.l + (s.r - s.l) * y;
  if (t <= 0.0 || t >= 1.0) return {};
  const Real dy_da = -y * log_w / (alpha * alpha);
  const Real dy_db = std::exp((1.0 / alpha - 1.0) * log_w) / alpha * q * log1mu / (beta * beta);
  return {(s.r - s.l) * dy_da, (s.r - s.l) * dy_db};
}

// Point masses of the rectified distribution. The cut points are where the
// stretched sample crosses 0 and 1.
inline Real hardkuma_prob_zero(Real alpha, Real beta, const KumaSupport& s = {}) {
  detail::check_support(s);
  return kuma_cdf(-s.l / (s.r - s.l), alpha, beta);
}

inline Real hardkuma_prob_one(Real alpha, Real beta, const KumaSupport& s = {}) {
  detail::check_support(s);
  return 1.0 - kuma_cdf((1.0 - s.l) / (s.r - s.l), alpha, beta);
}

// d/d(alpha,beta) of kuma_cdf at a fixed cut point y; this is what makes the
// expected-L0 penalty differentiable.
inline ShapeGrad kuma_cdf_grad(Real y, Real alpha, Real beta) {
  detail::check_shapes(alpha, beta);
  if (!(y > 0.0 && y < 1.0)) return {};
  const Real log_y = std::log(y);
  const Real ya = std::exp(alpha * log_y);
  const Real sfac = 1.0 - ya;
  if (sfac <= 0.0) return {};
  const Real log_s = std::log1p(-ya);
  return {beta * std::exp((beta - 1.0) * log_s) * ya * log_y,
          -std::exp(beta * log_s) * log_s};
}

}  // namespace kedge
