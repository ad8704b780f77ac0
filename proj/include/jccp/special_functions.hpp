#pragma once

#include <cmath>
#include <concepts>
#include <limits>
#include <numbers>

#include "jccp/errors.hpp"

namespace jccp {

namespace detail {

// erf(x) for 0 <= x < 3 via the all-positive series
//   erf(x) = 2/sqrt(pi) exp(-x^2) sum_n (2x^2)^n x / (1*3*...*(2n+1)),
// which has no cancellation.
template <std::floating_point T>
T erf_series(T x) {
  const T two_x2 = 2 * x * x;
  T term = x;
  T sum = x;
  for (int n = 1; n < 200; ++n) {
    term *= two_x2 / static_cast<T>(2 * n + 1);
    sum += term;
    if (term < std::numeric_limits<T>::epsilon() * sum * T(0.25)) break;
  }
  return T(2) * std::numbers::inv_sqrtpi_v<T> * std::exp(-x * x) * sum;
}

// erfc(x) for x >= 3 via the Laplace continued fraction, modified Lentz.
template <std::floating_point T>
T erfc_continued_fraction(T x) {
  constexpr T tiny = std::numeric_limits<T>::min() * 16;
  T f = x;
  T c = f;
  T d = 0;
  for (int k = 1; k < 500; ++k) {
    const T a = static_cast<T>(k) / 2;
    d = x + a * d;
    c = x + a / c;
    if (std::abs(d) < tiny) d = tiny;
    if (std::abs(c) < tiny) c = tiny;
    d = 1 / d;
    const T delta = c * d;
    f *= delta;
    if (std::abs(delta - 1) < std::numeric_limits<T>::epsilon()) break;
  }
  return std::exp(-x * x) * std::numbers::inv_sqrtpi_v<T> / f;
}

inline constexpr double kSeriesCutoff = 3.0;

}  // namespace detail

/// Error function, absolute accuracy near machine epsilon on all finite x.
template <std::floating_point T>
T erf(T x) {
  if (std::isnan(x)) return x;
  const T ax = std::abs(x);
  T r;
  if (ax < T(detail::kSeriesCutoff)) {
    r = detail::erf_series(ax);
  } else {
    r = T(1) - detail::erfc_continued_fraction(ax);
  }
  return x < 0 ? -r : r;
}

/// Complementary error function 1 - erf(x), evaluated without cancellation
/// in the upper tail.
template <std::floating_point T>
T erfc(T x) {
  if (std::isnan(x)) return x;
  if (x >= T(detail::kSeriesCutoff)) return detail::erfc_continued_fraction(x);
  if (x > 0) return T(1) - detail::erf_series(x);
  if (x > -T(detail::kSeriesCutoff)) return T(1) + detail::erf_series(-x);
  return T(2) - detail::erfc_continued_fraction(-x);
}

/// Inverse error function on (-1, 1).
///
/// Single-precision rational initial guess (Giles) polished by Halley steps
/// on erf, switching to an erfc residual in the tails so that p close to +-1
/// keeps full relative accuracy in 1 - |p|.
template <std::floating_point T>
T erf_inv(T p) {
  if (!(p > -1 && p < 1)) {
    throw DomainError("erf_inv: argument must lie strictly inside (-1, 1)");
  }
  if (p == 0) return p;

  T w = -std::log((T(1) - p) * (T(1) + p));
  T y;
  if (w < T(5)) {
    w -= T(2.5);
    T q = T(2.81022636e-08);
    q = T(3.43273939e-07) + q * w;
    q = T(-3.5233877e-06) + q * w;
    q = T(-4.39150654e-06) + q * w;
    q = T(0.00021858087) + q * w;
    q = T(-0.00125372503) + q * w;
    q = T(-0.00417768164) + q * w;
    q = T(0.246640727) + q * w;
    q = T(1.50140941) + q * w;
    y = q * p;
  } else {
    w = std::sqrt(w) - T(3);
    T q = T(-0.000200214257);
    q = T(0.000100950558) + q * w;
    q = T(0.00134934322) + q * w;
    q = T(-0.00367342844) + q * w;
    q = T(0.00573950773) + q * w;
    q = T(-0.0076224613) + q * w;
    q = T(0.00943887047) + q * w;
    q = T(1.00167406) + q * w;
    q = T(2.83297682) + q * w;
    y = q * p;
  }

  // Work with |p| and restore the sign at the end; erf is odd.
  const bool negative = p < 0;
  const T ap = std::abs(p);
  y = std::abs(y);
  const T tail = T(1) - ap;  // exact for ap >= 0.5
  const T two_over_sqrtpi = T(2) * std::numbers::inv_sqrtpi_v<T>;
  for (int it = 0; it < 3; ++it) {
    // residual r = erf(y) - ap, computed from erfc when ap is in the tail
    const T r = ap > T(0.5) ? tail - erfc(y) : erf(y) - ap;
    const T slope = two_over_sqrtpi * std::exp(-y * y);
    const T u = r / slope;
    y -= u / (T(1) + y * u);
  }
  return negative ? -y : y;
}

/// d/dp erf_inv(p) = sqrt(pi)/2 * exp(erf_inv(p)^2), given y = erf_inv(p).
template <std::floating_point T>
T erf_inv_derivative_at(T y) {
  return std::sqrt(std::numbers::pi_v<T>) / 2 * std::exp(y * y);
}

/// Standard normal CDF, F(z) = (1 + erf(z / sqrt 2)) / 2.
template <std::floating_point T>
T std_normal_cdf(T z) {
  const T a = z * std::numbers::sqrt2_v<T> / 2;
  if (z < 0) return erfc(-a) / 2;
  return (T(1) + erf(a)) / 2;
}

/// Standard normal quantile, sqrt(2) erf_inv(2q - 1).
template <std::floating_point T>
T std_normal_quantile(T q) {
  return std::numbers::sqrt2_v<T> * erf_inv(T(2) * q - T(1));
}

}  // namespace jccp
