#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

/// Special functions used throughout the library: the Gamma function, the
/// power kernel omega_beta(t) = t^{beta-1} / Gamma(beta), the Caputo
/// derivative of power-type profiles, and the one-parameter Mittag-Leffler
/// function E_alpha(z).
///
/// All routines work in double precision.  Gamma is evaluated with a
/// Lanczos-class approximation (g = 7, 9 coefficients) that delivers at
/// least 13 significant digits over the range exercised here; negative
/// non-integer arguments go through the reflection formula.
namespace subdiff {

namespace detail {

/// Lanczos coefficients for g = 7 (standard 9-term set).
inline constexpr double lanczos_g = 7.0;
inline constexpr double lanczos_coeff[9] = {
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
};

inline constexpr double sqrt_two_pi = 2.5066282746310005024;

/// Lanczos series A_g(x) for x >= 0.5 (argument already shifted by -1).
inline double lanczos_sum(double x) {
  double acc = lanczos_coeff[0];
  for (int i = 1; i < 9; ++i) acc += lanczos_coeff[i] / (x + i);
  return acc;
}

inline bool is_nonpositive_integer(double x) {
  return x <= 0.0 && x == std::floor(x);
}

}  // namespace detail

/// Gamma(x) for real x away from the poles at 0, -1, -2, ...
///
/// Throws std::domain_error at a pole.
inline double gamma_fn(double x) {
  if (std::isnan(x)) throw std::domain_error("gamma_fn: NaN argument");
  if (detail::is_nonpositive_integer(x))
    throw std::domain_error("gamma_fn: pole at x = " + std::to_string(x));
  if (x < 0.5) {
    // Reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x).
    return M_PI / (std::sin(M_PI * x) * gamma_fn(1.0 - x));
  }
  const double z = x - 1.0;
  const double t = z + detail::lanczos_g + 0.5;
  return detail::sqrt_two_pi * std::pow(t, z + 0.5) * std::exp(-t) *
         detail::lanczos_sum(z);
}

/// log Gamma(x) for x > 0, evaluated without overflow for large x.
inline double log_gamma(double x) {
  if (!(x > 0.0)) throw std::domain_error("log_gamma: requires x > 0");
  if (x < 0.5) {
    // log Gamma(x) = log(pi / sin(pi x)) - log Gamma(1 - x); sin(pi x) > 0 here.
    return std::log(M_PI / std::sin(M_PI * x)) - log_gamma(1.0 - x);
  }
  const double z = x - 1.0;
  const double t = z + detail::lanczos_g + 0.5;
  return std::log(detail::sqrt_two_pi) + (z + 0.5) * std::log(t) - t +
         std::log(detail::lanczos_sum(z));
}

/// Power kernel omega_beta(t) = t^{beta-1} / Gamma(beta).
///
/// Domain: t > 0, or t = 0 with beta > 1 (the kernel vanishes there).
/// beta must avoid the Gamma poles 0, -1, -2, ...
inline double omega(double beta, double t) {
  if (detail::is_nonpositive_integer(beta))
    throw std::domain_error("omega: beta at a Gamma pole");
  if (t < 0.0) throw std::domain_error("omega: negative t");
  if (beta == 1.0) return 1.0;  // omega_1 is identically 1, even at t = 0
  if (t == 0.0) {
    if (beta > 1.0) return 0.0;
    throw std::domain_error("omega: t = 0 requires beta > 1");
  }
  return std::pow(t, beta - 1.0) / gamma_fn(beta);
}

/// Caputo derivative of order alpha of v(t) = omega_{1+sigma}(t), which is
/// omega_{1+sigma-alpha}(t).  Constants have zero Caputo derivative, so this
/// also covers v(t) = c + omega_{1+sigma}(t).
///
/// Preconditions: alpha in (0,1), sigma > 0, and (t, 1+sigma-alpha) in the
/// domain of omega.
inline double caputo_of_power(double alpha, double sigma, double t) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("caputo_of_power: alpha must lie in (0,1)");
  if (!(sigma > 0.0))
    throw std::invalid_argument("caputo_of_power: sigma must be positive");
  return omega(1.0 + sigma - alpha, t);
}

/// Result of a Mittag-Leffler evaluation.  When the true value overflows
/// double precision, `saturated` is set, `value` holds HUGE_VAL, and
/// `log_value` carries the natural log of the leading asymptotic term
/// (1/alpha) exp(z^{1/alpha}).
struct MittagLefflerResult {
  double value = 0.0;
  bool saturated = false;
  double log_value = 0.0;
};

/// One-parameter Mittag-Leffler function E_alpha(z) = sum_k z^k / Gamma(1+k alpha)
/// for alpha in (0, 1], summed directly with log-space terms.
///
/// The series is truncated when terms fall below 1e-17 relative to the running
/// sum; exceeding 10,000 terms raises std::runtime_error.  Accuracy degrades
/// for large negative z (alternating series); intended use is z >= -10.
inline MittagLefflerResult mittag_leffler(double alpha, double z) {
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw std::invalid_argument("mittag_leffler: alpha must lie in (0,1]");
  MittagLefflerResult r;
  if (z == 0.0) {
    r.value = 1.0;
    return r;
  }
  // Saturation: for z > 0, E_alpha(z) ~ (1/alpha) exp(z^{1/alpha}).
  if (z > 0.0) {
    const double u = std::log(z) / alpha;  // log of z^{1/alpha}
    if (u > std::log(705.0)) {
      r.saturated = true;
      r.value = HUGE_VAL;
      r.log_value = std::exp(u) - std::log(alpha);
      return r;
    }
  }
  const double log_abs_z = std::log(std::abs(z));
  double sum = 1.0;  // k = 0 term
  int below = 0;
  for (int k = 1; k <= 10000; ++k) {
    const double log_term = k * log_abs_z - log_gamma(1.0 + k * alpha);
    double term = std::exp(log_term);
    if (z < 0.0 && (k & 1)) term = -term;
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) {
      if (++below >= 2) {
        r.value = sum;
        return r;
      }
    } else {
      below = 0;
    }
  }
  throw std::runtime_error("mittag_leffler: series did not converge in 10000 terms");
}

}  // namespace subdiff
