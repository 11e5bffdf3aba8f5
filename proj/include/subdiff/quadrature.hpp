#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <stdexcept>

/// Thin adaptive-quadrature layer used for cross-checks and error-bound
/// integrals.  The workhorse is the (G7, K15) Gauss-Kronrod rule with
/// adaptive bisection; integrable endpoint singularities of power type are
/// removed by a polynomial substitution before the rule is applied, so the
/// transformed integrand has at least two continuous derivatives at the
/// former singularity.
///
/// The singular variants hand the integrand the *distance* from the singular
/// endpoint rather than the absolute coordinate.  The substitution computes
/// that distance exactly, whereas reconstructing the coordinate and
/// subtracting it from the endpoint would lose every significant digit close
/// to the singularity and defeat the substitution.
namespace subdiff {

inline constexpr double quad_default_rel_tol = 1e-12;

/// Integrate f over [a, b] adaptively.  `rel_tol` is the termination target
/// passed to the Gauss-Kronrod driver; `max_depth` bounds the bisection depth.
///
/// The interval is mapped onto [0, 1] before the driver sees it.  Boost's
/// adaptive loop tests the unscaled panel error (floor ~ 2 eps |panel|)
/// against the length-scaled estimate times rel_tol, so an interval shorter
/// than ~2 eps / rel_tol can never satisfy the test and every call expands
/// the complete bisection tree; unit normalization keeps the two sides of
/// that comparison commensurate.
template <typename F>
double integrate(F&& f, double a, double b,
                 double rel_tol = quad_default_rel_tol, int max_depth = 17) {
  if (!(b >= a)) throw std::invalid_argument("integrate: requires b >= a");
  if (a == b) return 0.0;
  const double len = b - a;
  auto g = [&](double x) { return f(a + len * x); };
  return len * boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
                   g, 0.0, 1.0, max_depth, rel_tol);
}

/// Int_a^b f(s - a) ds for an integrand with f(u) ~ C u^{-p} near u = 0,
/// p < 1.  The callable receives u = s - a.  Substitutes u = w^m with
/// m = ceil(3 / (1-p)), after which the transformed integrand behaves like
/// w^{m(1-p)-1} (at least quadratic) near w = 0.
template <typename F>
double integrate_singular_lower(F&& f, double a, double b, double p,
                                double rel_tol = quad_default_rel_tol) {
  if (!(p < 1.0))
    throw std::invalid_argument("integrate_singular_lower: p must be < 1");
  if (a == b) return 0.0;
  if (p <= 0.0) {
    // Bounded at u = 0: integrate directly in the distance coordinate.
    return integrate([&](double u) { return f(u); }, 0.0, b - a, rel_tol);
  }
  const int m = static_cast<int>(std::ceil(3.0 / (1.0 - p)));
  const double upper = std::pow(b - a, 1.0 / m);
  auto g = [&, m](double w) {
    const double wm1 = std::pow(w, m - 1);
    return f(wm1 * w) * m * wm1;
  };
  return integrate(g, 0.0, upper, rel_tol);
}

/// Int_a^b f(b - s) ds for an integrand with f(u) ~ C u^{-p} near u = 0,
/// p < 1 (singularity at the upper endpoint).  The callable receives
/// u = b - s.
template <typename F>
double integrate_singular_upper(F&& f, double a, double b, double p,
                                double rel_tol = quad_default_rel_tol) {
  if (!(p < 1.0))
    throw std::invalid_argument("integrate_singular_upper: p must be < 1");
  if (a == b) return 0.0;
  if (p <= 0.0) {
    // Bounded at u = 0: integrate directly in the distance coordinate.
    return integrate([&](double u) { return f(u); }, 0.0, b - a, rel_tol);
  }
  const int m = static_cast<int>(std::ceil(3.0 / (1.0 - p)));
  const double upper = std::pow(b - a, 1.0 / m);
  auto g = [&, m](double w) {
    const double wm1 = std::pow(w, m - 1);
    return f(wm1 * w) * m * wm1;
  };
  return integrate(g, 0.0, upper, rel_tol);
}

/// Int_a^b f(s - a, b - s) ds with power singularities at both endpoints
/// (exponents p_lo at a, p_hi at b); splits at the midpoint.  On each half
/// the distance to the nearer (singular) endpoint is exact; the distance to
/// the far endpoint is conventional arithmetic, which is harmless since the
/// integrand is smooth there.
template <typename F>
double integrate_singular_both(F&& f, double a, double b, double p_lo,
                               double p_hi,
                               double rel_tol = quad_default_rel_tol) {
  const double mid = 0.5 * (a + b);
  return integrate_singular_lower(
             [&](double u) { return f(u, (b - a) - u); }, a, mid, p_lo,
             rel_tol) +
         integrate_singular_upper(
             [&](double u) { return f((b - a) - u, u); }, mid, b, p_hi,
             rel_tol);
}

}  // namespace subdiff
