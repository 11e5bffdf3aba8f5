#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "subdiff/quadrature.hpp"
#include "subdiff/special_functions.hpp"
#include "subdiff/time_mesh.hpp"

/// Discrete Caputo kernels for the shifted two-level (offset theta) scheme on
/// an arbitrary nonuniform mesh.
///
/// Per time level n the scheme integrates the weight
///   w_n(t)  = -omega_{2-alpha}(t_{n-theta} - t),
///   w_n'(t) =  omega_{1-alpha}(t_{n-theta} - t),
///   w_n''(t) = -omega_{-alpha}(t_{n-theta} - t) > 0,
/// against piecewise interpolants of the unknown: linear on the current cell,
/// quadratic on history cells.  That yields per-cell coefficients a (linear
/// part) and b (quadratic correction), which assemble into the convolution
/// kernels A applied to backward differences.
///
/// Closed forms are the primary evaluation route.  The raw differences of
/// omega terms cancel badly when a step is small relative to its distance
/// from the offset point, so all difference-type quantities are computed from
/// compensated factors in h = tau_k / (t_{n-theta} - t_k): expm1/log1p for
/// first differences, and explicit power series (converging geometrically for
/// h < 1) for the b coefficient and the bridge integrals I, J.  Adaptive
/// Gauss-Kronrod quadrature of the defining integrals is available as an
/// independent cross-check route.
namespace subdiff {

/// Evaluation route for kernel quantities.
enum class KernelEval { closed_form, quadrature };

namespace detail {

/// g(h) such that  b = [2 / (tau_k + tau_{k+1})] * x^{1-alpha} g(h) / Gamma(2-alpha)
/// with x = t_{n-theta} - t_k,  h = tau_k / x,  p = 2 - alpha:
///   g(h) = [(1+h)^p - 1] / (p h) - [(1+h)^{p-1} + 1] / 2.
/// The direct form cancels to O(h^2); the series
///   g(h) = sum_{j>=2} -(j-1)/2 * T_j,  T_j = prod_{i<=j}(p-i) h^j / (j+1)!
/// starts at alpha(1-alpha) h^2 / 12 and converges geometrically for h < 1.
inline double b_shape_factor(double alpha, double h) {
  const double p = 2.0 - alpha;
  if (h > 0.9) {
    return std::expm1(p * std::log1p(h)) / (p * h) -
           (std::pow(1.0 + h, p - 1.0) + 1.0) * 0.5;
  }
  double T = 1.0;  // T_0
  double sum = 0.0;
  for (int j = 1; j <= 400; ++j) {
    T *= (p - j) * h / (j + 1);
    const double term = -0.5 * (j - 1) * T;
    sum += term;
    if (j >= 3 && std::abs(term) < 1e-18 * std::abs(sum)) break;
  }
  return sum;
}

/// Shape factors for the bridge integrals over a history cell:
///   I = omega_{1-alpha}(x) f_I(h),  J = omega_{1-alpha}(x) f_J(h),
/// with q = 1 - alpha and
///   f_I(h) = [(1+h)^q - 1]/(q h) - (1+h)^{-alpha},
///   f_J(h) = 1 - [(1+h)^q - 1]/(q h).
/// Series: with U_j = prod_{i<=j}(q-i) h^j / (j+1)!,
///   f_I = sum_{j>=1} -j U_j,   f_J = sum_{j>=1} -U_j,
/// both starting at alpha h / 2.
inline double bridge_shape_I(double alpha, double h) {
  const double q = 1.0 - alpha;
  if (h > 0.9) {
    return std::expm1(q * std::log1p(h)) / (q * h) -
           std::pow(1.0 + h, -alpha);
  }
  double U = 1.0;
  double sum = 0.0;
  for (int j = 1; j <= 400; ++j) {
    U *= (q - j) * h / (j + 1);
    const double term = -j * U;
    sum += term;
    if (j >= 3 && std::abs(term) < 1e-18 * std::abs(sum)) break;
  }
  return sum;
}

inline double bridge_shape_J(double alpha, double h) {
  const double q = 1.0 - alpha;
  if (h > 0.9) return 1.0 - std::expm1(q * std::log1p(h)) / (q * h);
  double U = 1.0;
  double sum = 0.0;
  for (int j = 1; j <= 400; ++j) {
    U *= (q - j) * h / (j + 1);
    sum -= U;
    if (j >= 3 && std::abs(U) < 1e-18 * std::abs(sum)) break;
  }
  return sum;
}

inline void require_alpha(double alpha, const char* where) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument(std::string(where) +
                                ": alpha must lie in (0,1)");
}

inline void require_level(const TimeMesh& mesh, int n, const char* where) {
  if (n < 1 || n > mesh.levels())
    throw std::out_of_range(std::string(where) + ": level n out of range");
}

}  // namespace detail

/// First derivative of the integration weight, w_n'(t) = omega_{1-alpha}(t_{n-theta} - t),
/// defined for t < t_{n-theta}.
inline double offset_weight_d1(const TimeMesh& mesh, double alpha, int n,
                               double t) {
  detail::require_alpha(alpha, "offset_weight_d1");
  detail::require_level(mesh, n, "offset_weight_d1");
  return omega(1.0 - alpha, mesh.offset_node(n) - t);
}

/// Second derivative of the integration weight,
/// w_n''(t) = -omega_{-alpha}(t_{n-theta} - t) = alpha (t_{n-theta}-t)^{-alpha-1} / Gamma(1-alpha) > 0.
inline double offset_weight_d2(const TimeMesh& mesh, double alpha, int n,
                               double t) {
  detail::require_alpha(alpha, "offset_weight_d2");
  detail::require_level(mesh, n, "offset_weight_d2");
  const double u = mesh.offset_node(n) - t;
  return alpha * std::pow(u, -alpha - 1.0) / gamma_fn(1.0 - alpha);
}

/// Linear-part coefficient a^{(n)}_{n-k} for cell k of level n:
///  - k = n:  omega_{2-alpha}((1-theta) tau_n) / tau_n,
///  - k < n:  [omega_{2-alpha}(t_{n-theta}-t_{k-1}) - omega_{2-alpha}(t_{n-theta}-t_k)] / tau_k,
/// the latter evaluated as omega_{2-alpha}(x) expm1((1-alpha) log1p(h)) / tau_k.
inline double a_coeff(const TimeMesh& mesh, double alpha, int n, int k) {
  detail::require_alpha(alpha, "a_coeff");
  detail::require_level(mesh, n, "a_coeff");
  if (k < 1 || k > n) throw std::out_of_range("a_coeff: cell k out of range");
  const double tau_k = mesh.tau(k);
  if (k == n)
    return omega(2.0 - alpha, (1.0 - mesh.theta()) * tau_k) / tau_k;
  const double x = mesh.offset_node(n) - mesh.node(k);
  const double h = tau_k / x;
  return omega(2.0 - alpha, x) *
         std::expm1((1.0 - alpha) * std::log1p(h)) / tau_k;
}

/// Quadratic-correction coefficient b^{(n)}_{n-k} for a history cell k < n:
/// the moment of w_n' against the centered linear weight on the cell,
///   b = [2/(tau_k (tau_k + tau_{k+1}))] Int_{t_{k-1}}^{t_k} (s - t_{k-1/2}) w_n'(s) ds,
/// evaluated via the compensated shape factor g(h).
inline double b_coeff(const TimeMesh& mesh, double alpha, int n, int k) {
  detail::require_alpha(alpha, "b_coeff");
  detail::require_level(mesh, n, "b_coeff");
  if (k < 1 || k > n - 1)
    throw std::out_of_range("b_coeff: cell k must satisfy 1 <= k <= n-1");
  const double x = mesh.offset_node(n) - mesh.node(k);
  const double h = mesh.tau(k) / x;
  return 2.0 / (mesh.tau(k) + mesh.tau(k + 1)) *
         std::pow(x, 1.0 - alpha) * detail::b_shape_factor(alpha, h) /
         gamma_fn(2.0 - alpha);
}

/// Cell average of omega_{1-alpha}(t_n - .) over cell k:
///   (1/tau_k) Int_{t_{k-1}}^{t_k} omega_{1-alpha}(t_n - s) ds.
/// Appears as the comparison weight in the kernel bound audits.
inline double cell_average_weight(const TimeMesh& mesh, double alpha, int n,
                                  int k) {
  detail::require_alpha(alpha, "cell_average_weight");
  detail::require_level(mesh, n, "cell_average_weight");
  if (k < 1 || k > n)
    throw std::out_of_range("cell_average_weight: cell k out of range");
  const double tau_k = mesh.tau(k);
  if (k == n) return omega(2.0 - alpha, tau_k) / tau_k;
  const double x = mesh.node(n) - mesh.node(k);
  const double h = tau_k / x;
  return omega(2.0 - alpha, x) *
         std::expm1((1.0 - alpha) * std::log1p(h)) / tau_k;
}

/// Adaptive-quadrature route for a^{(n)}_{n-k}: integrates w_n' directly
/// (with a substitution removing the endpoint singularity on the local cell).
inline double a_coeff_quadrature(const TimeMesh& mesh, double alpha, int n,
                                 int k, double rel_tol = quad_default_rel_tol) {
  detail::require_alpha(alpha, "a_coeff_quadrature");
  detail::require_level(mesh, n, "a_coeff_quadrature");
  if (k < 1 || k > n)
    throw std::out_of_range("a_coeff_quadrature: cell k out of range");
  const double delta = mesh.offset_node(n);
  const double inv_gamma = 1.0 / gamma_fn(1.0 - alpha);
  const double tau_k = mesh.tau(k);
  if (k == n) {
    // w_n' blows up at delta; integrate in terms of the distance u = delta-s.
    auto w1 = [&](double u) { return std::pow(u, -alpha) * inv_gamma; };
    return integrate_singular_upper(w1, mesh.node(n - 1), delta, alpha,
                                    rel_tol) /
           tau_k;
  }
  auto w1 = [&](double s) { return std::pow(delta - s, -alpha) * inv_gamma; };
  return integrate(w1, mesh.node(k - 1), mesh.node(k), rel_tol) / tau_k;
}

/// Adaptive-quadrature route for b^{(n)}_{n-k} from its defining moment
/// integral.  The centered weight integrates to zero, so the constant part of
/// w_n' is subtracted before quadrature -- the integral is unchanged, but the
/// integrand then carries the variation of w_n' across the cell explicitly
/// (via expm1/log1p) instead of leaving it to cancellation between the two
/// half-cells, which would cap the attainable relative accuracy near machine
/// epsilon divided by tau_k / (t_{n-theta} - t_{k-1/2}).
inline double b_coeff_quadrature(const TimeMesh& mesh, double alpha, int n,
                                 int k, double rel_tol = quad_default_rel_tol) {
  detail::require_alpha(alpha, "b_coeff_quadrature");
  detail::require_level(mesh, n, "b_coeff_quadrature");
  if (k < 1 || k > n - 1)
    throw std::out_of_range("b_coeff_quadrature: cell k out of range");
  const double delta = mesh.offset_node(n);
  const double mid = mesh.node(k - 1) + 0.5 * mesh.tau(k);
  const double w_mid = std::pow(delta - mid, -alpha) / gamma_fn(1.0 - alpha);
  auto f = [&](double s) {
    return (s - mid) * w_mid *
           std::expm1(-alpha * std::log1p((mid - s) / (delta - mid)));
  };
  return 2.0 / (mesh.tau(k) * (mesh.tau(k) + mesh.tau(k + 1))) *
         integrate(f, mesh.node(k - 1), mesh.node(k), rel_tol);
}

/// Bridge integrals over history cells of level n (defined for n >= 2):
///   I_{n-k} = Int (t_k - s)/tau_k   w_n''(s) ds,
///   J_{n-k} = Int (s - t_{k-1})/tau_k w_n''(s) ds,   1 <= k <= n-1.
/// Entries are indexed by history distance i = n - k; index 0 is unused.
struct BridgeIntegrals {
  std::vector<double> I;  ///< I[i] = I^{(n)}_i, valid for 1 <= i <= n-1
  std::vector<double> J;  ///< J[i] = J^{(n)}_i, valid for 1 <= i <= n-1
};

inline BridgeIntegrals bridge_integrals(
    const TimeMesh& mesh, double alpha, int n,
    KernelEval eval = KernelEval::closed_form,
    double rel_tol = quad_default_rel_tol) {
  detail::require_alpha(alpha, "bridge_integrals");
  detail::require_level(mesh, n, "bridge_integrals");
  if (n < 2)
    throw std::invalid_argument("bridge_integrals: requires n >= 2");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  BridgeIntegrals out;
  out.I.assign(n, nan);
  out.J.assign(n, nan);
  const double delta = mesh.offset_node(n);
  for (int k = 1; k <= n - 1; ++k) {
    const int i = n - k;
    if (eval == KernelEval::closed_form) {
      const double x = delta - mesh.node(k);
      const double h = mesh.tau(k) / x;
      const double w = omega(1.0 - alpha, x);
      out.I[i] = w * detail::bridge_shape_I(alpha, h);
      out.J[i] = w * detail::bridge_shape_J(alpha, h);
    } else {
      const double inv_gamma = alpha / gamma_fn(1.0 - alpha);
      const double tk = mesh.node(k);
      const double tkm1 = mesh.node(k - 1);
      const double tau_k = mesh.tau(k);
      auto w2 = [&](double s) {
        return inv_gamma * std::pow(delta - s, -alpha - 1.0);
      };
      out.I[i] = integrate(
          [&](double s) { return (tk - s) / tau_k * w2(s); }, tkm1, tk,
          rel_tol);
      out.J[i] = integrate(
          [&](double s) { return (s - tkm1) / tau_k * w2(s); }, tkm1, tk,
          rel_tol);
    }
  }
  return out;
}

/// One level of the assembled scheme: coefficient families a, b and the
/// convolution kernels A, all indexed by history distance i = n - k.
struct KernelRow {
  std::vector<double> a;  ///< a[i] = a^{(n)}_i, 0 <= i <= n-1
  std::vector<double> b;  ///< b[i] = b^{(n)}_i, 1 <= i <= n-1 (b[0] unused)
  std::vector<double> A;  ///< A[i] = A^{(n)}_i, 0 <= i <= n-1
};

/// Build the coefficient row of level n.  Assembly:
///   n = 1:        A_0 = a_0;
///   n >= 2:       A_0     = a_0 + rho_{n-1} b_1,
///                 A_{n-k} = a_{n-k} + rho_{k-1} b_{n-k+1} - b_{n-k}   (2 <= k <= n-1),
///                 A_{n-1} = a_{n-1} - b_{n-1}.
inline KernelRow kernel_row(const TimeMesh& mesh, double alpha, int n,
                            KernelEval eval = KernelEval::closed_form,
                            double rel_tol = quad_default_rel_tol) {
  detail::require_alpha(alpha, "kernel_row");
  detail::require_level(mesh, n, "kernel_row");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  KernelRow row;
  row.a.resize(n);
  row.b.assign(n, nan);
  row.A.resize(n);
  const bool closed = (eval == KernelEval::closed_form);
  for (int k = 1; k <= n; ++k) {
    row.a[n - k] = closed ? a_coeff(mesh, alpha, n, k)
                          : a_coeff_quadrature(mesh, alpha, n, k, rel_tol);
  }
  for (int k = 1; k <= n - 1; ++k) {
    row.b[n - k] = closed ? b_coeff(mesh, alpha, n, k)
                          : b_coeff_quadrature(mesh, alpha, n, k, rel_tol);
  }
  if (n == 1) {
    row.A[0] = row.a[0];
    return row;
  }
  row.A[0] = row.a[0] + mesh.rho(n - 1) * row.b[1];
  for (int k = 2; k <= n - 1; ++k) {
    const int i = n - k;
    row.A[i] = row.a[i] + mesh.rho(k - 1) * row.b[i + 1] - row.b[i];
  }
  row.A[n - 1] = row.a[n - 1] - row.b[n - 1];
  return row;
}

/// All kernel rows 1..N for a mesh/order pair.  Rows are stored densely
/// (row n holds n contiguous entries); memory is O(N^2) doubles.
class KernelTable {
 public:
  KernelTable(TimeMesh mesh, double alpha,
              KernelEval eval = KernelEval::closed_form,
              double rel_tol = quad_default_rel_tol)
      : mesh_(std::move(mesh)), alpha_(alpha), eval_(eval) {
    detail::require_alpha(alpha_, "KernelTable");
    rows_.reserve(mesh_.levels());
    for (int n = 1; n <= mesh_.levels(); ++n)
      rows_.push_back(kernel_row(mesh_, alpha_, n, eval_, rel_tol));
  }

  const TimeMesh& mesh() const { return mesh_; }
  double alpha() const { return alpha_; }
  KernelEval eval() const { return eval_; }
  int levels() const { return static_cast<int>(rows_.size()); }

  /// Row of level n, 1 <= n <= N.
  const KernelRow& row(int n) const {
    if (n < 1 || n > levels()) throw std::out_of_range("KernelTable::row");
    return rows_[n - 1];
  }

 private:
  TimeMesh mesh_;
  double alpha_;
  KernelEval eval_;
  std::vector<KernelRow> rows_;
};

/// Apply the discrete Caputo operator to nodal values v_0..v_N:
///   (Dv)^{n-theta} = sum_{k=1}^n A^{(n)}_{n-k} (v_k - v_{k-1}),  n = 1..N.
inline std::vector<double> apply_discrete_caputo(const KernelTable& table,
                                                 std::span<const double> v) {
  const int N = table.levels();
  if (static_cast<int>(v.size()) != N + 1)
    throw std::invalid_argument(
        "apply_discrete_caputo: need N+1 nodal values");
  std::vector<double> out(N);
  for (int n = 1; n <= N; ++n) {
    const auto& A = table.row(n).A;
    double acc = 0.0;
    for (int k = 1; k <= n; ++k) acc += A[n - k] * (v[k] - v[k - 1]);
    out[n - 1] = acc;
  }
  return out;
}

/// Algebraically equivalent form grouping by values instead of differences:
///   (Dv)^{n-theta} = A_0 v_n - sum_{k=1}^{n-1} (A_{n-k-1} - A_{n-k}) v_k - A_{n-1} v_0.
inline std::vector<double> apply_discrete_caputo_rearranged(
    const KernelTable& table, std::span<const double> v) {
  const int N = table.levels();
  if (static_cast<int>(v.size()) != N + 1)
    throw std::invalid_argument(
        "apply_discrete_caputo_rearranged: need N+1 nodal values");
  std::vector<double> out(N);
  for (int n = 1; n <= N; ++n) {
    const auto& A = table.row(n).A;
    double acc = A[0] * v[n] - A[n - 1] * v[0];
    for (int k = 1; k <= n - 1; ++k)
      acc -= (A[n - k - 1] - A[n - k]) * v[k];
    out[n - 1] = acc;
  }
  return out;
}

}  // namespace subdiff
