#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "subdiff/caputo_kernels.hpp"
#include "subdiff/complementary_kernels.hpp"
#include "subdiff/quadrature.hpp"
#include "subdiff/special_functions.hpp"

/// Consistency analysis of the discrete Caputo operator: truncation errors
/// against the exact fractional derivative of manufactured time profiles,
/// the error-control quantities G_loc / G_his, the per-level error-control
/// system (ECS) bound, its global accumulation under the complementary
/// kernels, and the offset interpolation error R^{n-theta}.
namespace subdiff {

/// Time profile with analytically known derivatives and Caputo derivative.
/// Two families:
///  - power profile  v(t) = 1 + omega_{1+sigma}(t),  sigma in (0,1) u (1,2),
///    whose Caputo derivative of order alpha is omega_{1+sigma-alpha}(t) and
///    whose third derivative blows up like t^{sigma-3} at the origin;
///  - cubic polynomial v(t) = c0 + c1 t + c2 t^2 + c3 t^3 (everything smooth).
class ManufacturedFunction {
 public:
  enum class Kind { power_profile, cubic };

  static ManufacturedFunction power_profile(double sigma) {
    if (!((sigma > 0.0 && sigma < 1.0) || (sigma > 1.0 && sigma < 2.0)))
      throw std::invalid_argument(
          "ManufacturedFunction: sigma must lie in (0,1) or (1,2)");
    ManufacturedFunction f;
    f.kind_ = Kind::power_profile;
    f.sigma_ = sigma;
    return f;
  }

  static ManufacturedFunction cubic(double c0, double c1, double c2,
                                    double c3) {
    ManufacturedFunction f;
    f.kind_ = Kind::cubic;
    f.c_[0] = c0;
    f.c_[1] = c1;
    f.c_[2] = c2;
    f.c_[3] = c3;
    return f;
  }

  Kind kind() const { return kind_; }

  /// Grading parameter of the power profile.
  double sigma() const {
    if (kind_ != Kind::power_profile)
      throw std::logic_error("ManufacturedFunction::sigma: not a power profile");
    return sigma_;
  }

  double value(double t) const {
    if (kind_ == Kind::power_profile) return 1.0 + omega(1.0 + sigma_, t);
    return c_[0] + t * (c_[1] + t * (c_[2] + t * c_[3]));
  }

  double d1(double t) const {
    if (kind_ == Kind::power_profile) return omega(sigma_, t);
    return c_[1] + t * (2.0 * c_[2] + t * 3.0 * c_[3]);
  }

  double d2(double t) const {
    if (kind_ == Kind::power_profile) return omega(sigma_ - 1.0, t);
    return 2.0 * c_[2] + 6.0 * c_[3] * t;
  }

  double d3(double t) const {
    if (kind_ == Kind::power_profile) return omega(sigma_ - 2.0, t);
    return 6.0 * c_[3];
  }

  /// Signed coefficient c with v'''(t) = c t^{sigma-3} for the power profile.
  double d3_coefficient() const {
    if (kind_ != Kind::power_profile)
      throw std::logic_error(
          "ManufacturedFunction::d3_coefficient: not a power profile");
    return 1.0 / gamma_fn(sigma_ - 2.0);
  }

  /// True when the third derivative is unbounded at t = 0.
  bool singular_third_derivative() const {
    return kind_ == Kind::power_profile;
  }

  /// Backward difference v(b) - v(a), 0 <= a <= b, in cancellation-free
  /// form: the constant part drops analytically and the power term goes
  /// through expm1/log1p, so a tiny increment keeps full relative accuracy
  /// instead of inheriting the absolute roundoff of two O(1) values (which
  /// the A_0 ~ tau^{-alpha} weight of a small cell would then amplify).
  double increment(double a, double b) const {
    if (kind_ == Kind::power_profile) {
      if (a <= 0.0) return omega(1.0 + sigma_, b);
      return omega(1.0 + sigma_, a) *
             std::expm1(sigma_ * std::log1p((b - a) / a));
    }
    return (b - a) *
           (c_[1] + c_[2] * (b + a) + c_[3] * (b * b + a * b + a * a));
  }

  /// Exact Caputo derivative of order alpha at time t.
  double caputo(double alpha, double t) const {
    detail::require_alpha(alpha, "ManufacturedFunction::caputo");
    if (kind_ == Kind::power_profile)
      return caputo_of_power(alpha, sigma_, t);
    double acc = 0.0;
    double factorial = 1.0;
    for (int j = 1; j <= 3; ++j) {
      factorial *= j;
      if (c_[j] != 0.0)
        acc += c_[j] * factorial * omega(j + 1.0 - alpha, t);
    }
    return acc;
  }

 private:
  ManufacturedFunction() = default;
  Kind kind_ = Kind::cubic;
  double sigma_ = 0.0;
  double c_[4] = {0.0, 0.0, 0.0, 0.0};
};

namespace detail {

/// Effective lower-endpoint singularity strength for first-cell integrands
/// of a power profile.  For sigma < 1 the integrands genuinely blow up like
/// t^{sigma-1}; for sigma in (1,2) they stay bounded but lose smoothness
/// (fractional powers of t), so a fixed mild strength still buys the
/// polynomial-smoothing change of variables.
inline double power_lower_strength(double sigma) {
  return sigma < 1.0 ? 1.0 - sigma : 0.4;
}

}  // namespace detail

/// Truncation errors of the discrete operator against the exact Caputo
/// derivative at the offset points:
///   Y^{n-theta} = (d^alpha v)(t_{n-theta}) - (D v)^{n-theta},  n = 1..N.
inline std::vector<double> truncation_error(const KernelTable& table,
                                            const ManufacturedFunction& v) {
  const int N = table.levels();
  const TimeMesh& mesh = table.mesh();
  // Exact per-cell increments rather than differences of nodal samples;
  // see ManufacturedFunction::increment for why this matters on tiny cells.
  std::vector<double> inc(N + 1, 0.0);
  for (int k = 1; k <= N; ++k)
    inc[k] = v.increment(mesh.node(k - 1), mesh.node(k));
  std::vector<double> out(N);
  for (int n = 1; n <= N; ++n) {
    const auto& A = table.row(n).A;
    double acc = 0.0;
    for (int k = 1; k <= n; ++k) acc += A[n - k] * inc[k];
    out[n - 1] = v.caputo(table.alpha(), mesh.offset_node(n)) - acc;
  }
  return out;
}

/// Local error-control quantity for cell k:
///   G_loc^k = (3/2) Int_{t_{k-1}}^{t_{k-1/2}} (s-t_{k-1})^2 |v'''|
///           + (3 tau_k/2) Int_{t_{k-1/2}}^{t_k} (t_k-s) |v'''|.
/// The singular first piece on cell 1 of a power profile is integrated in
/// closed form ((tau_1/2)^sigma / sigma times |c|); everything else uses
/// adaptive quadrature.
inline double g_loc(const TimeMesh& mesh, const ManufacturedFunction& v,
                    int k, double rel_tol = quad_default_rel_tol) {
  if (k < 1 || k > mesh.levels()) throw std::out_of_range("g_loc: cell k");
  const double lo = mesh.node(k - 1);
  const double hi = mesh.node(k);
  const double mid = lo + 0.5 * mesh.tau(k);
  double p1;
  if (k == 1 && v.singular_third_derivative()) {
    const double sigma = v.sigma();
    p1 = std::abs(v.d3_coefficient()) * std::pow(mid, sigma) / sigma;
  } else {
    p1 = integrate(
        [&](double s) {
          const double d = s - lo;
          return d * d * std::abs(v.d3(s));
        },
        lo, mid, rel_tol);
  }
  const double p2 = integrate(
      [&](double s) { return (hi - s) * std::abs(v.d3(s)); }, mid, hi,
      rel_tol);
  return 1.5 * p1 + 1.5 * mesh.tau(k) * p2;
}

/// History error-control quantity for cell k <= N-1:
///   G_his^k = (5/2) Int_{t_{k-1}}^{t_k} (s-t_{k-1})^2 |v'''|
///           + (5/2) Int_{t_k}^{t_{k+1}} (t_{k+1}-s)^2 |v'''|.
inline double g_his(const TimeMesh& mesh, const ManufacturedFunction& v,
                    int k, double rel_tol = quad_default_rel_tol) {
  if (k < 1 || k > mesh.levels() - 1)
    throw std::out_of_range("g_his: cell k must satisfy 1 <= k <= N-1");
  const double lo = mesh.node(k - 1);
  const double mid = mesh.node(k);
  const double hi = mesh.node(k + 1);
  double p1;
  if (k == 1 && v.singular_third_derivative()) {
    const double sigma = v.sigma();
    p1 = std::abs(v.d3_coefficient()) * std::pow(mid, sigma) / sigma;
  } else {
    p1 = integrate(
        [&](double s) {
          const double d = s - lo;
          return d * d * std::abs(v.d3(s));
        },
        lo, mid, rel_tol);
  }
  const double p2 = integrate(
      [&](double s) {
        const double d = hi - s;
        return d * d * std::abs(v.d3(s));
      },
      mid, hi, rel_tol);
  return 2.5 * (p1 + p2);
}

/// One level of the consistency report.  g_his is NaN at the final level
/// (it needs the next node).
struct ConsistencyRow {
  int n = 0;
  double t_offset = 0.0;
  double upsilon = 0.0;   ///< truncation error Y^{n-theta}
  double g_loc = 0.0;
  double g_his = 0.0;
  double ecs_rhs = 0.0;   ///< A_0 G_loc^n + sum_k (A_{n-k-1}-A_{n-k}) G_his^k
  double e_glob = 0.0;    ///< sum_j P^{(n)}_{n-j} |Y^{j-theta}|
  double r_offset = 0.0;  ///< offset interpolation error R^{n-theta}
  double ecs_margin = 0.0;
};

struct ConsistencyReport {
  std::vector<ConsistencyRow> rows;
  bool ecs_pass = true;          ///< |Y| <= ECS right-hand side at every level
  double ecs_worst_margin = HUGE_VAL;
  int ecs_worst_n = 0;
  bool global_pass = true;       ///< e_glob <= complementary-weighted majorant
  double global_worst_margin = HUGE_VAL;
  int global_worst_n = 0;
  bool remark_pass = true;       ///< e_glob <= pi_A Gamma(1-alpha) max t^alpha |Y|
  double remark_worst_margin = HUGE_VAL;
  int remark_worst_n = 0;
};

/// Offset interpolation error R^{n-theta} = v(t_{n-theta})
/// - [theta v(t_{n-1}) + (1-theta) v(t_n)], evaluated exactly.
inline std::vector<double> offset_interpolation_error(
    const TimeMesh& mesh, const ManufacturedFunction& v) {
  std::vector<double> out(mesh.levels());
  const double theta = mesh.theta();
  for (int n = 1; n <= mesh.levels(); ++n)
    out[n - 1] = v.value(mesh.offset_node(n)) -
                 (theta * v.value(mesh.node(n - 1)) +
                  (1.0 - theta) * v.value(mesh.node(n)));
  return out;
}

/// Same quantity through its integral representation
///   R^{n-theta} = -theta Int_{t_{n-1}}^{t_{n-theta}} (s-t_{n-1}) v'' ds
///                 -(1-theta) Int_{t_{n-theta}}^{t_n} (t_n-s) v'' ds,
/// used as an independent cross-check of the exact route.
inline std::vector<double> offset_interpolation_error_quadrature(
    const TimeMesh& mesh, const ManufacturedFunction& v,
    double rel_tol = quad_default_rel_tol) {
  std::vector<double> out(mesh.levels());
  const double theta = mesh.theta();
  for (int n = 1; n <= mesh.levels(); ++n) {
    const double lo = mesh.node(n - 1);
    const double hi = mesh.node(n);
    const double mid = mesh.offset_node(n);
    double p1;
    if (n == 1 && v.singular_third_derivative()) {
      // The first cell starts at t = 0, so the distance from the lower
      // endpoint is the coordinate itself; u v''(u) ~ u^{sigma-1} near 0.
      p1 = integrate_singular_lower([&](double u) { return u * v.d2(u); },
                                    lo, mid,
                                    detail::power_lower_strength(v.sigma()),
                                    rel_tol);
    } else {
      p1 = integrate([&](double s) { return (s - lo) * v.d2(s); }, lo, mid,
                     rel_tol);
    }
    const double p2 = integrate(
        [&](double s) { return (hi - s) * v.d2(s); }, mid, hi, rel_tol);
    out[n - 1] = -theta * p1 - (1.0 - theta) * p2;
  }
  return out;
}

/// Full consistency report for one manufactured profile: truncation errors,
/// error-control quantities, the per-level ECS inequality, its global
/// accumulation under the complementary kernels, and the offset error.
inline ConsistencyReport consistency_report(
    const KernelTable& table, const ComplementaryTable& comp,
    const ManufacturedFunction& v, double margin_tol = 1e-10,
    double rel_tol = quad_default_rel_tol) {
  const int N = table.levels();
  if (comp.levels() != N)
    throw std::invalid_argument("consistency_report: table size mismatch");
  const TimeMesh& mesh = table.mesh();
  const double alpha = table.alpha();

  const auto upsilon = truncation_error(table, v);
  const auto r_exact = offset_interpolation_error(mesh, v);
  std::vector<double> gl(N + 1), gh(N + 1, 0.0);
  for (int k = 1; k <= N; ++k) gl[k] = g_loc(mesh, v, k, rel_tol);
  for (int k = 1; k <= N - 1; ++k) gh[k] = g_his(mesh, v, k, rel_tol);

  ConsistencyReport rep;
  rep.rows.resize(N);
  auto margin_of = [](double lhs, double rhs) {
    return (lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), 1e-300});
  };
  for (int n = 1; n <= N; ++n) {
    auto& row = rep.rows[n - 1];
    row.n = n;
    row.t_offset = mesh.offset_node(n);
    row.upsilon = upsilon[n - 1];
    row.g_loc = gl[n];
    row.g_his =
        (n <= N - 1) ? gh[n] : std::numeric_limits<double>::quiet_NaN();
    row.r_offset = r_exact[n - 1];

    const auto& A = table.row(n).A;
    double rhs = A[0] * gl[n];
    for (int k = 1; k <= n - 1; ++k) {
      const int i = n - k;
      rhs += (A[i - 1] - A[i]) * gh[k];
    }
    row.ecs_rhs = rhs;
    row.ecs_margin = margin_of(rhs, std::abs(upsilon[n - 1]));
    if (row.ecs_margin < rep.ecs_worst_margin) {
      rep.ecs_worst_margin = row.ecs_margin;
      rep.ecs_worst_n = n;
    }
    if (row.ecs_margin < -margin_tol) rep.ecs_pass = false;

    const auto& P = comp.row(n);
    double acc = 0.0;
    double majorant = 0.0;
    double remark_max = 0.0;
    for (int j = 1; j <= n; ++j) {
      acc += P[n - j] * std::abs(upsilon[j - 1]);
      majorant += P[n - j] * table.row(j).A[0] *
                  (gl[j] + ((j <= n - 1) ? gh[j] : 0.0));
      remark_max = std::max(
          remark_max, std::pow(mesh.node(j), alpha) * std::abs(upsilon[j - 1]));
    }
    row.e_glob = acc;
    const double gm = margin_of(majorant, acc);
    if (gm < rep.global_worst_margin) {
      rep.global_worst_margin = gm;
      rep.global_worst_n = n;
    }
    if (gm < -margin_tol) rep.global_pass = false;
    const double remark_rhs = 2.75 * gamma_fn(1.0 - alpha) * remark_max;
    const double rm = margin_of(remark_rhs, acc);
    if (rm < rep.remark_worst_margin) {
      rep.remark_worst_margin = rm;
      rep.remark_worst_n = n;
    }
    if (rm < -margin_tol) rep.remark_pass = false;
  }
  return rep;
}

/// Per-cell decomposition of the truncation error at level n,
///   Y^{n-theta} = sum_{k=1}^n Y_k^{n-theta},
/// following the interpolation-error route: on history cells the quadratic
/// interpolation error is expanded through the third derivative,
///   Y_k = (b_{n-k}/2) Int (s-t_{k-1})^2 v''' ds
///       - (rho_k b_{n-k}/2) Int_{t_k}^{t_{k+1}} (t_{k+1}-s)^2 v''' ds
///       + Int v'''(s) K_k(s) ds,
/// where K_k(s) integrates the linear interpolation error of the weight w_n;
/// on the local cell  Y_n = Int_{t_{n-1}}^{t_{n-theta}} w_n'(s) (v' - grad v_n / tau_n) ds.
/// The nested term is rearranged as Int (Err w_n)(t) (v''(t_k) - v''(t)) dt
/// with a compensated evaluation of the interpolation error, so the route
/// stays accurate on strongly graded meshes.  Intended for N <= 64.
struct CellDecomposition {
  std::vector<double> cells;       ///< cells[k-1] = Y_k^{n-theta}, k = 1..n
  double total = 0.0;              ///< sum of the cells
  double local_bound_margin = 0.0; ///< (a_0 G_loc^n - |Y_n|) / scale
};

inline CellDecomposition truncation_cells(const KernelTable& table,
                                          const ManufacturedFunction& v,
                                          int n,
                                          double rel_tol = quad_default_rel_tol) {
  if (n < 1 || n > table.levels())
    throw std::out_of_range("truncation_cells: level n");
  if (table.levels() > 64)
    throw std::invalid_argument(
        "truncation_cells: per-cell route is restricted to N <= 64");
  const TimeMesh& mesh = table.mesh();
  const double alpha = table.alpha();
  const double delta = mesh.offset_node(n);
  CellDecomposition out;
  out.cells.resize(n);

  for (int k = 1; k <= n - 1; ++k) {
    const int i = n - k;
    const double b = table.row(n).b[i];
    const double lo = mesh.node(k - 1);
    const double hi = mesh.node(k);
    const double next = mesh.node(k + 1);
    double B1;
    if (k == 1 && v.singular_third_derivative()) {
      const double sigma = v.sigma();
      B1 = v.d3_coefficient() * std::pow(hi, sigma) / sigma;
    } else {
      B1 = integrate(
          [&](double s) {
            const double d = s - lo;
            return d * d * v.d3(s);
          },
          lo, hi, rel_tol);
    }
    const double B2 = integrate(
        [&](double s) {
          const double d = next - s;
          return d * d * v.d3(s);
        },
        hi, next, rel_tol);

    // Compensated linear-interpolation error of the weight w_n on cell k:
    //   (Err w_n)(t) = [w_n(t) - w_n(t_{k-1})] - a_{n-k} (t - t_{k-1}),
    // with the bracket evaluated through expm1/log1p against the cell edge.
    const double x_edge = delta - lo;
    const double w_edge = omega(2.0 - alpha, x_edge);
    const double slope = table.row(n).a[i];
    auto err_w = [&](double t) {
      const double u = t - lo;
      const double bracket =
          -w_edge * std::expm1((1.0 - alpha) * std::log1p(-u / x_edge));
      return bracket - slope * u;
    };
    const double d2_hi = v.d2(hi);
    auto t3_integrand = [&](double t) {
      return err_w(t) * (d2_hi - v.d2(t));
    };
    double T3;
    if (k == 1 && v.singular_third_derivative()) {
      // Err ~ t and v'' ~ t^{sigma-2} near 0.  Cell 1 starts at t = 0, so
      // the distance handed over by the singular rule is the coordinate.
      T3 = integrate_singular_lower(t3_integrand, lo, hi,
                                    detail::power_lower_strength(v.sigma()),
                                    rel_tol);
    } else {
      T3 = integrate(t3_integrand, lo, hi, rel_tol);
    }
    out.cells[k - 1] =
        0.5 * b * B1 - 0.5 * mesh.rho(k) * b * B2 + T3;
  }

  // Local cell: linear interpolation of v against the weight derivative.
  {
    const double lo = mesh.node(n - 1);
    const double grad =
        (v.value(mesh.node(n)) - v.value(lo)) / mesh.tau(n);
    const double inv_gamma = 1.0 / gamma_fn(1.0 - alpha);
    double local;
    if (n == 1 && v.singular_third_derivative()) {
      // v' is singular at t = 0 and w_n' at delta.  The cell starts at
      // t = 0, so the lower distance doubles as the coordinate.
      local = integrate_singular_both(
          [&](double u_lo, double u_hi) {
            return std::pow(u_hi, -alpha) * inv_gamma * (v.d1(u_lo) - grad);
          },
          lo, delta, detail::power_lower_strength(v.sigma()), alpha, rel_tol);
    } else {
      local = integrate_singular_upper(
          [&](double u) {
            return std::pow(u, -alpha) * inv_gamma * (v.d1(delta - u) - grad);
          },
          lo, delta, alpha, rel_tol);
    }
    out.cells[n - 1] = local;
    const double bound = table.row(n).a[0] * g_loc(mesh, v, n, rel_tol);
    out.local_bound_margin =
        (bound - std::abs(local)) /
        std::max({bound, std::abs(local), 1e-300});
  }
  for (double c : out.cells) out.total += c;
  return out;
}

}  // namespace subdiff
