#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "subdiff/caputo_kernels.hpp"
#include "subdiff/special_functions.hpp"

/// Complementary discrete kernels P^{(n)}_{n-j}: the discrete analogue of the
/// Riemann-Liouville resolvent of the Caputo kernels.  They are defined by
/// P^{(n)}_0 = 1 / A^{(n)}_0 together with
///   P^{(n)}_{n-j} = (1/A^{(j)}_0) sum_{k=j+1}^n (A^{(k)}_{k-j-1} - A^{(k)}_{k-j}) P^{(n)}_{n-k},
/// which makes them the unique solution of the triangular identity
///   sum_{j=k}^n P^{(n)}_{n-j} A^{(j)}_{j-k} = 1   for all 1 <= k <= n.
/// Nonnegativity of every P entry requires each kernel row to be
/// nonincreasing in the history index, which holds on meshes with matched
/// offset (theta = alpha/2) and step ratios at most 7/4.
namespace subdiff {

namespace detail {

inline void require_monotone_row(const KernelRow& row, int n) {
  for (std::size_t i = 1; i < row.A.size(); ++i) {
    if (row.A[i - 1] < row.A[i])
      throw std::runtime_error(
          "complementary kernels: kernel row " + std::to_string(n) +
          " is not nonincreasing (mesh outside the ratio/offset hypotheses)");
  }
  if (row.A.back() <= 0.0)
    throw std::runtime_error(
        "complementary kernels: kernel row " + std::to_string(n) +
        " has a nonpositive tail entry");
}

}  // namespace detail

/// Complementary kernels for a single level n: entry [i] holds P^{(n)}_i for
/// 0 <= i <= n-1.  Cost O(n^2); validates monotonicity of rows 1..n first.
inline std::vector<double> complementary_row(const KernelTable& table, int n) {
  if (n < 1 || n > table.levels())
    throw std::out_of_range("complementary_row: level n out of range");
  for (int k = 1; k <= n; ++k)
    detail::require_monotone_row(table.row(k), k);
  std::vector<double> P(n);
  P[0] = 1.0 / table.row(n).A[0];
  for (int j = n - 1; j >= 1; --j) {
    double acc = 0.0;
    for (int k = j + 1; k <= n; ++k) {
      const auto& Ak = table.row(k).A;
      acc += (Ak[k - j - 1] - Ak[k - j]) * P[n - k];
    }
    P[n - j] = acc / table.row(j).A[0];
  }
  return P;
}

/// Complementary kernels for every level 1..N.
struct ComplementaryTable {
  std::vector<std::vector<double>> rows;  ///< rows[n-1][i] = P^{(n)}_i

  const std::vector<double>& row(int n) const {
    if (n < 1 || n > static_cast<int>(rows.size()))
      throw std::out_of_range("ComplementaryTable::row");
    return rows[n - 1];
  }
  int levels() const { return static_cast<int>(rows.size()); }
};

inline ComplementaryTable build_complementary(const KernelTable& table) {
  for (int k = 1; k <= table.levels(); ++k)
    detail::require_monotone_row(table.row(k), k);
  ComplementaryTable out;
  out.rows.reserve(table.levels());
  for (int n = 1; n <= table.levels(); ++n) {
    std::vector<double> P(n);
    P[0] = 1.0 / table.row(n).A[0];
    for (int j = n - 1; j >= 1; --j) {
      double acc = 0.0;
      for (int k = j + 1; k <= n; ++k) {
        const auto& Ak = table.row(k).A;
        acc += (Ak[k - j - 1] - Ak[k - j]) * P[n - k];
      }
      P[n - j] = acc / table.row(j).A[0];
    }
    out.rows.push_back(std::move(P));
  }
  return out;
}

/// Largest deviation of the defining identity
///   sum_{j=k}^n P^{(n)}_{n-j} A^{(j)}_{j-k} - 1
/// over all 1 <= k <= n for one level's complementary row.
inline double identity_residual(const KernelTable& table,
                                const std::vector<double>& P, int n) {
  if (static_cast<int>(P.size()) != n)
    throw std::invalid_argument("identity_residual: row size mismatch");
  double worst = 0.0;
  for (int k = 1; k <= n; ++k) {
    double acc = 0.0;
    for (int j = k; j <= n; ++j) acc += P[n - j] * table.row(j).A[j - k];
    worst = std::max(worst, std::abs(acc - 1.0));
  }
  return worst;
}

/// Worst identity residual over all levels of a full table.
inline double identity_residual(const KernelTable& table,
                                const ComplementaryTable& comp) {
  double worst = 0.0;
  for (int n = 1; n <= comp.levels(); ++n)
    worst = std::max(worst, identity_residual(table, comp.row(n), n));
  return worst;
}

/// Result of checking the weighted complementary-kernel bounds
///   sum_{j=1}^n P^{(n)}_{n-j} omega_{1+(m-1)alpha}(t_j)
///     <= pi_A omega_{1+m alpha}(t_n),   m in {0, 1},  pi_A = 11/4,
/// plus the first-column bound P^{(n)}_{n-1} <= 1/A^{(1)}_0 and entrywise
/// nonnegativity.
struct PBoundReport {
  bool pass = true;
  double worst_margin = HUGE_VAL;  ///< min over (n, m) of (rhs-lhs)/scale
  int worst_n = 0;
  int worst_m = 0;
  bool nonnegative = true;
  bool first_column_ok = true;
  double pi_A = 2.75;
};

inline PBoundReport verify_p_bound(const ComplementaryTable& comp,
                                   const TimeMesh& mesh, double alpha,
                                   double margin_tol = 1e-10) {
  detail::require_alpha(alpha, "verify_p_bound");
  PBoundReport rep;
  const double inv_a0_first =
      1.0 / (omega(2.0 - alpha, (1.0 - mesh.theta()) * mesh.tau(1)) /
             mesh.tau(1));
  for (int n = 1; n <= comp.levels(); ++n) {
    const auto& P = comp.row(n);
    for (double p : P)
      if (!(p >= 0.0)) rep.nonnegative = false;
    if (P[n - 1] > inv_a0_first * (1.0 + margin_tol))
      rep.first_column_ok = false;
    for (int m = 0; m <= 1; ++m) {
      double lhs = 0.0;
      for (int j = 1; j <= n; ++j)
        lhs += P[n - j] * omega(1.0 + (m - 1) * alpha, mesh.node(j));
      const double rhs = rep.pi_A * omega(1.0 + m * alpha, mesh.node(n));
      const double margin =
          (rhs - lhs) / std::max({std::abs(lhs), std::abs(rhs), 1e-300});
      if (margin < rep.worst_margin) {
        rep.worst_margin = margin;
        rep.worst_n = n;
        rep.worst_m = m;
      }
    }
  }
  rep.pass = rep.nonnegative && rep.first_column_ok &&
             rep.worst_margin >= -margin_tol;
  return rep;
}

}  // namespace subdiff
