#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "subdiff/caputo_kernels.hpp"
#include "subdiff/complementary_kernels.hpp"
#include "subdiff/time_mesh.hpp"

/// Numerical audits of the kernel inequalities that drive the stability and
/// consistency theory.  Every inequality is normalized as LHS >= RHS and
/// scored with
///     margin = (LHS - RHS) / max(|LHS|, |RHS|, 1e-300);
/// equalities are scored as margin = -|LHS - RHS| / scale.  A check passes
/// when its worst margin stays above -tolerance (1e-10 for inequalities,
/// 1e-12 for identities by default).  On meshes with matched offset
/// (theta = alpha/2) and step ratios at most 7/4 every audit is expected to
/// pass; outside those hypotheses failures are recorded, not asserted.
namespace subdiff {

/// Outcome of one audit over all applicable (n, k) pairs.
struct AuditCheck {
  std::string name;
  bool pass = true;
  bool equality = false;       ///< scored as a residual rather than a margin
  double worst_margin = HUGE_VAL;
  int worst_n = 0;
  int worst_k = 0;
  long samples = 0;            ///< number of (n,k) instances examined
  long violations = 0;         ///< instances below -tolerance
  std::string note;
};

struct AuditOptions {
  double ineq_tol = 1e-10;
  double eq_tol = 1e-12;
  int quadratic_trials = 100;
  std::uint64_t seed = 20240601;
};

namespace detail {

class MarginTracker {
 public:
  MarginTracker(std::string name, double tol, bool equality = false) {
    check_.name = std::move(name);
    check_.equality = equality;
    tol_ = tol;
  }

  /// Record the inequality lhs >= rhs observed at indices (n, k).
  void geq(double lhs, double rhs, int n, int k) {
    record((lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), 1e-300}), n,
           k);
  }

  /// Record the identity lhs == rhs observed at indices (n, k).
  void eq(double lhs, double rhs, int n, int k) {
    record(-std::abs(lhs - rhs) /
               std::max({std::abs(lhs), std::abs(rhs), 1e-300}),
           n, k);
  }

  /// Record an identity residual that is already scaled (margin = -|r|).
  void residual(double r, int n, int k) { record(-std::abs(r), n, k); }

  AuditCheck finish() {
    if (check_.samples == 0) check_.worst_margin = 0.0;
    check_.pass = (check_.violations == 0);
    return std::move(check_);
  }

 private:
  void record(double margin, int n, int k) {
    ++check_.samples;
    if (margin < -tol_) ++check_.violations;
    if (margin < check_.worst_margin) {
      check_.worst_margin = margin;
      check_.worst_n = n;
      check_.worst_k = k;
    }
  }

  AuditCheck check_;
  double tol_ = 0.0;
};

}  // namespace detail

/// Two-sided cell-average bounds on the assembled kernels:
///   A^{(n)}_0     <= (24/11) avg_n,
///   A^{(n)}_{n-k} >= (4/11)  avg_k   for 1 <= k <= n,
/// where avg_k is the average of omega_{1-alpha}(t_n - .) over cell k.
inline AuditCheck audit_kernel_cell_bounds(const KernelTable& table,
                                           double tol = 1e-10) {
  detail::MarginTracker t("kernel_cell_bounds", tol);
  for (int n = 1; n <= table.levels(); ++n) {
    const auto& A = table.row(n).A;
    for (int k = 1; k <= n; ++k) {
      const double avg =
          cell_average_weight(table.mesh(), table.alpha(), n, k);
      if (k == n) t.geq(24.0 / 11.0 * avg, A[0], n, k);
      t.geq(A[n - k], 4.0 / 11.0 * avg, n, k);
    }
  }
  return t.finish();
}

/// Quantified decay of consecutive kernels:
///   A^{(n)}_{n-k-1} - A^{(n)}_{n-k} >= (1 + rho_k) b^{(n)}_{n-k} + (1/5) I^{(n)}_{n-k}
/// for n >= 2 and 1 <= k <= n-1.
inline AuditCheck audit_kernel_monotone_decay(const KernelTable& table,
                                              double tol = 1e-10) {
  detail::MarginTracker t("kernel_monotone_decay", tol);
  for (int n = 2; n <= table.levels(); ++n) {
    const auto& row = table.row(n);
    const auto bridges =
        bridge_integrals(table.mesh(), table.alpha(), n);
    for (int k = 1; k <= n - 1; ++k) {
      const int i = n - k;
      const double lhs = row.A[i - 1] - row.A[i];
      const double rhs = (1.0 + table.mesh().rho(k)) * row.b[i] +
                         0.2 * bridges.I[i];
      t.geq(lhs, rhs, n, k);
    }
  }
  return t.finish();
}

/// Dominance of the leading kernel over the first history kernel,
///   ((1-2 theta)/(1-theta)) A^{(n)}_0 > A^{(n)}_1  for n >= 2,
/// together with the effective-offset property theta^{(n)} >= theta where
/// theta^{(n)} = (A_0 - A_1)/(2 A_0 - A_1) and theta^{(1)} = 1/2.
inline AuditCheck audit_offset_dominance(const KernelTable& table,
                                         double tol = 1e-10) {
  const double theta = table.mesh().theta();
  detail::MarginTracker t("offset_dominance", tol);
  t.geq(0.5, theta, 1, 0);
  for (int n = 2; n <= table.levels(); ++n) {
    const auto& A = table.row(n).A;
    t.geq((1.0 - 2.0 * theta) / (1.0 - theta) * A[0], A[1], n, 0);
    const double effective = (A[0] - A[1]) / (2.0 * A[0] - A[1]);
    t.geq(effective, theta, n, 1);
  }
  return t.finish();
}

/// Discrete product inequality behind the energy estimates: for random real
/// trajectories v_0..v_N and every n,
///   (Dv)^{n-theta} (theta v_{n-1} + (1-theta) v_n)
///     >= (1/2) sum_{k=1}^n A^{(n)}_{n-k} (v_k^2 - v_{k-1}^2).
/// Requires nonincreasing kernel rows; trials are deterministic per seed.
inline AuditCheck audit_quadratic_form(const KernelTable& table, int trials,
                                       std::uint64_t seed,
                                       double tol = 1e-10) {
  detail::MarginTracker t("quadratic_form", tol);
  const int N = table.levels();
  const double theta = table.mesh().theta();
  std::mt19937_64 engine(seed);
  auto canonical = [&engine]() { return (engine() >> 11) * 0x1p-53; };
  auto normal = [&]() {
    // Box-Muller on canonical uniforms; avoids log(0).
    const double u1 = 1.0 - canonical();
    const double u2 = canonical();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  };
  std::vector<double> v(N + 1);
  for (int trial = 1; trial <= trials; ++trial) {
    for (auto& x : v) x = normal();
    const auto Dv = apply_discrete_caputo(
        table, std::span<const double>(v.data(), v.size()));
    for (int n = 1; n <= N; ++n) {
      const auto& A = table.row(n).A;
      const double offset_value = theta * v[n - 1] + (1.0 - theta) * v[n];
      double rhs = 0.0;
      for (int k = 1; k <= n; ++k)
        rhs += A[n - k] * (v[k] * v[k] - v[k - 1] * v[k - 1]);
      t.geq(Dv[n - 1] * offset_value, 0.5 * rhs, trial, n);
    }
  }
  return t.finish();
}

/// Interlacing of the linear-part coefficients with the weight derivative:
///   a^{(n)}_{n-k} > w_n'(t_{k-1})          for 1 <= k <= n,
///   w_n'(t_{k-1}) > a^{(n)}_{n-k+1}        for 2 <= k <= n.
inline AuditCheck audit_a_interlacing(const KernelTable& table,
                                      double tol = 1e-10) {
  detail::MarginTracker t("a_interlacing", tol);
  for (int n = 1; n <= table.levels(); ++n) {
    const auto& a = table.row(n).a;
    for (int k = 1; k <= n; ++k) {
      const double w1 = offset_weight_d1(table.mesh(), table.alpha(), n,
                                         table.mesh().node(k - 1));
      t.geq(a[n - k], w1, n, k);
      if (k >= 2) t.geq(w1, a[n - k + 1], n, k);
    }
  }
  return t.finish();
}

/// Cell-average lower bounds on the linear-part coefficients, with weight
/// omega_{1-alpha}(t_n - .):
///   a^{(n)}_0     > (3/4) avg_n,
///   a^{(n)}_{n-k} > avg_k            for 1 <= k <= n-1.
inline AuditCheck audit_a_cell_average(const KernelTable& table,
                                       double tol = 1e-10) {
  detail::MarginTracker t("a_cell_average", tol);
  for (int n = 1; n <= table.levels(); ++n) {
    const auto& a = table.row(n).a;
    for (int k = 1; k <= n; ++k) {
      const double avg =
          cell_average_weight(table.mesh(), table.alpha(), n, k);
      if (k == n)
        t.geq(a[0], 0.75 * avg, n, k);
      else
        t.geq(a[n - k], avg, n, k);
    }
  }
  return t.finish();
}

/// Positivity and window bound for the quadratic-correction coefficients:
///   0 < b^{(n)}_{n-k} <= [rho_k / (4 (1 + rho_k))] (I^{(n)}_{n-k} + J^{(n)}_{n-k}).
inline AuditCheck audit_b_window_bound(const KernelTable& table,
                                       double tol = 1e-10) {
  detail::MarginTracker t("b_window_bound", tol);
  for (int n = 2; n <= table.levels(); ++n) {
    const auto& b = table.row(n).b;
    const auto bridges = bridge_integrals(table.mesh(), table.alpha(), n);
    for (int k = 1; k <= n - 1; ++k) {
      const int i = n - k;
      t.geq(b[i], 0.0, n, k);
      const double rho = table.mesh().rho(k);
      t.geq(rho / (4.0 * (1.0 + rho)) * (bridges.I[i] + bridges.J[i]), b[i],
            n, k);
    }
  }
  return t.finish();
}

/// Smallness of b relative to a on the same cell (matched offset only):
///   b^{(n)}_{n-k} < [theta tau_k / (2 (t_{n-theta} - t_k))] [rho_k/(1+rho_k)] a^{(n)}_{n-k}.
/// Skipped (no samples) when theta = 0, where the stated bound degenerates.
inline AuditCheck audit_b_vs_a(const KernelTable& table, double tol = 1e-10) {
  detail::MarginTracker t("b_vs_a", tol);
  const double theta = table.mesh().theta();
  if (theta > 0.0) {
    for (int n = 2; n <= table.levels(); ++n) {
      const auto& row = table.row(n);
      const double delta = table.mesh().offset_node(n);
      for (int k = 1; k <= n - 1; ++k) {
        const int i = n - k;
        const double rho = table.mesh().rho(k);
        const double factor = theta * table.mesh().tau(k) /
                              (2.0 * (delta - table.mesh().node(k))) * rho /
                              (1.0 + rho);
        t.geq(factor * row.a[i], row.b[i], n, k);
      }
    }
  }
  return t.finish();
}

/// Bridge integrals dominate the quadratic correction on each history cell:
///   I >= ((1+rho_k)/rho_k) b,   J >= (2 (1+rho_k)/rho_k) b,   J >= I.
inline AuditCheck audit_bridge_dominates_b(const KernelTable& table,
                                           double tol = 1e-10) {
  detail::MarginTracker t("bridge_dominates_b", tol);
  for (int n = 2; n <= table.levels(); ++n) {
    const auto& b = table.row(n).b;
    const auto bridges = bridge_integrals(table.mesh(), table.alpha(), n);
    for (int k = 1; k <= n - 1; ++k) {
      const int i = n - k;
      const double rho = table.mesh().rho(k);
      t.geq(bridges.I[i], (1.0 + rho) / rho * b[i], n, k);
      t.geq(bridges.J[i], 2.0 * (1.0 + rho) / rho * b[i], n, k);
      t.geq(bridges.J[i], bridges.I[i], n, k);
    }
  }
  return t.finish();
}

/// Step-ratio decay of the bridge integrals across adjacent cells:
///   I^{(n)}_{n-k-1} >= I^{(n)}_{n-k} / rho_k,
///   J^{(n)}_{n-k-1} >= J^{(n)}_{n-k} / rho_k    for 1 <= k <= n-2.
inline AuditCheck audit_bridge_decay(const KernelTable& table,
                                     double tol = 1e-10) {
  detail::MarginTracker t("bridge_decay", tol);
  for (int n = 3; n <= table.levels(); ++n) {
    const auto bridges = bridge_integrals(table.mesh(), table.alpha(), n);
    for (int k = 1; k <= n - 2; ++k) {
      const int i = n - k;
      const double rho = table.mesh().rho(k);
      t.geq(bridges.I[i - 1], bridges.I[i] / rho, n, k);
      t.geq(bridges.J[i - 1], bridges.J[i] / rho, n, k);
    }
  }
  return t.finish();
}

/// Exact difference identities for the linear-part coefficients:
///   a_{n-k-1} - a_{n-k} = I_{n-k-1} + J_{n-k}            (1 <= k <= n-2),
///   a_0 - a_1 = [theta/(1-2 theta)] w_n'(t_{n-1}) + J_1  (n >= 2).
inline AuditCheck audit_a_difference_identity(const KernelTable& table,
                                              double tol = 1e-12) {
  detail::MarginTracker t("a_difference_identity", tol, /*equality=*/true);
  const double theta = table.mesh().theta();
  // The differences cancel at large history distance, so residuals are
  // scaled by the operand magnitude rather than by the difference itself.
  for (int n = 2; n <= table.levels(); ++n) {
    const auto& a = table.row(n).a;
    const auto bridges = bridge_integrals(table.mesh(), table.alpha(), n);
    for (int k = 1; k <= n - 2; ++k) {
      const int i = n - k;
      const double lhs = a[i - 1] - a[i];
      const double rhs = bridges.I[i - 1] + bridges.J[i];
      t.residual((lhs - rhs) / std::max({a[i - 1], a[i], 1e-300}), n, k);
    }
    const double w1 = offset_weight_d1(table.mesh(), table.alpha(), n,
                                       table.mesh().node(n - 1));
    const double lhs = a[0] - a[1];
    const double rhs = theta / (1.0 - 2.0 * theta) * w1 + bridges.J[1];
    t.residual((lhs - rhs) / std::max({a[0], a[1], 1e-300}), n, n - 1);
  }
  return t.finish();
}

/// Per-cell lower bounds on the coefficient differences:
///   n = 2:             a_0 - a_1       >= I_1,
///   n >= 3, k = 1:     a_{n-2}-a_{n-1} >= b_{n-2} + (6/5) I_{n-1},
///   n >= 3, 1<k<n-1:   a_{n-k-1}-a_{n-k} >= b_{n-k-1} + rho_{k-1} b_{n-k+1} + (1/5) I_{n-k},
///   n >= 3, k = n-1:   a_0 - a_1       >= rho_{n-2} b_2 + I_1.
inline AuditCheck audit_a_difference_lower_bound(const KernelTable& table,
                                                 double tol = 1e-10) {
  detail::MarginTracker t("a_difference_lower_bound", tol);
  for (int n = 2; n <= table.levels(); ++n) {
    const auto& row = table.row(n);
    const auto bridges = bridge_integrals(table.mesh(), table.alpha(), n);
    if (n == 2) {
      t.geq(row.a[0] - row.a[1], bridges.I[1], n, 1);
      continue;
    }
    for (int k = 1; k <= n - 1; ++k) {
      const int i = n - k;
      const double diff = row.a[i - 1] - row.a[i];
      if (k == 1) {
        t.geq(diff, row.b[i - 1] + 1.2 * bridges.I[i], n, k);
      } else if (k == n - 1) {
        t.geq(diff, table.mesh().rho(n - 2) * row.b[2] + bridges.I[1], n, k);
      } else {
        t.geq(diff,
              row.b[i - 1] + table.mesh().rho(k - 1) * row.b[i + 1] +
                  0.2 * bridges.I[i],
              n, k);
      }
    }
  }
  return t.finish();
}

/// Full audit record for one mesh/order pair.
struct AuditCertificate {
  std::uint64_t mesh_fingerprint = 0;
  double alpha = 0.0;
  double theta = 0.0;
  int levels = 0;
  bool in_hypothesis = false;  ///< theta = alpha/2 and max ratio <= 7/4
  double max_rho = 0.0;
  std::vector<AuditCheck> checks;

  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

/// Run every kernel audit plus the complementary-kernel checks on one mesh.
/// Failures never throw; meshes outside the offset/ratio hypotheses are
/// marked so callers can classify failures as out-of-hypothesis.
inline AuditCertificate run_kernel_audit(const TimeMesh& mesh, double alpha,
                                         const AuditOptions& opts = {}) {
  detail::require_alpha(alpha, "run_kernel_audit");
  AuditCertificate cert;
  cert.mesh_fingerprint = mesh.fingerprint();
  cert.alpha = alpha;
  cert.theta = mesh.theta();
  cert.levels = mesh.levels();
  cert.max_rho = mesh.max_rho();
  cert.in_hypothesis =
      (mesh.theta() == alpha / 2.0) && cert.max_rho <= 1.75 * (1.0 + 1e-12);

  KernelTable table(mesh, alpha);
  cert.checks.push_back(audit_kernel_cell_bounds(table, opts.ineq_tol));
  cert.checks.push_back(audit_kernel_monotone_decay(table, opts.ineq_tol));
  cert.checks.push_back(audit_offset_dominance(table, opts.ineq_tol));
  cert.checks.push_back(audit_quadratic_form(table, opts.quadratic_trials,
                                             opts.seed, opts.ineq_tol));
  cert.checks.push_back(audit_a_interlacing(table, opts.ineq_tol));
  cert.checks.push_back(audit_a_cell_average(table, opts.ineq_tol));
  cert.checks.push_back(audit_b_window_bound(table, opts.ineq_tol));
  cert.checks.push_back(audit_b_vs_a(table, opts.ineq_tol));
  cert.checks.push_back(audit_bridge_dominates_b(table, opts.ineq_tol));
  cert.checks.push_back(audit_bridge_decay(table, opts.ineq_tol));
  cert.checks.push_back(audit_a_difference_identity(table, opts.eq_tol));
  cert.checks.push_back(audit_a_difference_lower_bound(table, opts.ineq_tol));

  try {
    const auto comp = build_complementary(table);
    {
      detail::MarginTracker t("complementary_identity", opts.eq_tol, true);
      for (int n = 1; n <= comp.levels(); ++n)
        t.residual(identity_residual(table, comp.row(n), n), n, 0);
      cert.checks.push_back(t.finish());
    }
    const auto pb = verify_p_bound(comp, mesh, alpha, opts.ineq_tol);
    AuditCheck c;
    c.name = "complementary_weighted_bound";
    c.pass = pb.pass;
    c.worst_margin = pb.worst_margin;
    c.worst_n = pb.worst_n;
    c.worst_k = pb.worst_m;
    c.samples = 2 * comp.levels();
    c.violations = pb.pass ? 0 : 1;
    if (!pb.nonnegative) c.note = "negative complementary entry";
    else if (!pb.first_column_ok) c.note = "first-column bound violated";
    cert.checks.push_back(std::move(c));
  } catch (const std::exception& e) {
    AuditCheck c;
    c.name = "complementary_weighted_bound";
    c.pass = false;
    c.worst_margin = -HUGE_VAL;
    c.violations = 1;
    c.note = e.what();
    cert.checks.push_back(std::move(c));
  }
  return cert;
}

}  // namespace subdiff
