// Acceptance gate for the subdiffusion artifact.  Ten numbered criteria run
// back to back; each prints exactly one PASS/FAIL line with its measured
// margins and pinned tolerance, and the process exits nonzero if any fail.
// Budget: a few minutes on four cores.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "subdiff/harness.hpp"

using namespace subdiff;

namespace {

const int g_threads = []() {
  const unsigned hw = std::thread::hardware_concurrency();
  return static_cast<int>(std::clamp(hw, 1u, 4u));
}();

std::string sci(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

/// Mesh battery shared by the kernel criteria: uniform, graded exponents
/// 1, 2, 3, a two-part mesh, and `randoms` random admissible meshes.
std::vector<std::pair<std::string, TimeMesh>> battery(double alpha, int N,
                                                      int randoms) {
  const double theta = alpha / 2.0;
  std::vector<std::pair<std::string, TimeMesh>> out;
  out.emplace_back("uniform", TimeMesh::uniform(1.0, N, theta));
  for (double g : {1.0, 2.0, 3.0}) {
    char label[32];
    std::snprintf(label, sizeof label, "graded(%g)", g);
    out.emplace_back(label, TimeMesh::graded(1.0, N, g, theta));
  }
  out.emplace_back("twopart(2)", TimeMesh::two_part(1.0, N, 2.0, theta));
  for (int s = 1; s <= randoms; ++s) {
    char label[32];
    std::snprintf(label, sizeof label, "random(%d)", s);
    out.emplace_back(label,
                     TimeMesh::random_admissible(1.0, N, 1.75, s, theta));
  }
  return out;
}

// --- criterion 1: complementary convolution identity -----------------------

Outcome criterion_identity() {
  const double tol = 1e-12;
  double worst = 0.0;
  std::string worst_at;
  for (double alpha : {0.4, 0.6, 0.8}) {
    const auto meshes = battery(alpha, 64, 20);
    std::vector<double> residual(meshes.size());
    detail::parallel_for(
        static_cast<int>(meshes.size()), g_threads, [&](int i) {
          const KernelTable table(meshes[i].second, alpha);
          residual[i] = identity_residual(table, build_complementary(table));
        });
    for (size_t i = 0; i < meshes.size(); ++i)
      if (residual[i] > worst) {
        worst = residual[i];
        worst_at = meshes[i].first + ", alpha=" + sci(alpha);
      }
  }
  return {worst <= tol, "worst residual " + sci(worst) + " (" + worst_at +
                            "), tol " + sci(tol)};
}

// --- criterion 2: kernel audit battery --------------------------------------

Outcome criterion_audits() {
  const double tol = 1e-10;
  double worst = HUGE_VAL;
  std::string worst_at;
  bool all_pass = true;
  for (double alpha : {0.4, 0.6, 0.8}) {
    const auto meshes = battery(alpha, 64, 20);
    std::vector<AuditCertificate> certs(meshes.size());
    detail::parallel_for(
        static_cast<int>(meshes.size()), g_threads, [&](int i) {
          certs[i] = run_kernel_audit(meshes[i].second, alpha);
        });
    for (size_t i = 0; i < meshes.size(); ++i) {
      if (!certs[i].in_hypothesis) all_pass = false;
      for (const auto& check : certs[i].checks) {
        if (check.worst_margin < worst) {
          worst = check.worst_margin;
          worst_at = check.name + " on " + meshes[i].first +
                     ", alpha=" + sci(alpha);
        }
        if (check.worst_margin < -tol || !check.pass) all_pass = false;
      }
    }
  }
  return {all_pass, "worst margin " + sci(worst) + " (" + worst_at +
                        "), tol -" + sci(tol)};
}

// --- criterion 3: closed form vs adaptive quadrature ------------------------

Outcome criterion_dual_route() {
  const double tol = 1e-10;
  struct Job {
    std::string label;
    double alpha;
    TimeMesh mesh;
  };
  std::vector<Job> jobs;
  for (double alpha : {0.4, 0.6, 0.8}) {
    const double theta = alpha / 2.0;
    jobs.push_back({"uniform", alpha, TimeMesh::uniform(1.0, 32, theta)});
    jobs.push_back({"graded(2)", alpha, TimeMesh::graded(1.0, 32, 2.0, theta)});
    jobs.push_back({"graded(3)", alpha, TimeMesh::graded(1.0, 32, 3.0, theta)});
    jobs.push_back({"twopart(2)", alpha,
                    TimeMesh::two_part(1.0, 32, 2.0, theta)});
    for (int s = 1; s <= 3; ++s)
      jobs.push_back({"random(" + std::to_string(s) + ")", alpha,
                      TimeMesh::random_admissible(1.0, 32, 1.75, s, theta)});
  }
  std::vector<double> deviation(jobs.size(), 0.0);
  detail::parallel_for(static_cast<int>(jobs.size()), g_threads, [&](int j) {
    const auto& mesh = jobs[j].mesh;
    const double alpha = jobs[j].alpha;
    double worst = 0.0;
    auto track = [&](double closed, double quad) {
      worst = std::max(worst, std::abs(closed - quad) /
                                  std::max(std::abs(closed), std::abs(quad)));
    };
    for (int n = 1; n <= mesh.levels(); ++n) {
      for (int k = 1; k <= n; ++k)
        track(a_coeff(mesh, alpha, n, k),
              a_coeff_quadrature(mesh, alpha, n, k));
      for (int k = 1; k <= n - 1; ++k)
        track(b_coeff(mesh, alpha, n, k),
              b_coeff_quadrature(mesh, alpha, n, k));
      if (n >= 2) {
        const auto closed =
            bridge_integrals(mesh, alpha, n, KernelEval::closed_form);
        const auto quad =
            bridge_integrals(mesh, alpha, n, KernelEval::quadrature);
        for (int i = 1; i <= n - 1; ++i) {
          track(closed.I[i], quad.I[i]);
          track(closed.J[i], quad.J[i]);
        }
      }
    }
    deviation[j] = worst;
  });
  double worst = 0.0;
  std::string worst_at;
  for (size_t j = 0; j < jobs.size(); ++j)
    if (deviation[j] > worst) {
      worst = deviation[j];
      worst_at = jobs[j].label + ", alpha=" + sci(jobs[j].alpha);
    }
  return {worst <= tol, "worst relative gap " + sci(worst) + " (" + worst_at +
                            "), tol " + sci(tol)};
}

// --- criterion 4: exactness on quadratics -----------------------------------

Outcome criterion_quadratic_exactness() {
  const double tol = 1e-12;
  const ManufacturedFunction profiles[3] = {
      ManufacturedFunction::cubic(1.0, -0.3, 0.7, 0.0),
      ManufacturedFunction::cubic(0.0, 2.0, -1.0, 0.0),
      ManufacturedFunction::cubic(0.5, 0.0, 3.0, 0.0)};
  double worst = 0.0;
  std::string worst_at;
  for (double alpha : {0.4, 0.6, 0.8}) {
    const auto meshes = battery(alpha, 64, 5);
    for (const auto& [label, mesh] : meshes) {
      const KernelTable table(mesh, alpha);
      for (const auto& v : profiles) {
        const auto upsilon = truncation_error(table, v);
        for (int n = 1; n <= table.levels(); ++n) {
          const double scale =
              std::max(1.0, std::abs(v.caputo(alpha, mesh.offset_node(n))));
          const double scaled = std::abs(upsilon[n - 1]) / scale;
          if (scaled > worst) {
            worst = scaled;
            worst_at = label + ", alpha=" + sci(alpha);
          }
        }
      }
    }
  }
  return {worst <= tol, "worst scaled truncation " + sci(worst) + " (" +
                            worst_at + "), tol " + sci(tol)};
}

// --- criterion 5: per-level error-control bound -----------------------------

Outcome criterion_ecs() {
  struct Job {
    std::string label;
    double alpha, sigma;
    TimeMesh mesh;
  };
  std::vector<Job> jobs;
  for (double alpha : {0.4, 0.6, 0.8}) {
    const double theta = alpha / 2.0;
    const std::vector<std::pair<std::string, TimeMesh>> meshes = {
        {"uniform", TimeMesh::uniform(1.0, 64, theta)},
        {"graded(2)", TimeMesh::graded(1.0, 64, 2.0, theta)},
        {"graded(3)", TimeMesh::graded(1.0, 64, 3.0, theta)},
        {"twopart(2)", TimeMesh::two_part(1.0, 64, 2.0, theta)},
        {"random(1)", TimeMesh::random_admissible(1.0, 64, 1.75, 1, theta)}};
    for (double sigma : {0.4, 0.8, 1.4})
      for (const auto& [label, mesh] : meshes)
        jobs.push_back({label, alpha, sigma, mesh});
  }
  std::vector<double> margins(jobs.size());
  std::vector<char> ok(jobs.size(), 0);
  detail::parallel_for(static_cast<int>(jobs.size()), g_threads, [&](int j) {
    const KernelTable table(jobs[j].mesh, jobs[j].alpha);
    const auto comp = build_complementary(table);
    const auto rep = consistency_report(
        table, comp, ManufacturedFunction::power_profile(jobs[j].sigma));
    margins[j] = rep.ecs_worst_margin;
    ok[j] = rep.ecs_pass ? 1 : 0;
  });
  double worst = HUGE_VAL;
  std::string worst_at;
  bool all_pass = true;
  for (size_t j = 0; j < jobs.size(); ++j) {
    if (!ok[j]) all_pass = false;
    if (margins[j] < worst) {
      worst = margins[j];
      worst_at = jobs[j].label + ", alpha=" + sci(jobs[j].alpha) +
                 ", sigma=" + sci(jobs[j].sigma);
    }
  }
  return {all_pass, "worst margin " + sci(worst) + " (" + worst_at +
                        "), tol -1e-10"};
}

// --- criteria 6-9: convergence tables and stability -------------------------

struct TableRun {
  double alpha, sigma, gamma;
  int N;
  TimeMesh mesh;
  SolveResult run;
};

std::vector<TableRun>& table_runs() {
  static std::vector<TableRun> runs = [] {
    struct Plan {
      double alpha, sigma, gamma;
    };
    const Plan plans[4] = {{0.6, 1.6, 1.0},
                           {0.4, 0.8, 2.5},
                           {0.4, 0.4, 2.0},
                           {0.4, 0.4, 5.0}};
    std::vector<TableRun> out;
    for (const auto& plan : plans)
      for (int N : {64, 128, 256, 512})
        out.push_back({plan.alpha, plan.sigma, plan.gamma, N,
                       TimeMesh::two_part(1.0, N, plan.gamma,
                                          plan.alpha / 2.0),
                       {}});
    // M matches the resolution the reference tables were produced with; a
    // coarser grid lets the O(h^2) eigenvalue shift of the discrete Laplacian
    // bias e(512) beyond the 5% acceptance window.
    detail::parallel_for(static_cast<int>(out.size()), g_threads, [&](int i) {
      auto& job = out[i];
      const auto problem =
          SubdiffusionProblem::manufactured(job.alpha, job.sigma, 2.0);
      job.run = solve_subdiffusion(problem, job.mesh, 10000);
    });
    return out;
  }();
  return runs;
}

/// Errors and empirical orders for one of the four solve plans.
void extract(double alpha, double sigma, double gamma, double errors[4],
             double orders[3]) {
  const auto& runs = table_runs();
  int slot = 0;
  for (const auto& job : runs)
    if (job.alpha == alpha && job.sigma == sigma && job.gamma == gamma)
      errors[slot++] = job.run.max_error_l2;
  for (int i = 0; i < 3; ++i)
    orders[i] = std::log2(errors[i] / errors[i + 1]);
}

Outcome criterion_table_alpha06() {
  const double ref_err[4] = {2.32e-4, 5.97e-5, 1.52e-5, 3.85e-6};
  const double ref_ord[3] = {1.96, 1.97, 1.98};
  double err[4], ord[3];
  extract(0.6, 1.6, 1.0, err, ord);
  bool pass = true;
  double worst_err_dev = 0.0, worst_ord_dev = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double dev = std::abs(err[i] / ref_err[i] - 1.0);
    worst_err_dev = std::max(worst_err_dev, dev);
    if (dev > 0.05) pass = false;
  }
  for (int i = 0; i < 3; ++i) {
    const double dev = std::abs(ord[i] - ref_ord[i]);
    worst_ord_dev = std::max(worst_ord_dev, dev);
    if (dev > 0.05) pass = false;
  }
  return {pass, "e(N) dev " + sci(worst_err_dev) + " (tol 0.05), order dev " +
                    sci(worst_ord_dev) + " (tol 0.05); e=[" + sci(err[0]) +
                    ", " + sci(err[1]) + ", " + sci(err[2]) + ", " +
                    sci(err[3]) + "], p=[" + sci(ord[0]) + ", " + sci(ord[1]) +
                    ", " + sci(ord[2]) + "]"};
}

Outcome criterion_table_alpha04() {
  const double ref_ord[3] = {2.11, 2.07, 2.06};
  double err[4], ord[3];
  extract(0.4, 0.8, 2.5, err, ord);
  bool pass = true;
  double worst = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double dev = std::abs(ord[i] - ref_ord[i]);
    worst = std::max(worst, dev);
    if (dev > 0.1) pass = false;
  }
  return {pass, "order dev " + sci(worst) + " (tol 0.1); p=[" + sci(ord[0]) +
                    ", " + sci(ord[1]) + ", " + sci(ord[2]) + "]"};
}

Outcome criterion_grading_sharpness() {
  double err2[4], ord2[3], err5[4], ord5[3];
  extract(0.4, 0.4, 2.0, err2, ord2);
  extract(0.4, 0.4, 5.0, err5, ord5);
  bool pass = true;
  double worst2 = 0.0, worst5 = 0.0;
  for (int i = 0; i < 3; ++i) {
    worst2 = std::max(worst2, std::abs(ord2[i] - 0.83));
    worst5 = std::max(worst5, std::abs(ord5[i] - 2.1));
    if (std::abs(ord2[i] - 0.83) > 0.1) pass = false;
    if (std::abs(ord5[i] - 2.1) > 0.15) pass = false;
  }
  return {pass, "gamma=2 orders [" + sci(ord2[0]) + ", " + sci(ord2[1]) +
                    ", " + sci(ord2[2]) + "] (dev " + sci(worst2) +
                    ", tol 0.1); gamma=5 orders [" + sci(ord5[0]) + ", " +
                    sci(ord5[1]) + ", " + sci(ord5[2]) + "] (dev " +
                    sci(worst5) + ", tol 0.15)"};
}

Outcome criterion_stability() {
  const auto& runs = table_runs();
  double worst = HUGE_VAL;
  std::string worst_at;
  bool all_pass = true;
  std::vector<StabilityReport> reports(runs.size());
  detail::parallel_for(static_cast<int>(runs.size()), g_threads, [&](int i) {
    const KernelTable table(runs[i].mesh, runs[i].alpha);
    const auto comp = build_complementary(table);
    reports[i] = stability_report(table, comp, runs[i].run, 2.0);
  });
  for (size_t i = 0; i < runs.size(); ++i) {
    const auto& rep = reports[i];
    if (!rep.pass_complementary || !rep.pass_closed) all_pass = false;
    const double margin = std::min(rep.worst_margin_complementary,
                                   rep.worst_margin_closed);
    if (margin < worst) {
      worst = margin;
      worst_at = "alpha=" + sci(runs[i].alpha) + ", gamma=" +
                 sci(runs[i].gamma) + ", N=" + std::to_string(runs[i].N);
    }
  }
  return {all_pass, "worst margin " + sci(worst) + " (" + worst_at +
                        "), slack 1e-10"};
}

// --- criterion 10: first-level degeneracy at sigma = alpha ------------------

Outcome criterion_first_level() {
  const double alpha = 0.4;
  const auto v = ManufacturedFunction::power_profile(alpha);
  auto first_upsilon = [&](int N) {
    const auto mesh = TimeMesh::uniform(1.0, N, alpha / 2.0);
    const auto row = kernel_row(mesh, alpha, 1);
    return v.caputo(alpha, mesh.offset_node(1)) -
           row.A[0] * (v.value(mesh.node(1)) - v.value(0.0));
  };
  const double coarse = std::abs(first_upsilon(64));
  const double fine = std::abs(first_upsilon(512));
  const double ratio = coarse / fine;
  const bool pass = ratio >= 0.5 && ratio <= 2.0;
  return {pass, "|Y(1)| at N=64: " + sci(coarse) + ", at N=512: " + sci(fine) +
                    ", ratio " + sci(ratio) + " (window [0.5, 2])"};
}

}  // namespace

int main() {
  struct Entry {
    int id;
    const char* label;
    Outcome (*fn)();
  };
  const Entry entries[] = {
      {1, "complementary convolution identity", criterion_identity},
      {2, "kernel inequality audits", criterion_audits},
      {3, "closed form vs quadrature", criterion_dual_route},
      {4, "quadratic exactness", criterion_quadratic_exactness},
      {5, "per-level error-control bound", criterion_ecs},
      {6, "convergence table, alpha=0.6 benchmark", criterion_table_alpha06},
      {7, "convergence table, alpha=0.4 graded", criterion_table_alpha04},
      {8, "grading sharpness at sigma=alpha", criterion_grading_sharpness},
      {9, "discrete stability bound", criterion_stability},
      {10, "first-level degeneracy", criterion_first_level},
  };
  int failures = 0;
  for (const auto& entry : entries) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = entry.fn();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    std::printf("%s criterion %2d: %s - %s [%.1fs]\n",
                outcome.pass ? "PASS" : "FAIL", entry.id, entry.label,
                outcome.detail.c_str(), seconds);
    std::fflush(stdout);
    if (!outcome.pass) ++failures;
  }
  if (failures > 0)
    std::printf("%d of 10 acceptance criteria failed\n", failures);
  else
    std::printf("all 10 acceptance criteria passed\n");
  return failures == 0 ? 0 : 1;
}
