// Command-line front end: solve the 1D reaction-subdiffusion benchmark,
// dump discrete-kernel tables, run the kernel audit and consistency suites,
// and produce convergence tables with empirical orders.  All outputs are
// CSV; configuration comes from `key=value` files with flags taking
// precedence.

#include <cstdint>
#include <functional>
#include <fstream>
#include <iostream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "subdiff/harness.hpp"

namespace {

int with_output(const std::string& path,
                const std::function<void(std::ostream&)>& emit) {
  if (path.empty()) {
    emit(std::cout);
    return 0;
  }
  std::ofstream file(path);
  if (!file) {
    std::cerr << "error: cannot open output file: " << path << '\n';
    return 1;
  }
  emit(file);
  return 0;
}

/// Tracks which flags the user actually passed, so they can override a
/// config file after it is loaded.
class Overrides {
 public:
  void add(CLI::Option* option, std::function<void()> apply) {
    entries_.emplace_back(option, std::move(apply));
  }
  void apply() const {
    for (const auto& [option, fn] : entries_)
      if (option->count() > 0) fn();
  }

 private:
  std::vector<std::pair<CLI::Option*, std::function<void()>>> entries_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Offset-weighted discrete Caputo kernels on nonuniform time meshes:\n"
      "kernel tables, inequality audits, consistency reports, and a 1D\n"
      "linear reaction-subdiffusion solver."};
  app.require_subcommand(1);

  std::string config_path;
  subdiff::ExperimentConfig config;
  Overrides overrides;

  app.add_option("--config", config_path,
                 "key=value configuration file (flags win)");
  auto* opt_threads =
      app.add_option("--threads", config.threads, "worker threads");
  auto* opt_out = app.add_option("--out", config.out,
                                 "output CSV path (default: stdout)");
  overrides.add(opt_threads, [&] {});
  overrides.add(opt_out, [&] {});

  // Flag storage shared by the subcommands; each registered option notes
  // how it lands in the configuration.
  double alpha = config.alpha, sigma = config.sigma, T = config.T,
         kappa = config.kappa;
  double gamma_single = 2.0;
  std::vector<double> gamma_list;
  int N_single = 64, M = config.M;
  std::vector<int> N_list;
  std::string mesh_family, mesh_file;
  std::uint64_t seed = 1;
  std::vector<std::uint64_t> seeds;

  auto add_alpha = [&](CLI::App* cmd) {
    overrides.add(cmd->add_option("--alpha", alpha, "fractional order in (0,1)"),
                  [&] { config.alpha = alpha; });
  };
  auto add_T = [&](CLI::App* cmd) {
    overrides.add(cmd->add_option("--T", T, "time horizon"),
                  [&] { config.T = T; });
  };
  auto add_mesh_choice = [&](CLI::App* cmd, const std::string& choices) {
    overrides.add(cmd->add_option("--mesh", mesh_family, "mesh family " + choices),
                  [&] { config.mesh_family = mesh_family; });
    overrides.add(cmd->add_option("--mesh-file", mesh_file,
                                  "mesh file for --mesh file"),
                  [&] { config.mesh_file = mesh_file; });
  };
  auto add_single_N = [&](CLI::App* cmd) {
    overrides.add(cmd->add_option("--N", N_single, "number of time levels"),
                  [&] { config.N = {N_single}; });
  };
  auto add_single_gamma = [&](CLI::App* cmd) {
    overrides.add(cmd->add_option("--gamma", gamma_single, "mesh grading"),
                  [&] { config.gamma = {gamma_single}; });
  };
  auto add_seed = [&](CLI::App* cmd) {
    overrides.add(cmd->add_option("--seed", seed, "random-mesh seed"),
                  [&] { config.seeds = {seed}; });
  };
  auto add_seeds = [&](CLI::App* cmd) {
    overrides.add(cmd->add_option("--seeds", seeds, "random-mesh seeds")
                      ->delimiter(','),
                  [&] { config.seeds = seeds; });
  };

  // ---- solve -------------------------------------------------------------
  auto* cmd_solve = app.add_subcommand(
      "solve", "march the separable benchmark and write n,t_n,error_L2");
  add_alpha(cmd_solve);
  add_T(cmd_solve);
  add_mesh_choice(cmd_solve, "{uniform|graded|twopart|random|file}");
  add_single_N(cmd_solve);
  add_single_gamma(cmd_solve);
  add_seed(cmd_solve);
  overrides.add(cmd_solve->add_option("--sigma", sigma,
                                      "temporal regularity of the benchmark"),
                [&] { config.sigma = sigma; });
  overrides.add(cmd_solve->add_option("--kappa", kappa, "reaction coefficient"),
                [&] { config.kappa = kappa; });
  overrides.add(cmd_solve->add_option("--M", M, "interior space nodes"),
                [&] { config.M = M; });
  std::string state_out;
  cmd_solve->add_option("--state-out", state_out,
                        "also write the final nodal values (i,x,u) here");

  // ---- kernels -----------------------------------------------------------
  auto* cmd_kernels = app.add_subcommand(
      "kernels", "dump kernel rows n,k,a,b,A (or the complementary n,j,P)");
  add_alpha(cmd_kernels);
  add_T(cmd_kernels);
  add_mesh_choice(cmd_kernels, "{uniform|graded|twopart|random|file}");
  add_single_N(cmd_kernels);
  add_single_gamma(cmd_kernels);
  add_seed(cmd_kernels);
  int row_from = 0, row_to = 0;
  bool complementary = false;
  std::string eval_name = "closed";
  cmd_kernels->add_option("--from", row_from, "first row to dump (default 1)");
  cmd_kernels->add_option("--to", row_to, "last row to dump (default N)");
  cmd_kernels->add_flag("--complementary", complementary,
                        "dump complementary kernels instead");
  cmd_kernels->add_option("--eval", eval_name,
                          "coefficient evaluation: closed|quadrature");

  // ---- audit -------------------------------------------------------------
  auto* cmd_audit = app.add_subcommand(
      "audit", "run the kernel inequality audits; check,n,k,margin,pass");
  add_alpha(cmd_audit);
  add_T(cmd_audit);
  add_mesh_choice(cmd_audit, "{uniform|graded|twopart|random|file|all}");
  add_single_N(cmd_audit);
  add_single_gamma(cmd_audit);
  add_seeds(cmd_audit);

  // ---- consistency -------------------------------------------------------
  auto* cmd_consistency = app.add_subcommand(
      "consistency",
      "truncation errors and error-control bounds for a power profile");
  add_alpha(cmd_consistency);
  add_T(cmd_consistency);
  add_mesh_choice(cmd_consistency, "{uniform|graded|twopart|random|file|all}");
  add_single_N(cmd_consistency);
  add_single_gamma(cmd_consistency);
  add_seeds(cmd_consistency);
  overrides.add(cmd_consistency->add_option("--sigma", sigma,
                                            "power-profile regularity"),
                [&] { config.sigma = sigma; });

  // ---- convergence -------------------------------------------------------
  auto* cmd_convergence = app.add_subcommand(
      "convergence", "error table N,eN,order over a list of mesh sizes");
  add_alpha(cmd_convergence);
  add_T(cmd_convergence);
  add_mesh_choice(cmd_convergence, "{uniform|graded|twopart}");
  overrides.add(
      cmd_convergence->add_option("--N", N_list, "time-level counts")
          ->delimiter(','),
      [&] { config.N = N_list; });
  overrides.add(
      cmd_convergence->add_option("--gamma", gamma_list, "grading exponents")
          ->delimiter(','),
      [&] { config.gamma = gamma_list; });
  overrides.add(cmd_convergence->add_option("--sigma", sigma,
                                            "benchmark regularity"),
                [&] { config.sigma = sigma; });
  overrides.add(
      cmd_convergence->add_option("--kappa", kappa, "reaction coefficient"),
      [&] { config.kappa = kappa; });
  overrides.add(cmd_convergence->add_option("--M", M, "interior space nodes"),
                [&] { config.M = M; });

  CLI11_PARSE(app, argc, argv);

  try {
    if (!config_path.empty()) subdiff::load_config_file(config_path, config);
    overrides.apply();
    config.validate();
    const double gamma =
        config.gamma.empty() ? 1.0 : config.gamma.front();
    const int N = config.N.empty() ? 64 : config.N.front();
    const std::uint64_t first_seed =
        config.seeds.empty() ? 1 : config.seeds.front();

    if (cmd_solve->parsed()) {
      const auto mesh = subdiff::make_mesh(config, gamma, N, first_seed);
      const auto problem = subdiff::SubdiffusionProblem::manufactured(
          config.alpha, config.sigma, config.kappa);
      const auto run = subdiff::solve_subdiffusion(problem, mesh, config.M);
      if (run.step_cap_violated)
        std::cerr << "warning: largest step " << mesh.max_tau()
                  << " exceeds the reaction step cap " << run.step_cap << '\n';
      std::cerr << "final-time L2 error: " << run.final_error_l2 << '\n';
      int rc = with_output(config.out, [&](std::ostream& out) {
        subdiff::write_trajectory_csv(out, mesh, run);
      });
      if (rc == 0 && !state_out.empty()) {
        const subdiff::SpatialGrid grid(problem.length, config.M);
        rc = with_output(state_out, [&](std::ostream& out) {
          out << "i,x,u\n";
          for (int i = 1; i <= config.M; ++i)
            out << i << ',' << subdiff::detail::csv_number(grid.node(i)) << ','
                << subdiff::detail::csv_number(run.final_state[i - 1]) << '\n';
        });
      }
      return rc;
    }

    if (cmd_kernels->parsed()) {
      if (eval_name != "closed" && eval_name != "quadrature")
        throw std::invalid_argument("--eval must be closed or quadrature");
      const auto mesh = subdiff::make_mesh(config, gamma, N, first_seed);
      const subdiff::KernelTable table(
          mesh, config.alpha,
          eval_name == "closed" ? subdiff::KernelEval::closed_form
                                : subdiff::KernelEval::quadrature);
      const int lo = row_from > 0 ? row_from : 1;
      const int hi = row_to > 0 ? row_to : mesh.levels();
      if (lo < 1 || hi > mesh.levels() || lo > hi)
        throw std::invalid_argument("--from/--to out of range");
      return with_output(config.out, [&](std::ostream& out) {
        if (complementary) {
          const auto comp = subdiff::build_complementary(table);
          subdiff::write_complementary_csv(out, comp, lo, hi);
        } else {
          subdiff::write_kernel_csv(out, table, lo, hi);
        }
      });
    }

    if (cmd_audit->parsed()) {
      const auto suite = subdiff::run_audit_suite(config);
      const int rc = with_output(config.out, [&](std::ostream& out) {
        subdiff::write_audit_csv(out, suite);
      });
      if (rc != 0) return rc;
      if (!suite.in_hypothesis_pass) {
        std::cerr << "audit: in-hypothesis check failed\n";
        return 2;
      }
      return 0;
    }

    if (cmd_consistency->parsed()) {
      const auto runs = subdiff::run_consistency_suite(config);
      bool ok = true;
      const int rc = with_output(config.out, [&](std::ostream& out) {
        out << "n,t_offset,upsilon,g_loc,g_his,ecs_rhs,e_glob,r_offset\n";
        for (const auto& run : runs) {
          if (!run.note.empty()) {
            out << "# mesh=" << run.label << " error=" << run.note << '\n';
            ok = false;
            continue;
          }
          out << "# mesh=" << run.label << '\n';
          subdiff::write_consistency_rows(out, run.report);
          if (!run.report.ecs_pass || !run.report.global_pass ||
              !run.report.remark_pass)
            ok = false;
        }
      });
      if (rc != 0) return rc;
      if (!ok) {
        std::cerr << "consistency: a bound check failed\n";
        return 2;
      }
      return 0;
    }

    if (cmd_convergence->parsed()) {
      return with_output(config.out, [&](std::ostream& out) {
        for (size_t g = 0; g < config.gamma.size(); ++g) {
          if (config.gamma.size() > 1)
            out << "# gamma="
                << subdiff::detail::csv_number(config.gamma[g]) << '\n';
          const auto report = subdiff::run_table(config, config.gamma[g]);
          subdiff::write_error_report_csv(out, report);
          for (const auto& row : report.rows)
            if (!row.note.empty())
              std::cerr << "row N=" << row.N << " failed: " << row.note
                        << '\n';
        }
      });
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
