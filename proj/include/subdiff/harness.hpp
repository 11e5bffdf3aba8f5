#pragma once

#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "subdiff/consistency.hpp"
#include "subdiff/fem1d.hpp"
#include "subdiff/kernel_audit.hpp"
#include "subdiff/time_mesh.hpp"

/// Experiment orchestration: plain-text configuration, convergence tables
/// with empirical orders, batch audit / consistency drivers over mesh
/// families, and CSV emission.  All aggregation is index-deterministic, so
/// the same configuration and seeds produce byte-identical output at any
/// thread count.
namespace subdiff {

struct ExperimentConfig {
  double alpha = 0.5;
  double sigma = 0.5;
  std::vector<double> gamma = {1.0};
  std::vector<int> N = {64, 128, 256, 512};
  int M = 4096;
  double kappa = 2.0;  ///< reaction coefficient of the separable benchmark
  double T = 1.0;
  std::string mesh_family = "twopart";  ///< uniform|graded|twopart|random|file|all
  std::vector<std::uint64_t> seeds;
  std::string mesh_file;
  std::string out;      ///< output path; empty means stdout
  int threads = 1;

  void validate() const {
    detail::require_alpha(alpha, "ExperimentConfig");
    for (int n : N)
      if (n < 8)
        throw std::invalid_argument("ExperimentConfig: every N must be >= 8");
    for (double g : gamma)
      if (!(g >= 1.0))
        throw std::invalid_argument("ExperimentConfig: gamma must be >= 1");
    if (M < 1) throw std::invalid_argument("ExperimentConfig: M must be >= 1");
    if (!(T > 0.0)) throw std::invalid_argument("ExperimentConfig: T must be positive");
    if (threads < 1)
      throw std::invalid_argument("ExperimentConfig: threads must be >= 1");
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto from = s.find_first_not_of(" \t\r");
  if (from == std::string_view::npos) return {};
  const auto to = s.find_last_not_of(" \t\r");
  return std::string(s.substr(from, to - from + 1));
}

inline double parse_real(const std::string& text, const std::string& key) {
  try {
    size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing junk");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: cannot parse '" + text +
                                "' as a number for key '" + key + "'");
  }
}

template <class T, class Convert>
std::vector<T> parse_list(const std::string& text, Convert&& convert) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(convert(item));
  }
  return out;
}

}  // namespace detail

/// Apply one `key=value` assignment; unknown keys raise.
inline void apply_config_entry(ExperimentConfig& config,
                               const std::string& key,
                               const std::string& value) {
  if (key == "alpha") {
    config.alpha = detail::parse_real(value, key);
  } else if (key == "sigma") {
    config.sigma = detail::parse_real(value, key);
  } else if (key == "gamma") {
    config.gamma = detail::parse_list<double>(
        value, [&](const std::string& s) { return detail::parse_real(s, key); });
  } else if (key == "N") {
    config.N = detail::parse_list<int>(value, [&](const std::string& s) {
      return static_cast<int>(detail::parse_real(s, key));
    });
  } else if (key == "M") {
    config.M = static_cast<int>(detail::parse_real(value, key));
  } else if (key == "kappa") {
    config.kappa = detail::parse_real(value, key);
  } else if (key == "T") {
    config.T = detail::parse_real(value, key);
  } else if (key == "mesh") {
    config.mesh_family = value;
  } else if (key == "seeds") {
    config.seeds =
        detail::parse_list<std::uint64_t>(value, [&](const std::string& s) {
          return static_cast<std::uint64_t>(std::stoull(s));
        });
  } else if (key == "mesh_file") {
    config.mesh_file = value;
  } else if (key == "out") {
    config.out = value;
  } else if (key == "threads") {
    config.threads = static_cast<int>(detail::parse_real(value, key));
  } else {
    throw std::invalid_argument("config: unknown key '" + key + "'");
  }
}

/// Parse a flat `key=value` stream; `#` starts a comment, blank lines are
/// skipped.  Later assignments win; command-line flags applied afterwards
/// win over everything.
inline void load_config(std::istream& in, ExperimentConfig& config) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    const std::string text = detail::trim(line);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key=value, got '" + text + "'");
    apply_config_entry(config, detail::trim(text.substr(0, eq)),
                       detail::trim(text.substr(eq + 1)));
  }
}

inline void load_config_file(const std::string& path,
                             ExperimentConfig& config) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  load_config(in, config);
}

/// Build the mesh a configuration describes, at grading gamma and size N.
/// theta is always alpha/2.
inline TimeMesh make_mesh(const ExperimentConfig& config, double gamma, int N,
                          std::uint64_t seed = 1) {
  const double theta = config.alpha / 2.0;
  const std::string& family = config.mesh_family;
  if (family == "uniform") return TimeMesh::uniform(config.T, N, theta);
  if (family == "graded") return TimeMesh::graded(config.T, N, gamma, theta);
  if (family == "twopart") return TimeMesh::two_part(config.T, N, gamma, theta);
  if (family == "random")
    return TimeMesh::random_admissible(config.T, N, 1.75, seed, theta);
  if (family == "file") {
    if (config.mesh_file.empty())
      throw std::invalid_argument("mesh family 'file' needs mesh_file=<path>");
    return load_mesh(config.mesh_file);
  }
  throw std::invalid_argument("unknown mesh family '" + family + "'");
}

/// Predicted temporal order of accuracy min{gamma sigma, 2} for the power
/// profile with regularity sigma on a mesh graded with exponent gamma.
inline double expected_order(double sigma, double gamma) {
  if (!((sigma > 0.0 && sigma < 1.0) || (sigma > 1.0 && sigma < 2.0)))
    throw std::domain_error(
        "expected_order: sigma must lie in (0,1) or (1,2)");
  if (!(gamma >= 1.0))
    throw std::domain_error("expected_order: gamma must be >= 1");
  return std::min(gamma * sigma, 2.0);
}

struct ErrorRow {
  int N = 0;
  double error = 0.0;   ///< final-time L2 error e(N)
  double order = 0.0;   ///< log2 e(N/2)/e(N); NaN on the first row
  std::string note;     ///< failure message when the solve raised
};

struct ErrorReport {
  std::vector<ErrorRow> rows;
  double expected = 0.0;  ///< min{gamma sigma, 2}
};

namespace detail {

/// Run jobs 0..count-1 across the requested number of threads.  Results
/// must be written into preassigned slots so output order is fixed.
template <class Job>
void parallel_for(int count, int threads, Job&& job) {
  const int workers = std::max(1, std::min(threads, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1))
        job(i);
    });
  for (auto& t : pool) t.join();
}

}  // namespace detail

/// Convergence table for one grading exponent: solve the separable
/// benchmark at every N in the config and report e(N) with empirical
/// orders.  Rows run in parallel; a row whose solve throws records the
/// message and a NaN error instead of aborting the table.
inline ErrorReport run_table(const ExperimentConfig& config, double gamma) {
  config.validate();
  ErrorReport report;
  report.expected = expected_order(config.sigma, gamma);
  report.rows.resize(config.N.size());
  detail::parallel_for(
      static_cast<int>(config.N.size()), config.threads, [&](int i) {
        ErrorRow& row = report.rows[i];
        row.N = config.N[i];
        row.order = std::numeric_limits<double>::quiet_NaN();
        try {
          const TimeMesh mesh = make_mesh(config, gamma, row.N);
          const auto problem = SubdiffusionProblem::manufactured(
              config.alpha, config.sigma, config.kappa);
          const auto run = solve_subdiffusion(problem, mesh, config.M);
          row.error = run.max_error_l2;
        } catch (const std::exception& e) {
          row.error = std::numeric_limits<double>::quiet_NaN();
          row.note = e.what();
        }
      });
  for (size_t i = 1; i < report.rows.size(); ++i)
    report.rows[i].order =
        std::log2(report.rows[i - 1].error / report.rows[i].error);
  return report;
}

/// One audited mesh in a batch run.
struct AuditSuiteRun {
  std::string label;
  double alpha = 0.0;
  AuditCertificate certificate;
};

struct AuditSuite {
  std::vector<AuditSuiteRun> runs;
  /// True when every in-hypothesis run passed all checks; out-of-hypothesis
  /// runs are classified, not failed.
  bool in_hypothesis_pass = true;
};

/// Fan the kernel audits out over the configured mesh family (or, for
/// family "all": uniform, every configured grading, the two-part mesh, and
/// one random mesh per seed).
inline AuditSuite run_audit_suite(const ExperimentConfig& config,
                                  const AuditOptions& options = {}) {
  config.validate();
  const int N = config.N.empty() ? 64 : config.N.front();
  const double theta = config.alpha / 2.0;
  struct Planned {
    std::string label;
    TimeMesh mesh;
  };
  std::vector<Planned> plan;
  const bool all = config.mesh_family == "all";
  auto want = [&](const std::string& f) {
    return all || config.mesh_family == f;
  };
  if (want("uniform"))
    plan.push_back({"uniform", TimeMesh::uniform(config.T, N, theta)});
  if (want("graded"))
    for (double g : config.gamma) {
      std::ostringstream label;
      label << "graded(gamma=" << g << ")";
      plan.push_back({label.str(), TimeMesh::graded(config.T, N, g, theta)});
    }
  if (want("twopart"))
    for (double g : config.gamma) {
      std::ostringstream label;
      label << "twopart(gamma=" << g << ")";
      plan.push_back({label.str(), TimeMesh::two_part(config.T, N, g, theta)});
    }
  if (want("random"))
    for (std::uint64_t seed : config.seeds) {
      std::ostringstream label;
      label << "random(seed=" << seed << ")";
      plan.push_back(
          {label.str(),
           TimeMesh::random_admissible(config.T, N, 1.75, seed, theta)});
    }
  if (config.mesh_family == "file")
    plan.push_back({"file(" + config.mesh_file + ")",
                    load_mesh(config.mesh_file)});
  if (plan.empty() && !all)
    throw std::invalid_argument("audit suite: unknown mesh family '" +
                                config.mesh_family + "'");

  AuditSuite suite;
  suite.runs.resize(plan.size());
  detail::parallel_for(
      static_cast<int>(plan.size()), config.threads, [&](int i) {
        suite.runs[i].label = plan[i].label;
        suite.runs[i].alpha = config.alpha;
        try {
          suite.runs[i].certificate =
              run_kernel_audit(plan[i].mesh, config.alpha, options);
        } catch (const std::exception& e) {
          AuditCheck failed;
          failed.name = "driver_error";
          failed.pass = false;
          failed.worst_margin = -HUGE_VAL;
          failed.note = e.what();
          suite.runs[i].certificate.checks.push_back(failed);
        }
      });
  for (const auto& run : suite.runs)
    if (run.certificate.in_hypothesis && !run.certificate.all_pass())
      suite.in_hypothesis_pass = false;
  return suite;
}

/// One consistency report per configured mesh (same fan-out as the audit
/// suite), all for the power profile with the configured sigma.
struct ConsistencySuiteRun {
  std::string label;
  double alpha = 0.0;
  double sigma = 0.0;
  ConsistencyReport report;
  std::string note;  ///< failure message when the run raised
};

inline std::vector<ConsistencySuiteRun> run_consistency_suite(
    const ExperimentConfig& config) {
  config.validate();
  const int N = config.N.empty() ? 64 : config.N.front();
  std::vector<TimeMesh> meshes;
  std::vector<std::string> labels;
  const bool all = config.mesh_family == "all";
  const double theta = config.alpha / 2.0;
  if (all || config.mesh_family == "uniform") {
    meshes.push_back(TimeMesh::uniform(config.T, N, theta));
    labels.push_back("uniform");
  }
  if (all || config.mesh_family == "graded")
    for (double g : config.gamma) {
      meshes.push_back(TimeMesh::graded(config.T, N, g, theta));
      std::ostringstream label;
      label << "graded(gamma=" << g << ")";
      labels.push_back(label.str());
    }
  if (all || config.mesh_family == "twopart")
    for (double g : config.gamma) {
      meshes.push_back(TimeMesh::two_part(config.T, N, g, theta));
      std::ostringstream label;
      label << "twopart(gamma=" << g << ")";
      labels.push_back(label.str());
    }
  if (all || config.mesh_family == "random")
    for (std::uint64_t seed : config.seeds) {
      meshes.push_back(
          TimeMesh::random_admissible(config.T, N, 1.75, seed, theta));
      std::ostringstream label;
      label << "random(seed=" << seed << ")";
      labels.push_back(label.str());
    }
  if (config.mesh_family == "file") {
    meshes.push_back(load_mesh(config.mesh_file));
    labels.push_back("file(" + config.mesh_file + ")");
  }
  if (meshes.empty())
    throw std::invalid_argument("consistency suite: unknown mesh family '" +
                                config.mesh_family + "'");

  std::vector<ConsistencySuiteRun> runs(meshes.size());
  detail::parallel_for(
      static_cast<int>(meshes.size()), config.threads, [&](int i) {
        runs[i].label = labels[i];
        runs[i].alpha = config.alpha;
        runs[i].sigma = config.sigma;
        try {
          const KernelTable table(meshes[i], config.alpha);
          const auto comp = build_complementary(table);
          runs[i].report = consistency_report(
              table, comp, ManufacturedFunction::power_profile(config.sigma));
        } catch (const std::exception& e) {
          runs[i].note = e.what();
        }
      });
  return runs;
}

// ---------------------------------------------------------------------------
// CSV emission.  Numbers use the shortest round-trip decimal form so output
// is byte-reproducible; NaN fields are left empty.

namespace detail {

inline std::string csv_number(double v) {
  if (std::isnan(v)) return {};
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

/// `N,eN,order` rows plus a trailing comment with the predicted order.
inline void write_error_report_csv(std::ostream& out,
                                   const ErrorReport& report) {
  out << "N,eN,order\n";
  for (const auto& row : report.rows)
    out << row.N << ',' << detail::csv_number(row.error) << ','
        << detail::csv_number(row.order) << '\n';
  out << "# expected_order=" << detail::csv_number(report.expected) << '\n';
}

/// `check,n,k,margin,pass` rows; each mesh of a batch is preceded by a
/// comment naming it.
inline void write_audit_csv(std::ostream& out, const AuditSuite& suite) {
  out << "check,n,k,margin,pass\n";
  for (const auto& run : suite.runs) {
    out << "# mesh=" << run.label << " alpha=" << detail::csv_number(run.alpha)
        << " in_hypothesis=" << (run.certificate.in_hypothesis ? 1 : 0)
        << '\n';
    for (const auto& check : run.certificate.checks)
      out << check.name << ',' << check.worst_n << ',' << check.worst_k << ','
          << detail::csv_number(check.worst_margin) << ','
          << (check.pass ? 1 : 0) << '\n';
  }
}

/// `n,t_offset,upsilon,g_loc,g_his,ecs_rhs,e_glob,r_offset` rows.
inline void write_consistency_rows(std::ostream& out,
                                   const ConsistencyReport& report) {
  for (const auto& row : report.rows)
    out << row.n << ',' << detail::csv_number(row.t_offset) << ','
        << detail::csv_number(row.upsilon) << ','
        << detail::csv_number(row.g_loc) << ','
        << detail::csv_number(row.g_his) << ','
        << detail::csv_number(row.ecs_rhs) << ','
        << detail::csv_number(row.e_glob) << ','
        << detail::csv_number(row.r_offset) << '\n';
}

inline void write_consistency_csv(std::ostream& out,
                                  const ConsistencyReport& report) {
  out << "n,t_offset,upsilon,g_loc,g_his,ecs_rhs,e_glob,r_offset\n";
  write_consistency_rows(out, report);
}

/// `n,t_n,error_L2` trajectory rows (level 0 carries a zero error: the
/// initial state is the nodal interpolant).
inline void write_trajectory_csv(std::ostream& out, const TimeMesh& mesh,
                                 const SolveResult& run) {
  out << "n,t_n,error_L2\n";
  for (int n = 0; n <= mesh.levels(); ++n) {
    const double err =
        run.error_l2.empty()
            ? std::numeric_limits<double>::quiet_NaN()
            : (n == 0 ? 0.0 : run.error_l2[n - 1]);
    out << n << ',' << detail::csv_number(mesh.node(n)) << ','
        << detail::csv_number(err) << '\n';
  }
}

/// `n,k,a,b,A` rows for kernel rows lo..hi; k is the time index, so the
/// printed coefficients carry subscript n-k (b is empty at k = n).
inline void write_kernel_csv(std::ostream& out, const KernelTable& table,
                             int lo, int hi) {
  out << "n,k,a,b,A\n";
  for (int n = lo; n <= hi; ++n) {
    const auto& row = table.row(n);
    for (int k = 1; k <= n; ++k)
      out << n << ',' << k << ',' << detail::csv_number(row.a[n - k]) << ','
          << detail::csv_number(row.b[n - k]) << ','
          << detail::csv_number(row.A[n - k]) << '\n';
  }
}

/// `n,j,P` rows: complementary kernel P^{(n)}_{n-j} for j = 1..n.
inline void write_complementary_csv(std::ostream& out,
                                    const ComplementaryTable& comp, int lo,
                                    int hi) {
  out << "n,j,P\n";
  for (int n = lo; n <= hi; ++n) {
    const auto& row = comp.row(n);
    for (int j = 1; j <= n; ++j)
      out << n << ',' << j << ',' << detail::csv_number(row[n - j]) << '\n';
  }
}

}  // namespace subdiff
