#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

/// Nonuniform time meshes 0 = t_0 < t_1 < ... < t_N = T together with the
/// offset evaluation points t_{n-theta} = theta t_{n-1} + (1-theta) t_n used
/// by the shifted two-level scheme.  Factories cover the graded family
/// t_k = T (k/N)^gamma, the two-part family (graded start, uniform tail),
/// and randomized meshes with bounded adjacent-step ratios.
namespace subdiff {

class TimeMesh {
 public:
  /// Wrap an explicit node vector.  Requires at least one step, t_0 = 0
  /// exactly, strictly increasing finite nodes, and theta in [0, 1/2).
  TimeMesh(std::vector<double> nodes, double theta)
      : nodes_(std::move(nodes)), theta_(theta) {
    if (nodes_.size() < 2)
      throw std::invalid_argument("TimeMesh: need at least one step");
    if (nodes_.front() != 0.0)
      throw std::invalid_argument("TimeMesh: first node must be exactly 0");
    if (!(theta_ >= 0.0 && theta_ < 0.5))
      throw std::invalid_argument("TimeMesh: theta must lie in [0, 1/2)");
    for (std::size_t k = 1; k < nodes_.size(); ++k) {
      if (!std::isfinite(nodes_[k]) || !(nodes_[k] > nodes_[k - 1]))
        throw std::invalid_argument("TimeMesh: nodes must increase strictly");
    }
  }

  /// Uniform mesh with step T/N.
  static TimeMesh uniform(double T, int N, double theta) {
    check_shape(T, N);
    std::vector<double> nodes(N + 1);
    for (int k = 0; k <= N; ++k) nodes[k] = T * (static_cast<double>(k) / N);
    nodes[0] = 0.0;
    nodes[N] = T;
    return TimeMesh(std::move(nodes), theta);
  }

  /// Graded mesh t_k = T (k/N)^gamma; gamma = 1 reduces to the uniform mesh.
  static TimeMesh graded(double T, int N, double gamma, double theta) {
    check_shape(T, N);
    if (!(gamma >= 1.0))
      throw std::invalid_argument("TimeMesh::graded: gamma must be >= 1");
    std::vector<double> nodes(N + 1);
    for (int k = 0; k <= N; ++k)
      nodes[k] = T * std::pow(static_cast<double>(k) / N, gamma);
    nodes[0] = 0.0;
    nodes[N] = T;
    return TimeMesh(std::move(nodes), theta);
  }

  /// Two-part mesh: graded with exponent gamma on [0, T0], T0 = 2^{-gamma} T,
  /// using N0 = ceil(gamma N / (2^gamma - 1 + gamma)) steps, then uniform on
  /// [T0, T] with the remaining N - N0 steps.  The split keeps the uniform
  /// step no smaller than the last graded step.
  static TimeMesh two_part(double T, int N, double gamma, double theta) {
    check_shape(T, N);
    if (!(gamma >= 1.0))
      throw std::invalid_argument("TimeMesh::two_part: gamma must be >= 1");
    const double T0 = std::pow(2.0, -gamma) * T;
    const int N0 = static_cast<int>(
        std::ceil(gamma * N / (std::pow(2.0, gamma) - 1.0 + gamma)));
    if (N0 < 1 || N0 >= N)
      throw std::invalid_argument("TimeMesh::two_part: N too small for split");
    std::vector<double> nodes(N + 1);
    for (int k = 0; k <= N0; ++k)
      nodes[k] = T0 * std::pow(static_cast<double>(k) / N0, gamma);
    nodes[0] = 0.0;
    nodes[N0] = T0;
    const double tail_step = (T - T0) / (N - N0);
    for (int k = N0 + 1; k < N; ++k) nodes[k] = T0 + (k - N0) * tail_step;
    nodes[N] = T;
    return TimeMesh(std::move(nodes), theta);
  }

  /// Randomized mesh with adjacent-step ratios tau_k/tau_{k+1} confined to
  /// [0.2, rho_max].  Ratios are drawn uniformly from [0.2, 7/4] with
  /// platform-independent canonical doubles from mt19937_64 and clamped into
  /// [0.2, rho_max]; nodes are then scaled so t_N = T.  Deterministic per seed.
  /// Requires rho_max in [0.2, 7/4].
  static TimeMesh random_admissible(double T, int N, double rho_max,
                                    std::uint64_t seed, double theta) {
    check_shape(T, N);
    if (!(rho_max >= 0.2 && rho_max <= 1.75))
      throw std::invalid_argument(
          "TimeMesh::random_admissible: rho_max must lie in [0.2, 7/4]");
    std::mt19937_64 engine(seed);
    auto canonical = [&engine]() {
      return (engine() >> 11) * 0x1p-53;  // uniform in [0, 1)
    };
    std::vector<double> steps(N, 1.0);
    for (int k = 1; k < N; ++k) {
      double ratio = 0.2 + canonical() * (1.75 - 0.2);
      ratio = std::clamp(ratio, 0.2, rho_max);
      steps[k] = steps[k - 1] / ratio;  // ratio = tau_k / tau_{k+1}
    }
    double total = 0.0;
    for (double s : steps) total += s;
    std::vector<double> nodes(N + 1, 0.0);
    double acc = 0.0;
    for (int k = 1; k <= N; ++k) {
      acc += steps[k - 1] * (T / total);
      nodes[k] = acc;
    }
    nodes[N] = T;
    return TimeMesh(std::move(nodes), theta);
  }

  int levels() const { return static_cast<int>(nodes_.size()) - 1; }
  double horizon() const { return nodes_.back(); }
  double theta() const { return theta_; }
  const std::vector<double>& nodes() const { return nodes_; }

  /// t_k for 0 <= k <= N.
  double node(int k) const { return nodes_.at(static_cast<std::size_t>(k)); }

  /// tau_k = t_k - t_{k-1} for 1 <= k <= N.
  double tau(int k) const {
    if (k < 1 || k > levels()) throw std::out_of_range("TimeMesh::tau");
    return nodes_[k] - nodes_[k - 1];
  }

  /// rho_k = tau_k / tau_{k+1} for 1 <= k <= N-1.
  double rho(int k) const {
    if (k < 1 || k > levels() - 1) throw std::out_of_range("TimeMesh::rho");
    return tau(k) / tau(k + 1);
  }

  /// Offset point t_{n-theta} = t_{n-1} + (1-theta) tau_n for 1 <= n <= N.
  double offset_node(int n) const {
    if (n < 1 || n > levels()) throw std::out_of_range("TimeMesh::offset_node");
    return nodes_[n - 1] + (1.0 - theta_) * (nodes_[n] - nodes_[n - 1]);
  }

  double max_tau() const {
    double m = 0.0;
    for (int k = 1; k <= levels(); ++k) m = std::max(m, tau(k));
    return m;
  }

  /// Largest adjacent-step ratio; 0 for a single-step mesh.
  double max_rho() const {
    double m = 0.0;
    for (int k = 1; k + 1 <= levels(); ++k) m = std::max(m, rho(k));
    return m;
  }

  /// FNV-1a hash over the node bytes and theta; identifies a mesh in reports.
  std::uint64_t fingerprint() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](double x) {
      unsigned char bytes[sizeof(double)];
      std::memcpy(bytes, &x, sizeof(double));
      for (unsigned char b : bytes) {
        h ^= b;
        h *= 1099511628211ull;
      }
    };
    for (double t : nodes_) mix(t);
    mix(theta_);
    return h;
  }

 private:
  static void check_shape(double T, int N) {
    if (!(T > 0.0)) throw std::invalid_argument("TimeMesh: T must be positive");
    if (N < 1) throw std::invalid_argument("TimeMesh: N must be >= 1");
  }

  std::vector<double> nodes_;
  double theta_;
};

/// Outcome of checking a mesh against the two step-structure conditions the
/// kernel theory relies on: bounded adjacent ratios with the matched offset
/// (theta = alpha/2, rho <= 7/4), and the graded-envelope condition with its
/// fitted constant.
struct MeshConditionReport {
  bool m1_ok = false;            ///< theta = alpha/2 exactly and rho <= 7/4
  bool theta_is_half_alpha = false;
  double rho_max = 0.0;
  int rho_argmax = 0;            ///< k achieving rho_max (0 if none)

  bool m2_ok = false;            ///< fitted constant within the ceiling
  double fitted_constant = 0.0;  ///< smallest constant satisfying all three bounds
  int worst_index = 0;           ///< k where the binding bound is attained
  double ceiling = 0.0;
};

/// Evaluate both mesh conditions for a given order alpha and grading exponent
/// gamma.  The ratio test uses a 1e-12 relative tolerance on rho <= 7/4; the
/// graded-envelope constant is fitted as the smallest value making
///   tau_k <= C tau min(1, t_k^{1-1/gamma}),  t_k <= C t_{k-1}  (k >= 2),
///   tau_k / t_k <= C tau_{k-1} / t_{k-1}     (k >= 2)
/// all hold, and compared against `cgamma_ceiling`.
inline MeshConditionReport check_conditions(const TimeMesh& mesh, double alpha,
                                            double gamma,
                                            double cgamma_ceiling = 10.0) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("check_conditions: alpha must lie in (0,1)");
  if (!(gamma >= 1.0))
    throw std::invalid_argument("check_conditions: gamma must be >= 1");
  MeshConditionReport rep;
  rep.ceiling = cgamma_ceiling;
  const int N = mesh.levels();

  rep.theta_is_half_alpha = (mesh.theta() == alpha / 2.0);
  for (int k = 1; k + 1 <= N; ++k) {
    const double r = mesh.rho(k);
    if (r > rep.rho_max) {
      rep.rho_max = r;
      rep.rho_argmax = k;
    }
  }
  rep.m1_ok =
      rep.theta_is_half_alpha && rep.rho_max <= 1.75 * (1.0 + 1e-12);

  const double tau = mesh.max_tau();
  double fitted = 0.0;
  int worst = 1;
  auto consider = [&fitted, &worst](double value, int k) {
    if (value > fitted) {
      fitted = value;
      worst = k;
    }
  };
  for (int k = 1; k <= N; ++k) {
    const double envelope =
        tau * std::min(1.0, std::pow(mesh.node(k), 1.0 - 1.0 / gamma));
    consider(mesh.tau(k) / envelope, k);
  }
  for (int k = 2; k <= N; ++k) {
    consider(mesh.node(k) / mesh.node(k - 1), k);
    consider((mesh.tau(k) / mesh.node(k)) /
                 (mesh.tau(k - 1) / mesh.node(k - 1)),
             k);
  }
  rep.fitted_constant = fitted;
  rep.worst_index = worst;
  rep.m2_ok = fitted <= cgamma_ceiling;
  return rep;
}

namespace detail {

inline std::string shortest_decimal(double x) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

}  // namespace detail

/// Write a mesh as plain text: a `# theta=<value>` header followed by one
/// node per line, using shortest round-trip decimal formatting.
inline void save_mesh(const TimeMesh& mesh, std::ostream& out) {
  out << "# theta=" << detail::shortest_decimal(mesh.theta()) << "\n";
  for (double t : mesh.nodes()) out << detail::shortest_decimal(t) << "\n";
}

inline void save_mesh(const TimeMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_mesh: cannot open " + path);
  save_mesh(mesh, out);
}

/// Parse a mesh written by save_mesh.  Additional `#` comment lines and blank
/// lines are ignored; the theta header must precede the nodes.
inline TimeMesh load_mesh(std::istream& in) {
  std::string line;
  double theta = -1.0;
  bool have_theta = false;
  std::vector<double> nodes;
  auto parse_double = [](const std::string& text, const char* what) {
    double value = 0.0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    auto res = std::from_chars(begin, end, value);
    if (res.ec != std::errc{} || res.ptr != end)
      throw std::runtime_error(std::string("load_mesh: malformed ") + what +
                               ": '" + text + "'");
    return value;
  };
  while (std::getline(in, line)) {
    // Trim trailing carriage return and surrounding spaces.
    while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
      line.pop_back();
    std::size_t start = line.find_first_not_of(' ');
    if (start == std::string::npos) continue;
    line = line.substr(start);
    if (line[0] == '#') {
      const std::string prefix = "# theta=";
      if (line.rfind(prefix, 0) == 0) {
        theta = parse_double(line.substr(prefix.size()), "theta");
        have_theta = true;
      }
      continue;
    }
    if (!have_theta)
      throw std::runtime_error("load_mesh: node before '# theta=' header");
    nodes.push_back(parse_double(line, "node"));
  }
  if (!have_theta) throw std::runtime_error("load_mesh: missing theta header");
  return TimeMesh(std::move(nodes), theta);
}

inline TimeMesh load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_mesh: cannot open " + path);
  return load_mesh(in);
}

}  // namespace subdiff
