#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "subdiff/time_mesh.hpp"

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using namespace subdiff;

TEST_CASE("constructor validates its node list") {
  REQUIRE_THROWS_AS(TimeMesh({0.1, 0.5, 1.0}, 0.2), std::invalid_argument);
  REQUIRE_THROWS_AS(TimeMesh({0.0, 0.5, 0.5}, 0.2), std::invalid_argument);
  REQUIRE_THROWS_AS(TimeMesh({0.0, 0.5, 0.4}, 0.2), std::invalid_argument);
  REQUIRE_THROWS_AS(TimeMesh({0.0}, 0.2), std::invalid_argument);
  REQUIRE_THROWS_AS(TimeMesh({0.0, 1.0}, 0.5), std::invalid_argument);
  REQUIRE_THROWS_AS(TimeMesh({0.0, 1.0}, -0.1), std::invalid_argument);
  REQUIRE_NOTHROW(TimeMesh({0.0, 1.0}, 0.0));
}

TEST_CASE("graded mesh formula") {
  const auto mesh = TimeMesh::graded(1.0, 4, 2.0, 0.2);
  REQUIRE(mesh.levels() == 4);
  REQUIRE(mesh.node(0) == 0.0);
  REQUIRE(mesh.node(1) == 1.0 / 16.0);
  REQUIRE(mesh.node(2) == 0.25);
  REQUIRE(mesh.node(3) == 9.0 / 16.0);
  REQUIRE(mesh.node(4) == 1.0);
  REQUIRE_THAT(mesh.rho(1), WithinRel(1.0 / 3.0, 1e-15));
  REQUIRE_THROWS_AS(TimeMesh::graded(1.0, 4, 0.9, 0.2),
                    std::invalid_argument);
}

TEST_CASE("graded mesh with unit grading is uniform") {
  const auto mesh = TimeMesh::graded(1.0, 4, 1.0, 0.2);
  for (int k = 0; k <= 4; ++k)
    REQUIRE_THAT(mesh.node(k), WithinAbs(0.25 * k, 1e-16));
  for (int k = 1; k <= 3; ++k) REQUIRE_THAT(mesh.rho(k), WithinRel(1.0, 1e-15));
}

TEST_CASE("graded step ratios never exceed one") {
  for (double gamma : {1.0, 2.0, 3.0, 5.0}) {
    const auto mesh = TimeMesh::graded(1.0, 40, gamma, 0.2);
    CAPTURE(gamma);
    REQUIRE(mesh.max_rho() <= 1.0 + 1e-13);
  }
}

TEST_CASE("two-part mesh splits as documented") {
  const auto mesh = TimeMesh::two_part(1.0, 8, 2.0, 0.2);
  // T0 = 2^-2 = 0.25, N0 = ceil(16/5) = 4, tail step (1-0.25)/4.
  REQUIRE_THAT(mesh.node(4), WithinAbs(0.25, 1e-16));
  REQUIRE_THAT(mesh.node(1), WithinAbs(0.25 / 16.0, 1e-16));
  for (int k = 5; k <= 8; ++k) {
    CAPTURE(k);
    REQUIRE_THAT(mesh.tau(k), WithinRel(0.1875, 1e-13));
  }
  REQUIRE(mesh.node(8) == 1.0);
}

TEST_CASE("two-part mesh with unit grading halves uniformly") {
  const auto mesh = TimeMesh::two_part(1.0, 8, 1.0, 0.2);
  REQUIRE_THAT(mesh.node(4), WithinAbs(0.5, 1e-16));
  for (int k = 1; k <= 8; ++k) {
    CAPTURE(k);
    REQUIRE_THAT(mesh.tau(k), WithinRel(0.125, 1e-13));
  }
}

TEST_CASE("two-part tail step dominates the last graded step") {
  for (double gamma : {1.0, 2.0, 2.5, 3.0, 5.0}) {
    for (int N : {8, 16, 64, 128, 512}) {
      CAPTURE(gamma, N);
      const auto mesh = TimeMesh::two_part(1.0, N, gamma, 0.2);
      // Locate the split: first node equal to 2^-gamma.
      const double T0 = std::pow(2.0, -gamma);
      int N0 = 0;
      for (int k = 1; k < N; ++k)
        if (std::abs(mesh.node(k) - T0) < 1e-14) N0 = k;
      REQUIRE(N0 > 0);
      REQUIRE(mesh.tau(N0 + 1) >= mesh.tau(N0));
    }
  }
}

TEST_CASE("two-part mesh rejects degenerate splits") {
  // A single level leaves no room for the uniform tail: N0 = ceil(N/2) = N.
  REQUIRE_THROWS_AS(TimeMesh::two_part(1.0, 1, 1.0, 0.2),
                    std::invalid_argument);
}

TEST_CASE("random admissible meshes honor their ratio bounds") {
  const auto mesh = TimeMesh::random_admissible(1.0, 16, 1.75, 1, 0.2);
  REQUIRE(mesh.levels() == 16);
  REQUIRE(mesh.node(16) == 1.0);
  for (int k = 1; k <= 15; ++k) {
    CAPTURE(k);
    REQUIRE(mesh.rho(k) >= 0.2 - 1e-12);
    REQUIRE(mesh.rho(k) <= 1.75 + 1e-12);
  }
  REQUIRE_THROWS_AS(TimeMesh::random_admissible(1.0, 16, 1.8, 1, 0.2),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(TimeMesh::random_admissible(1.0, 16, 0.1, 1, 0.2),
                    std::invalid_argument);
}

TEST_CASE("random admissible meshes are deterministic per seed") {
  const auto a = TimeMesh::random_admissible(1.0, 16, 1.75, 1, 0.2);
  const auto b = TimeMesh::random_admissible(1.0, 16, 1.75, 1, 0.2);
  REQUIRE(a.nodes() == b.nodes());
  const auto c = TimeMesh::random_admissible(1.0, 16, 1.75, 2, 0.2);
  REQUIRE(a.nodes() != c.nodes());
}

TEST_CASE("random admissible mesh with capped ratio gives equal steps") {
  // With the ratio clamped to at most 1 and the first draw above 1, the
  // two steps come out equal.
  const auto mesh = TimeMesh::random_admissible(1.0, 2, 1.0, 7, 0.2);
  REQUIRE_THAT(mesh.node(1), WithinRel(0.5, 1e-14));
  REQUIRE_THAT(mesh.tau(1), WithinRel(mesh.tau(2), 1e-14));
}

TEST_CASE("steps reconstruct the horizon") {
  for (double gamma : {1.0, 2.0, 3.0}) {
    const auto mesh = TimeMesh::graded(2.5, 33, gamma, 0.15);
    double total = 0.0;
    for (int k = 1; k <= mesh.levels(); ++k) total += mesh.tau(k);
    REQUIRE_THAT(total, WithinRel(mesh.horizon(), 1e-14));
  }
}

TEST_CASE("offset nodes interpolate between adjacent mesh nodes") {
  const auto mesh = TimeMesh::graded(1.0, 8, 2.0, 0.3);
  for (int n = 1; n <= 8; ++n) {
    CAPTURE(n);
    const double expected =
        0.3 * mesh.node(n - 1) + (1.0 - 0.3) * mesh.node(n);
    REQUIRE_THAT(mesh.offset_node(n), WithinRel(expected, 1e-15));
    REQUIRE(mesh.offset_node(n) > mesh.node(n - 1));
    REQUIRE(mesh.offset_node(n) <= mesh.node(n));
  }
}

TEST_CASE("offset-ratio condition checks") {
  const double alpha = 0.4;
  SECTION("graded mesh at the canonical offset passes") {
    const auto mesh = TimeMesh::graded(1.0, 64, 3.0, alpha / 2.0);
    const auto report = check_conditions(mesh, alpha, 3.0);
    REQUIRE(report.m1_ok);
    REQUIRE(report.theta_is_half_alpha);
    REQUIRE(report.rho_max <= 1.0 + 1e-15);
  }
  SECTION("wrong offset fails") {
    const auto mesh = TimeMesh::uniform(1.0, 16, 0.3);
    REQUIRE_FALSE(check_conditions(mesh, alpha, 1.0).m1_ok);
  }
  SECTION("oversized step ratio fails") {
    const auto mesh =
        TimeMesh({0.0, 0.1, 0.29, 0.39, 1.0}, alpha / 2.0);  // rho_2 = 1.9
    const auto report = check_conditions(mesh, alpha, 1.0);
    REQUIRE_FALSE(report.m1_ok);
    REQUIRE_THAT(report.rho_max, WithinRel(1.9, 1e-12));
  }
  SECTION("two-part mesh of moderate grading passes the ratio condition") {
    const auto mesh = TimeMesh::two_part(1.0, 64, 2.0, alpha / 2.0);
    REQUIRE(check_conditions(mesh, alpha, 2.0).m1_ok);
  }
}

TEST_CASE("graded-envelope condition reports a finite fitted constant") {
  for (double gamma : {1.0, 2.0, 3.0}) {
    CAPTURE(gamma);
    const auto mesh = TimeMesh::graded(1.0, 64, gamma, 0.2);
    const auto report = check_conditions(mesh, 0.4, gamma);
    REQUIRE(std::isfinite(report.fitted_constant));
    REQUIRE(report.fitted_constant > 0.0);
    REQUIRE(report.m2_ok == (report.fitted_constant <= report.ceiling));
    REQUIRE(report.m2_ok);  // graded meshes fit their own envelope easily
  }
}

TEST_CASE("mesh serialization round-trips bit-exactly") {
  const auto original = TimeMesh::random_admissible(1.0, 20, 1.75, 11, 0.21);
  std::stringstream buffer;
  save_mesh(original, buffer);
  const std::string text = buffer.str();
  REQUIRE(text.rfind("# theta=", 0) == 0);
  std::stringstream reread(text);
  const auto loaded = load_mesh(reread);
  REQUIRE(loaded.theta() == original.theta());
  REQUIRE(loaded.nodes() == original.nodes());
  REQUIRE(loaded.fingerprint() == original.fingerprint());
}

TEST_CASE("mesh loading tolerates comments and rejects malformed input") {
  {
    std::stringstream in("# a comment\n# theta=0.25\n0\n# mid\n0.5\n\n1\n");
    const auto mesh = load_mesh(in);
    REQUIRE(mesh.theta() == 0.25);
    REQUIRE(mesh.levels() == 2);
  }
  {
    std::stringstream in("0\n0.5\n1\n");  // nodes before the header
    REQUIRE_THROWS_AS(load_mesh(in), std::runtime_error);
  }
  {
    std::stringstream in("# theta=0.25\n0\nbogus\n1\n");
    REQUIRE_THROWS_AS(load_mesh(in), std::runtime_error);
  }
  {
    std::stringstream in("# theta=0.25\n0\n0.7\n0.5\n");  // not increasing
    REQUIRE_THROWS_AS(load_mesh(in), std::invalid_argument);
  }
}

TEST_CASE("fingerprint distinguishes meshes") {
  const auto a = TimeMesh::uniform(1.0, 8, 0.2);
  const auto b = TimeMesh::uniform(1.0, 8, 0.25);
  const auto c = TimeMesh::uniform(1.0, 9, 0.2);
  REQUIRE(a.fingerprint() != b.fingerprint());
  REQUIRE(a.fingerprint() != c.fingerprint());
  REQUIRE(a.fingerprint() == TimeMesh::uniform(1.0, 8, 0.2).fingerprint());
}
