#include <cmath>
#include <numbers>

#include "doctest.h"
#include "leafpeel/error.hpp"
#include "leafpeel/fixtures.hpp"
#include "leafpeel/forward_data.hpp"
#include "leafpeel/peel_spectral.hpp"

using namespace leafpeel;
using std::numbers::pi;

namespace {

const std::vector<cplx> grid{cplx(-3.0), cplx(-0.7), cplx(0.4, 0.3), cplx(2.3, -0.5), cplx(7.1, 1.0)};

double rel_err(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

void check_oracle(const MetricTree& tree, double tol) {
  for (const auto& sheaf : enumerate_sheaves(tree)) {
    auto peeled = peel(tree, sheaf);
    for (auto lam : grid) {
      auto M = tw_matrix(tree, lam, true, {1e-12});
      auto got = peel_tw(M, sheaf, lam);
      auto want = tw_matrix(peeled, lam, true, {1e-12});
      REQUIRE(got.rows() == want.rows());
      CHECK(rel_err(got, want) < tol);
    }
  }
}

}  // namespace

TEST_CASE("vertex trace of the 3-star matches the closed-form solution") {
  const double l[3] = {1, 2, 3};
  auto star = fixtures::three_star(l[0], l[1], l[2]);
  auto sheaf = enumerate_sheaves(star).at(0);
  for (auto lam : grid) {
    const cplx k = std::sqrt(lam);
    cplx cot_sum = 0.0;
    for (double li : l) cot_sum += std::cos(k * li) / std::sin(k * li);
    const cplx u0 = 1.0 / (std::sin(k * l[0]) * cot_sum);
    const cplx du0 = -k * u0 * std::cos(k * l[2]) / std::sin(k * l[2]);
    auto tr = vertex_trace_spectral(sheaf, tw_matrix(star, lam, true), lam);
    CHECK(std::abs(tr.u0 - u0) < 1e-9 * std::max(1.0, std::abs(u0)));
    CHECK(std::abs(tr.du0 - du0) < 1e-9 * std::max(1.0, std::abs(du0)));
    CHECK(tr.residual < 1e-8);
  }
}

TEST_CASE("vertex trace through a chain vertex") {
  // Path a - v - b, root b: the unique sheaf is v with member a; u'' = u below.
  std::vector<Vertex> v{{"a", true}, {"v", false}, {"b", true}};
  std::vector<Edge> e{{"e1", 1, 0, 1.0, {}}, {"e2", 1, 2, 0.5, {}}};
  auto path = MetricTree::build(v, e, {0, 2}, 2);
  auto sheaf = enumerate_sheaves(path).at(0);
  auto tr = vertex_trace_spectral(sheaf, tw_matrix(path, -1.0, true), -1.0);
  // psi = sinh(1.5 - s) / sinh(1.5) with s the distance from a.
  CHECK(std::abs(tr.u0 - std::sinh(0.5) / std::sinh(1.5)) < 1e-10);
  CHECK(std::abs(tr.du0 + std::cosh(0.5) / std::sinh(1.5)) < 1e-10);
}

TEST_CASE("peel_tw agrees with the tw matrix of the peeled tree") {
  check_oracle(fixtures::three_star(1, 2, 3), 1e-8);
  check_oracle(fixtures::two_level(true), 1e-8);
  check_oracle(fixtures::broom(), 1e-8);
  check_oracle(fixtures::caterpillar(), 1e-8);
}

TEST_CASE("peeled matrix stays symmetric at real lambda") {
  auto tl = fixtures::two_level(true);
  for (const auto& sheaf : enumerate_sheaves(tl)) {
    auto P = peel_tw(tw_matrix(tl, -0.7, true, {1e-12}), sheaf, -0.7);
    CHECK((P - P.transpose()).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("peel singularity at a sheaf Dirichlet eigenvalue") {
  auto star = fixtures::three_star(1, 2, 3);
  auto sheaf = enumerate_sheaves(star).at(0);
  const double lam = pi * pi / 4;  // sin(k * 2) = 0 on the second leg
  CHECK_THROWS_AS(peel_tw(tw_matrix(star, lam, true), sheaf, lam), Error);

  auto samples = tw_samples(star, {cplx(-1.0), cplx(lam)}, true);
  auto out = peel_tw(samples, sheaf, "c");
  REQUIRE(out.valid.size() == 2);
  CHECK(out.valid[0]);
  CHECK(!out.valid[1]);
  CHECK(out.labels == std::vector<std::string>{"c"});
}

TEST_CASE("wrong sheaf data is reported") {
  auto star = fixtures::three_star(1, 2, 3);
  auto sheaf = enumerate_sheaves(star).at(0);
  sheaf.edges[1].length = 2.3;
  try {
    peel_tw(tw_matrix(star, -1.0, true), sheaf, -1.0);
    FAIL("expected ConsistencyFailure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConsistencyFailure);
  }
}
