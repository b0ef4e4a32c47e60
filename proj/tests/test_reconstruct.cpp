#include <cmath>
#include <map>
#include <numbers>
#include <set>

#include "doctest.h"
#include "leafpeel/error.hpp"
#include "leafpeel/fixtures.hpp"
#include "leafpeel/reconstruct.hpp"

using namespace leafpeel;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::InvalidTree;
}

// Each edge is identified by the boundary labels cut off from the root by it.
struct Split {
  std::set<std::string> below;
  double length;
  PotentialProfile q;  // x = 0 at the end away from the root
};

std::map<std::set<std::string>, Split> splits(const MetricTree& t) {
  std::map<std::set<std::string>, Split> out;
  const auto root = t.root();
  for (std::size_t e = 0; e < t.edges().size(); ++e) {
    const auto& edge = t.edges()[e];
    const bool from_far = path_distance(t, edge.from, root) > path_distance(t, edge.to, root);
    const std::size_t far = from_far ? edge.from : edge.to;
    std::set<std::string> below;
    std::vector<std::size_t> stack{far};
    std::set<std::size_t> seen{far, t.other_end(e, far)};
    while (!stack.empty()) {
      auto v = stack.back();
      stack.pop_back();
      if (t.vertices()[v].boundary) below.insert(t.vertices()[v].label);
      for (auto f : t.incident(v)) {
        auto w = t.other_end(f, v);
        if (seen.insert(w).second) stack.push_back(w);
      }
    }
    out[below] = {below, edge.length, from_far ? edge.potential : edge.potential.reversed(edge.length)};
  }
  return out;
}

double l2_diff(const PotentialProfile& a, const PotentialProfile& b, double l, double* ref = nullptr) {
  double num = 0.0, den = 0.0;
  const int n = 2000;
  for (int k = 0; k < n; ++k) {
    const double x = l * (k + 0.5) / n;
    num += std::pow(a.value(x) - b.value(x), 2);
    den += std::pow(b.value(x), 2);
  }
  if (ref) *ref = std::sqrt(den / n);
  return std::sqrt(num / n);
}

}  // namespace

TEST_CASE("boundary edge lengths") {
  ResponseMatrix R;
  R.labels = {"a"};
  R.dt = R.dx = 0.1;
  R.entries = {{DynFunction{SingularTrain({{0.0, -1.0, 1}, {2.4, -0.5, 1}, {3.0, 0.2, 0}}), SampledFunction::zeros(0.1, 41)}}};
  auto l = boundary_edge_lengths(R);
  REQUIRE(l.size() == 1);
  CHECK(l[0] == doctest::Approx(1.2));

  auto star = fixtures::three_star(1, 2, 3);
  auto full = response_matrix(star, 6.5, 0.01, {{}, false});
  auto ls = boundary_edge_lengths(full);
  REQUIRE(ls.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(ls[i] == doctest::Approx(static_cast<double>(i + 1)).epsilon(1e-9));

  auto short_data = response_matrix(star, 3.0, 0.01);
  CHECK(code_of([&] { boundary_edge_lengths(short_data); }) == ErrorCode::NoReflection);
}

TEST_CASE("potential on a boundary edge") {
  ReconstructOptions opt;
  auto recover = [&](const PotentialProfile& q, double dx) {
    auto R = response_matrix(single_edge_tree(1.0, q), 2.2, dx, {{}, false});
    return potential_on_edge(R.at(0, 0), 1.0, opt);
  };
  SUBCASE("zero") {
    auto p = recover(PotentialProfile::zero(), 0.01);
    double sup = 0.0;
    for (int k = 0; k <= 100; ++k) sup = std::max(sup, std::abs(p.q.value(k / 100.0)));
    CHECK(sup <= 1e-3);
    CHECK(p.residual < 1e-6);
  }
  SUBCASE("constant") {
    auto q = PotentialProfile::constant(1.0);
    auto p = recover(q, 0.01);
    double ref = 0.0;
    const double err = l2_diff(p.q, q, 1.0, &ref);
    CHECK(err <= 0.01 * ref);
  }
  SUBCASE("sin(pi x)") {
    std::vector<double> v(1001);
    for (int k = 0; k <= 1000; ++k) v[k] = std::sin(std::numbers::pi * k / 1000.0);
    auto q = PotentialProfile::sampled(0.001, v);
    auto p = recover(q, 0.01);
    double ref = 0.0;
    const double err = l2_diff(p.q, q, 1.0, &ref);
    CHECK(err <= 0.05 * ref);
    // Second order in the grid step.
    auto fine = recover(q, 0.005);
    CHECK(l2_diff(fine.q, q, 1.0) < 0.3 * l2_diff(p.q, q, 1.0));
  }
  SUBCASE("piecewise constant") {
    auto q = PotentialProfile::piecewise({0.6}, {2.0, 1.0});
    auto p = recover(q, 0.005);
    double ref = 0.0;
    const double err = l2_diff(p.q, q, 1.0, &ref);
    CHECK(err <= 0.05 * ref);
  }
  SUBCASE("failures") {
    auto R = response_matrix(single_edge_tree(1.0, PotentialProfile::constant(1.0)), 2.2, 0.01, {{}, false});
    auto entry = R.at(0, 0);
    CHECK(code_of([&] { potential_on_edge(entry, 1.5, opt); }) == ErrorCode::HorizonTooShort);
    entry.regular *= 400.0;
    CHECK(code_of([&] { potential_on_edge(entry, 1.0, opt); }) == ErrorCode::IllConditioned);
  }
}

TEST_CASE("pre-sheaf groups") {
  SUBCASE("three-star") {
    auto R = response_matrix(fixtures::three_star(1, 2, 3), 4.0, 0.01);
    auto groups = presheaf_groups(R, boundary_edge_lengths(R));
    REQUIRE(groups.size() == 1);
    CHECK(groups[0].members == std::vector<std::size_t>{0, 1});
    CHECK(groups[0].degree == 3);
    CHECK(groups[0].sheaf);
  }
  SUBCASE("two-level tree") {
    auto R = response_matrix(fixtures::two_level(true), 4.0, 0.01);
    auto groups = presheaf_groups(R, boundary_edge_lengths(R));
    REQUIRE(groups.size() == 2);
    CHECK(groups[0].members == std::vector<std::size_t>{0, 1});
    CHECK(groups[0].sheaf);
    CHECK(groups[1].members == std::vector<std::size_t>{2});
    CHECK(groups[1].degree == 3);
    CHECK_FALSE(groups[1].sheaf);
  }
  SUBCASE("broom and caterpillar") {
    auto Rb = response_matrix(fixtures::broom(), 4.0, 0.01);
    auto gb = presheaf_groups(Rb, boundary_edge_lengths(Rb));
    REQUIRE(gb.size() == 1);
    CHECK(gb[0].degree == 4);
    CHECK(gb[0].sheaf);
    auto Rc = response_matrix(fixtures::caterpillar(), 4.0, 0.01);
    auto gc = presheaf_groups(Rc, boundary_edge_lengths(Rc));
    REQUIRE(gc.size() == 3);
    // g1 and g3 sit on different spine vertices: their first arrival passes a spine edge.
    CHECK(Rc.at(0, 2).train.atoms().front().time > 0.7 + 0.6 + 1.0);
    for (const auto& g : gc) CHECK(g.degree == 3);
  }
  SUBCASE("failures") {
    auto R = response_matrix(fixtures::three_star(1, 2, 3), 4.0, 0.01);
    auto l = boundary_edge_lengths(R);
    auto shifted = l;
    shifted[0] += 5e-6;
    CHECK(code_of([&] { presheaf_groups(R, shifted); }) == ErrorCode::AmbiguousGrouping);
    auto tampered = R;
    for (auto* e : {&tampered.at(0, 1), &tampered.at(1, 0)}) {
      std::vector<Atom> atoms = e->train.atoms();
      for (auto& a : atoms)
        if (a.order == 1) a.coeff *= 1.1;
      e->train = SingularTrain(atoms);
    }
    CHECK(code_of([&] { presheaf_groups(tampered, l); }) == ErrorCode::NonIntegerDegree);
  }
}

TEST_CASE("reconstruct the three-star") {
  auto star = fixtures::three_star(1, 2, 3);
  auto R = response_matrix(star, 10.0, 0.01);
  auto rt = reconstruct_tree(R, "g3");
  CHECK(rt.stages == 2);
  auto want = splits(star), got = splits(rt.tree);
  REQUIRE(got.size() == want.size());
  for (const auto& [key, s] : want) {
    REQUIRE(got.count(key) == 1);
    CHECK(std::abs(got.at(key).length - s.length) < 1e-6);
    CHECK(got.at(key).q.max_abs(s.length) < 1e-3);
  }
}

TEST_CASE("reconstruct the two-level tree with potential") {
  auto tree = fixtures::two_level(true);
  auto R = response_matrix(tree, 8.0, 0.005);
  auto rt = reconstruct_tree(R, "g4");
  CHECK(rt.stages == 3);
  auto want = splits(tree), got = splits(rt.tree);
  REQUIRE(got.size() == want.size());
  for (const auto& [key, s] : want) {
    REQUIRE(got.count(key) == 1);
    const auto& g = got.at(key);
    CHECK(std::abs(g.length - s.length) <= 1e-3);
    double ref = 0.0;
    const double err = l2_diff(g.q, s.q, s.length, &ref);
    CHECK(err <= 0.05 * ref);
  }
  for (const auto& e : rt.edges) {
    CHECK(e.length_residual < 1e-6);
    CHECK(e.potential_residual < 0.05);
  }
}

TEST_CASE("reconstruct the caterpillar") {
  auto tree = fixtures::caterpillar();
  auto rt = reconstruct_tree(response_matrix(tree, 8.0, 0.01), "g5");
  CHECK(rt.stages == 4);
  auto want = splits(tree), got = splits(rt.tree);
  REQUIRE(got.size() == want.size());
  for (const auto& [key, s] : want) {
    REQUIRE(got.count(key) == 1);
    CHECK(std::abs(got.at(key).length - s.length) < 1e-6);
  }
}

TEST_CASE("a degree-two vertex without potential is invisible") {
  // The broom handle va - w - g4 comes back as one edge of length 2.
  auto rt = reconstruct_tree(response_matrix(fixtures::broom(), 8.0, 0.01), "g4");
  CHECK(rt.stages == 2);
  CHECK(rt.tree.edges().size() == 4);
  auto got = splits(rt.tree);
  REQUIRE(got.count({"g1", "g2", "g3"}) == 1);
  CHECK(got.at({"g1", "g2", "g3"}).length == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(got.at({"g2"}).length == doctest::Approx(1.25).epsilon(1e-9));
}

TEST_CASE("reconstruct failure modes") {
  auto tree = fixtures::two_level(true);
  auto R = response_matrix(tree, 7.2, 0.005);
  try {
    reconstruct_tree(R, "g4");
    FAIL("expected WindowEmpty");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::WindowEmpty);
    CHECK(std::string(e.what()).find("stage 3") != std::string::npos);
  }
  // g1 and g3 alone: neither vertex has all but one edge on the boundary.
  auto full = response_matrix(tree, 4.0, 0.01);
  ResponseMatrix sub;
  sub.labels = {full.labels[0], full.labels[2]};
  sub.dt = full.dt;
  sub.dx = full.dx;
  sub.entries = {{full.at(0, 0), full.at(0, 2)}, {full.at(2, 0), full.at(2, 2)}};
  CHECK(code_of([&] { reconstruct_tree(sub); }) == ErrorCode::NoCertifiedSheaf);
}
