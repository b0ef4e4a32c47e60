#include <algorithm>
#include <cmath>
#include <limits>

#include "doctest.h"
#include "leafpeel/error.hpp"
#include "leafpeel/fixtures.hpp"
#include "leafpeel/metric_tree.hpp"

using namespace leafpeel;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidTree;
}

// All-pairs distances by Floyd-Warshall over the raw edge list.
std::vector<std::vector<double>> floyd(const MetricTree& t) {
  const auto n = t.vertices().size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> d(n, std::vector<double>(n, inf));
  for (std::size_t i = 0; i < n; ++i) d[i][i] = 0.0;
  for (const auto& e : t.edges()) d[e.from][e.to] = d[e.to][e.from] = e.length;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
  return d;
}

}  // namespace

TEST_CASE("validate accepts the small fixtures") {
  CHECK_NOTHROW(fixtures::three_star(1, 2, 3));
  CHECK_NOTHROW(single_edge_tree(1.0, PotentialProfile::zero()));
  CHECK_NOTHROW(fixtures::two_level(true));
  CHECK_NOTHROW(fixtures::caterpillar());
}

TEST_CASE("validate rejects broken trees") {
  std::vector<Vertex> tri{{"a", false}, {"b", false}, {"c", false}};
  std::vector<Edge> tri_e{{"x", 0, 1, 1, {}}, {"y", 1, 2, 1, {}}, {"z", 2, 0, 1, {}}};
  CHECK(code_of([&] { MetricTree::build(tri, tri_e, {}, 0); }) == ErrorCode::CycleDetected);

  std::vector<Vertex> four{{"a", true}, {"b", true}, {"c", true}, {"d", true}};
  std::vector<Edge> two{{"x", 0, 1, 1, {}}, {"y", 2, 3, 1, {}}};
  CHECK(code_of([&] { MetricTree::build(four, two, {0, 1, 2, 3}, 3); }) == ErrorCode::Disconnected);

  std::vector<Vertex> pair{{"a", true}, {"b", true}};
  CHECK(code_of([&] { MetricTree::build(pair, {{"x", 0, 1, 0.0, {}}}, {0, 1}, 1); }) ==
        ErrorCode::NonPositiveLength);
  CHECK(code_of([&] { MetricTree::build(pair, {{"x", 0, 1, -1.0, {}}}, {0, 1}, 1); }) ==
        ErrorCode::NonPositiveLength);

  std::vector<Vertex> star{{"c", false}, {"a", true}, {"b", true}, {"d", true}};
  std::vector<Edge> se{{"x", 0, 1, 1, {}}, {"y", 0, 2, 1, {}}, {"z", 0, 3, 1, {}}};
  CHECK(code_of([&] { MetricTree::build(star, se, {1, 2, 3}, 0); }) == ErrorCode::RootNotBoundary);
}

TEST_CASE("path_distance") {
  auto t = fixtures::three_star(1, 2, 3);
  CHECK(path_distance(t, 1, 2) == doctest::Approx(3.0));
  CHECK(path_distance(t, 2, 2) == 0.0);
  CHECK(code_of([&] { path_distance(t, 0, 9); }) == ErrorCode::UnknownVertex);

  auto c = fixtures::caterpillar();
  auto d = floyd(c);
  for (std::size_t a = 0; a < c.vertices().size(); ++a)
    for (std::size_t b = 0; b < c.vertices().size(); ++b) CHECK(path_distance(c, a, b) == doctest::Approx(d[a][b]));
  auto g1 = *c.find_vertex("g1"), g5 = *c.find_vertex("g5");
  CHECK(path_distance(c, g1, g5) == doctest::Approx(0.7 + 1.1 + 0.9 + 0.8));
}

TEST_CASE("enumerate_sheaves") {
  auto star = fixtures::three_star(1, 2, 3);
  auto s = enumerate_sheaves(star);
  REQUIRE(s.size() == 1);
  CHECK(s[0].members == std::vector<std::size_t>{0, 1});
  CHECK(*s[0].internal_edge == 2);
  CHECK(enumerate_sheaves(single_edge_tree(1.0, {})).empty());

  // Exhaustive check: a vertex is a sheaf center iff all but one neighbour is a non-root leaf.
  auto cat = fixtures::caterpillar();
  auto found = enumerate_sheaves(cat);
  std::vector<std::size_t> expected;
  for (std::size_t v = 0; v < cat.vertices().size(); ++v) {
    if (cat.vertices()[v].boundary) continue;
    std::size_t leaves = 0;
    for (auto e : cat.incident(v)) {
      auto w = cat.other_end(e, v);
      leaves += cat.vertices()[w].boundary && w != cat.root();
    }
    if (leaves + 1 == cat.degree(v)) expected.push_back(v);
  }
  REQUIRE(found.size() == expected.size());
  for (std::size_t k = 0; k < found.size(); ++k) CHECK(*found[k].center == expected[k]);
  CHECK(cat.vertices()[expected.front()].label == "s1");
}

TEST_CASE("sheaf edges are oriented away from the center") {
  auto t = fixtures::two_level(true);
  auto s = enumerate_sheaves(t);
  REQUIRE(s.size() == 1);
  CHECK(s[0].edges[1].length == 1.5);
  CHECK(s[0].edges[1].potential.value(0.1) == 0.5);
  CHECK(s[0].edges[1].potential.value(1.4) == 1.5);

  // Flip e2 and the sheaf data must not change.
  std::vector<Edge> flipped = t.edges();
  std::swap(flipped[1].from, flipped[1].to);
  flipped[1].potential = flipped[1].potential.reversed(1.5);
  auto t2 = MetricTree::build(t.vertices(), flipped, t.boundary(), t.root());
  auto s2 = enumerate_sheaves(t2);
  CHECK(s2[0].edges[1].potential == s[0].edges[1].potential);
}

TEST_CASE("peel") {
  auto star = fixtures::three_star(1, 2, 3);
  auto p = peel(star, enumerate_sheaves(star)[0]);
  CHECK(p.edges().size() == 1);
  REQUIRE(p.boundary().size() == 2);
  CHECK(p.vertices()[p.boundary()[0]].label == "c");
  CHECK(p.vertices()[p.root()].label == "g3");

  auto tl = fixtures::two_level(false);
  auto p1 = peel(tl, enumerate_sheaves(tl)[0]);
  CHECK(p1.edges().size() == 3);
  CHECK(p1.boundary().size() == 3);
  CHECK(p1.vertices()[p1.boundary()[0]].label == "va");
  auto p2 = peel(p1, enumerate_sheaves(p1)[0]);
  CHECK(p2.edges().size() == 1);
  CHECK(p2.edges()[0].length == 1.3);
  CHECK(p2.vertices()[p2.root()].label == "g4");

  auto br = fixtures::broom();
  auto b1 = peel(br, enumerate_sheaves(br)[0]);
  CHECK(b1.edges().size() == 2);
  CHECK(b1.boundary().size() == 2);
  auto b2 = peel(b1, enumerate_sheaves(b1)[0]);
  CHECK(b2.edges().size() == 1);

  Sheaf bogus;
  bogus.center = 0;
  bogus.members = {0};
  CHECK(code_of([&] { peel(tl, bogus); }) == ErrorCode::NotASheaf);
}

TEST_CASE("peel preserves counts and validity") {
  for (auto t : {fixtures::three_star(1, 2, 3), fixtures::two_level(true), fixtures::broom(), fixtures::caterpillar()}) {
    for (const auto& s : enumerate_sheaves(t)) {
      auto p = peel(t, s);
      CHECK(p.edges().size() == t.edges().size() - s.size());
      CHECK(p.boundary().size() == t.boundary().size() - s.size() + 1);
    }
  }
}

TEST_CASE("potential profiles") {
  auto q = PotentialProfile::piecewise({0.5}, {1.0, 3.0});
  CHECK(q.integral(0.0, 1.0) == doctest::Approx(2.0));
  CHECK(q.integral(0.25, 0.75) == doctest::Approx(1.0));
  CHECK(q.node_value(0.5) == doctest::Approx(2.0));
  CHECK(q.reversed(1.0).value(0.2) == 3.0);
  auto s = PotentialProfile::sampled(0.5, {0.0, 1.0, 0.0});
  CHECK(s.integral(0.0, 1.0) == doctest::Approx(0.5));
  CHECK(s.value(0.25) == doctest::Approx(0.5));
  CHECK_THROWS_AS(single_edge_tree(2.0, s), Error);
}
