#include "leafpeel/fixtures.hpp"

namespace leafpeel::fixtures {

MetricTree three_star(double l1, double l2, double l3, const PotentialProfile& q) {
  std::vector<Vertex> v{{"c", false}, {"g1", true}, {"g2", true}, {"g3", true}};
  std::vector<Edge> e{{"e1", 0, 1, l1, q}, {"e2", 0, 2, l2, q}, {"e3", 0, 3, l3, q}};
  return MetricTree::build(std::move(v), std::move(e), {1, 2, 3}, 3);
}

MetricTree two_level(bool with_potential) {
  auto pick = [with_potential](PotentialProfile q) { return with_potential ? q : PotentialProfile::zero(); };
  std::vector<Vertex> v{{"g1", true}, {"g2", true}, {"va", false}, {"vb", false}, {"g3", true}, {"g4", true}};
  std::vector<Edge> e{
      {"e1", 2, 0, 1.0, pick(PotentialProfile::constant(1.0))},
      {"e2", 2, 1, 1.5, pick(PotentialProfile::piecewise({0.75}, {0.5, 1.5}))},
      {"e3", 2, 3, 1.0, pick(PotentialProfile::constant(0.8))},
      {"e4", 3, 4, 1.2, pick(PotentialProfile::piecewise({0.6}, {2.0, 1.0}))},
      {"e5", 3, 5, 1.3, pick(PotentialProfile::constant(0.5))},
  };
  return MetricTree::build(std::move(v), std::move(e), {0, 1, 4, 5}, 5);
}

MetricTree broom() {
  std::vector<Vertex> v{{"g1", true}, {"g2", true}, {"g3", true}, {"va", false}, {"w", false}, {"g4", true}};
  std::vector<Edge> e{{"e1", 3, 0, 1.0, {}}, {"e2", 3, 1, 1.25, {}}, {"e3", 3, 2, 0.75, {}},
                      {"e4", 3, 4, 1.5, {}}, {"e5", 4, 5, 0.5, {}}};
  return MetricTree::build(std::move(v), std::move(e), {0, 1, 2, 5}, 5);
}

MetricTree caterpillar() {
  std::vector<Vertex> v{{"s1", false}, {"s2", false}, {"s3", false}, {"g1", true},
                        {"g2", true},  {"g3", true},  {"g4", true},  {"g5", true}};
  std::vector<Edge> e{{"a1", 0, 1, 1.1, {}}, {"a2", 1, 2, 0.9, {}}, {"b1", 0, 3, 0.7, {}}, {"b2", 0, 4, 1.3, {}},
                      {"b3", 1, 5, 0.6, {}}, {"b4", 2, 6, 1.4, {}}, {"b5", 2, 7, 0.8, {}}};
  return MetricTree::build(std::move(v), std::move(e), {3, 4, 5, 6, 7}, 7);
}

}  // namespace leafpeel::fixtures
