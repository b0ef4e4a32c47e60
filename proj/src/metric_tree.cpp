#include "leafpeel/metric_tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

#include "leafpeel/error.hpp"

namespace leafpeel {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// Index of the piece containing x, right-continuous.
std::size_t piece_index(const std::vector<double>& breakpoints, double x) {
  return static_cast<std::size_t>(std::upper_bound(breakpoints.begin(), breakpoints.end(), x) -
                                  breakpoints.begin());
}

double sampled_eval(const PotentialProfile::Sampled& s, double x) {
  const auto n = s.values.size();
  if (n == 1) return s.values[0];
  double pos = x / s.step;
  if (pos <= 0.0) return s.values.front();
  if (pos >= static_cast<double>(n - 1)) return s.values.back();
  const auto k = static_cast<std::size_t>(std::floor(pos));
  const double w = pos - static_cast<double>(k);
  return (1.0 - w) * s.values[k] + w * s.values[k + 1];
}

// Integral of the piecewise-linear interpolant from 0 to x.
double sampled_primitive(const PotentialProfile::Sampled& s, double x) {
  const auto n = s.values.size();
  if (n == 1) return s.values[0] * x;
  double acc = 0.0;
  double pos = std::clamp(x / s.step, 0.0, static_cast<double>(n - 1));
  const auto full = static_cast<std::size_t>(std::floor(pos));
  for (std::size_t k = 0; k < full; ++k) acc += 0.5 * (s.values[k] + s.values[k + 1]) * s.step;
  if (full < n - 1) {
    const double w = pos - static_cast<double>(full);
    const double mid = (1.0 - w) * s.values[full] + w * s.values[full + 1];
    acc += 0.5 * (s.values[full] + mid) * w * s.step;
  }
  return acc;
}

}  // namespace

PotentialProfile PotentialProfile::piecewise(std::vector<double> breakpoints, std::vector<double> values) {
  if (values.size() != breakpoints.size() + 1)
    fail(ErrorCode::InvalidTree, "piecewise potential needs one more value than breakpoints");
  for (std::size_t k = 1; k < breakpoints.size(); ++k)
    if (!(breakpoints[k] > breakpoints[k - 1]))
      fail(ErrorCode::InvalidTree, "piecewise potential breakpoints must increase");
  return PotentialProfile(PiecewiseConstant{std::move(breakpoints), std::move(values)});
}

PotentialProfile PotentialProfile::sampled(double step, std::vector<double> values) {
  if (!(step > 0.0) || values.empty()) fail(ErrorCode::InvalidTree, "sampled potential needs step > 0 and samples");
  return PotentialProfile(Sampled{step, std::move(values)});
}

double PotentialProfile::right_value(double x) const {
  return std::visit(overloaded{[](const Zero&) { return 0.0; },
                               [](const Constant& c) { return c.value; },
                               [x](const PiecewiseConstant& p) { return p.values[piece_index(p.breakpoints, x)]; },
                               [x](const Sampled& s) { return sampled_eval(s, x); }},
                    rep_);
}

double PotentialProfile::left_value(double x) const {
  if (const auto* p = std::get_if<PiecewiseConstant>(&rep_)) {
    auto idx = static_cast<std::size_t>(std::lower_bound(p->breakpoints.begin(), p->breakpoints.end(), x) -
                                        p->breakpoints.begin());
    return p->values[idx];
  }
  return right_value(x);
}

double PotentialProfile::integral(double a, double b) const {
  return std::visit(overloaded{[](const Zero&) { return 0.0; },
                               [a, b](const Constant& c) { return c.value * (b - a); },
                               [a, b](const PiecewiseConstant& p) {
                                 auto primitive = [&p](double x) {
                                   double acc = 0.0, prev = 0.0;
                                   std::size_t k = 0;
                                   for (; k < p.breakpoints.size() && p.breakpoints[k] < x; ++k) {
                                     acc += p.values[k] * (p.breakpoints[k] - prev);
                                     prev = p.breakpoints[k];
                                   }
                                   return acc + p.values[k] * (x - prev);
                                 };
                                 return primitive(b) - primitive(a);
                               },
                               [a, b](const Sampled& s) { return sampled_primitive(s, b) - sampled_primitive(s, a); }},
                    rep_);
}

std::vector<double> PotentialProfile::breakpoints(double length) const {
  std::vector<double> out;
  if (const auto* p = std::get_if<PiecewiseConstant>(&rep_)) {
    for (double b : p->breakpoints)
      if (b > 0.0 && b < length) out.push_back(b);
  } else if (const auto* s = std::get_if<Sampled>(&rep_)) {
    for (std::size_t k = 1; k + 1 < s->values.size(); ++k) out.push_back(static_cast<double>(k) * s->step);
  }
  return out;
}

bool PotentialProfile::piecewise_constant() const noexcept { return !std::holds_alternative<Sampled>(rep_); }

bool PotentialProfile::is_zero() const noexcept {
  if (std::holds_alternative<Zero>(rep_)) return true;
  if (const auto* c = std::get_if<Constant>(&rep_)) return c->value == 0.0;
  return false;
}

PotentialProfile PotentialProfile::reversed(double length) const {
  return std::visit(overloaded{[](const Zero& z) { return PotentialProfile(z); },
                               [](const Constant& c) { return PotentialProfile(c); },
                               [length](const PiecewiseConstant& p) {
                                 PiecewiseConstant r;
                                 for (auto it = p.breakpoints.rbegin(); it != p.breakpoints.rend(); ++it)
                                   r.breakpoints.push_back(length - *it);
                                 r.values.assign(p.values.rbegin(), p.values.rend());
                                 return PotentialProfile(std::move(r));
                               },
                               [](const Sampled& s) {
                                 Sampled r{s.step, std::vector<double>(s.values.rbegin(), s.values.rend())};
                                 return PotentialProfile(std::move(r));
                               }},
                    rep_);
}

void PotentialProfile::check_covers(double length) const {
  if (const auto* s = std::get_if<Sampled>(&rep_)) {
    const double span = s->step * static_cast<double>(s->values.size() - 1);
    if (std::abs(span - length) > 1e-9 * std::max(1.0, length))
      fail(ErrorCode::InvalidTree, "sampled potential covers [0, " + std::to_string(span) +
                                       "] but the edge has length " + std::to_string(length));
  }
  if (const auto* p = std::get_if<PiecewiseConstant>(&rep_)) {
    for (double b : p->breakpoints)
      if (!(b > 0.0 && b < length)) fail(ErrorCode::InvalidTree, "potential breakpoint outside the edge");
  }
}

double PotentialProfile::min_value(double /*length*/) const {
  return std::visit(overloaded{[](const Zero&) { return 0.0; }, [](const Constant& c) { return c.value; },
                               [](const PiecewiseConstant& p) { return *std::min_element(p.values.begin(), p.values.end()); },
                               [](const Sampled& s) { return *std::min_element(s.values.begin(), s.values.end()); }},
                    rep_);
}

double PotentialProfile::max_abs(double /*length*/) const {
  return std::visit(overloaded{[](const Zero&) { return 0.0; }, [](const Constant& c) { return std::abs(c.value); },
                               [](const auto& v) {
                                 double m = 0.0;
                                 for (double x : v.values) m = std::max(m, std::abs(x));
                                 return m;
                               }},
                    rep_);
}

bool PotentialProfile::operator==(const PotentialProfile& other) const {
  if (rep_.index() != other.rep_.index()) return false;
  return std::visit(overloaded{[](const Zero&) { return true; },
                               [&other](const Constant& c) { return c.value == std::get<Constant>(other.rep_).value; },
                               [&other](const PiecewiseConstant& p) {
                                 const auto& o = std::get<PiecewiseConstant>(other.rep_);
                                 return p.breakpoints == o.breakpoints && p.values == o.values;
                               },
                               [&other](const Sampled& s) {
                                 const auto& o = std::get<Sampled>(other.rep_);
                                 return s.step == o.step && s.values == o.values;
                               }},
                    rep_);
}

double Sheaf::max_length() const {
  double m = 0.0;
  for (const auto& e : edges) m = std::max(m, e.length);
  return m;
}

std::vector<std::optional<std::size_t>> peeled_order(std::size_t reduced_size,
                                                     const std::vector<std::size_t>& members) {
  const std::size_t first = *std::min_element(members.begin(), members.end());
  std::vector<std::optional<std::size_t>> out;
  for (std::size_t k = 0; k < reduced_size; ++k) {
    if (k == first) {
      out.emplace_back(std::nullopt);
    } else if (std::find(members.begin(), members.end(), k) == members.end()) {
      out.emplace_back(k);
    }
  }
  return out;
}

void validate(const std::vector<Vertex>& vertices, const std::vector<Edge>& edges,
              const std::vector<std::size_t>& boundary, std::size_t root) {
  const std::size_t nv = vertices.size();
  if (edges.empty()) fail(ErrorCode::InvalidTree, "a tree needs at least one edge");
  for (const auto& e : edges) {
    if (e.from >= nv || e.to >= nv) fail(ErrorCode::UnknownVertex, "edge " + e.label + " references a missing vertex");
    if (e.from == e.to) fail(ErrorCode::CycleDetected, "edge " + e.label + " is a loop");
    if (!(e.length > 0.0) || !std::isfinite(e.length))
      fail(ErrorCode::NonPositiveLength, "edge " + e.label + " has length " + std::to_string(e.length));
    e.potential.check_covers(e.length);
  }
  if (edges.size() + 1 > nv) fail(ErrorCode::CycleDetected, "|E| = " + std::to_string(edges.size()) +
                                                                 " but |V| = " + std::to_string(nv));
  if (edges.size() + 1 < nv) fail(ErrorCode::Disconnected, "|V| exceeds |E| + 1");

  std::vector<std::vector<std::size_t>> adj(nv);
  for (const auto& e : edges) {
    adj[e.from].push_back(e.to);
    adj[e.to].push_back(e.from);
  }
  std::vector<bool> seen(nv, false);
  std::queue<std::size_t> todo;
  todo.push(0);
  seen[0] = true;
  std::size_t reached = 1;
  while (!todo.empty()) {
    auto v = todo.front();
    todo.pop();
    for (auto w : adj[v])
      if (!seen[w]) {
        seen[w] = true;
        ++reached;
        todo.push(w);
      }
  }
  // |V| = |E| + 1 and connected implies acyclic; if not connected there is a cycle elsewhere.
  if (reached != nv) fail(ErrorCode::CycleDetected, "edge set contains a cycle and leaves vertices unreachable");

  std::vector<bool> in_boundary(nv, false);
  for (auto b : boundary) {
    if (b >= nv) fail(ErrorCode::UnknownVertex, "boundary list references a missing vertex");
    if (in_boundary[b]) fail(ErrorCode::InvalidTree, "boundary vertex listed twice: " + vertices[b].label);
    in_boundary[b] = true;
  }
  for (std::size_t v = 0; v < nv; ++v) {
    const auto deg = adj[v].size();
    if (vertices[v].boundary != in_boundary[v])
      fail(ErrorCode::InvalidTree, "boundary flag of " + vertices[v].label + " disagrees with the boundary list");
    if (vertices[v].boundary && deg != 1)
      fail(ErrorCode::InvalidTree, "boundary vertex " + vertices[v].label + " has degree " + std::to_string(deg));
    if (!vertices[v].boundary && deg < 2)
      fail(ErrorCode::InvalidTree, "internal vertex " + vertices[v].label + " has degree " + std::to_string(deg));
  }
  if (root >= nv || !in_boundary[root]) fail(ErrorCode::RootNotBoundary, "root must be a boundary vertex");
}

MetricTree MetricTree::build(std::vector<Vertex> vertices, std::vector<Edge> edges, std::vector<std::size_t> boundary,
                             std::size_t root) {
  validate(vertices, edges, boundary, root);
  MetricTree t;
  t.vertices_ = std::move(vertices);
  t.edges_ = std::move(edges);
  t.boundary_ = std::move(boundary);
  t.root_ = root;
  t.incidence_.assign(t.vertices_.size(), {});
  for (std::size_t k = 0; k < t.edges_.size(); ++k) {
    t.incidence_[t.edges_[k].from].push_back(k);
    t.incidence_[t.edges_[k].to].push_back(k);
  }
  return t;
}

std::vector<std::size_t> MetricTree::reduced_boundary() const {
  std::vector<std::size_t> out;
  for (auto b : boundary_)
    if (b != root_) out.push_back(b);
  return out;
}

std::optional<std::size_t> MetricTree::reduced_position(std::size_t vertex) const {
  std::size_t pos = 0;
  for (auto b : boundary_) {
    if (b == root_) continue;
    if (b == vertex) return pos;
    ++pos;
  }
  return std::nullopt;
}

std::size_t MetricTree::other_end(std::size_t edge, std::size_t vertex) const {
  const auto& e = edges_.at(edge);
  return e.from == vertex ? e.to : e.from;
}

std::optional<std::size_t> MetricTree::find_vertex(const std::string& label) const {
  for (std::size_t k = 0; k < vertices_.size(); ++k)
    if (vertices_[k].label == label) return k;
  return std::nullopt;
}

double MetricTree::total_length() const {
  double acc = 0.0;
  for (const auto& e : edges_) acc += e.length;
  return acc;
}

std::vector<std::size_t> path_edges(const MetricTree& tree, std::size_t a, std::size_t b) {
  const auto nv = tree.vertices().size();
  if (a >= nv || b >= nv) fail(ErrorCode::UnknownVertex, "vertex id out of range");
  constexpr auto none = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> via(nv, none);
  std::vector<bool> seen(nv, false);
  std::queue<std::size_t> todo;
  todo.push(a);
  seen[a] = true;
  while (!todo.empty()) {
    auto v = todo.front();
    todo.pop();
    if (v == b) break;
    for (auto e : tree.incident(v)) {
      auto w = tree.other_end(e, v);
      if (!seen[w]) {
        seen[w] = true;
        via[w] = e;
        todo.push(w);
      }
    }
  }
  std::vector<std::size_t> out;
  for (auto v = b; v != a;) {
    auto e = via[v];
    out.push_back(e);
    v = tree.other_end(e, v);
  }
  std::reverse(out.begin(), out.end());
  return out;
}

double path_distance(const MetricTree& tree, std::size_t a, std::size_t b) {
  double d = 0.0;
  for (auto e : path_edges(tree, a, b)) d += tree.edges()[e].length;
  return d;
}

std::vector<Sheaf> enumerate_sheaves(const MetricTree& tree) {
  std::vector<Sheaf> out;
  const auto& verts = tree.vertices();
  for (std::size_t v = 0; v < verts.size(); ++v) {
    if (verts[v].boundary) continue;
    std::vector<std::size_t> leaf_edges;
    std::vector<std::size_t> other;
    for (auto e : tree.incident(v)) {
      auto w = tree.other_end(e, v);
      if (verts[w].boundary && w != tree.root())
        leaf_edges.push_back(e);
      else
        other.push_back(e);
    }
    if (other.size() != 1 || leaf_edges.empty()) continue;

    // Order members by their reduced boundary position.
    std::vector<std::pair<std::size_t, std::size_t>> ranked;  // (position, edge)
    for (auto e : leaf_edges) ranked.emplace_back(*tree.reduced_position(tree.other_end(e, v)), e);
    std::sort(ranked.begin(), ranked.end());

    Sheaf s;
    s.center = v;
    s.internal_edge = other.front();
    for (auto [pos, e] : ranked) {
      const auto& edge = tree.edges()[e];
      s.members.push_back(pos);
      s.member_vertices.push_back(tree.other_end(e, v));
      s.boundary_edges.push_back(e);
      s.edges.push_back(SheafEdge{edge.length, edge.from == v ? edge.potential : edge.potential.reversed(edge.length)});
    }
    out.push_back(std::move(s));
  }
  return out;
}

MetricTree peel(const MetricTree& tree, const Sheaf& sheaf) {
  const auto sheaves = enumerate_sheaves(tree);
  const bool known = sheaf.center && std::any_of(sheaves.begin(), sheaves.end(), [&](const Sheaf& s) {
                       return s.center == sheaf.center && s.members == sheaf.members;
                     });
  if (!known) fail(ErrorCode::NotASheaf, "the given vertex set is not a sheaf of this tree");
  const std::size_t center = *sheaf.center;

  std::vector<bool> drop_vertex(tree.vertices().size(), false);
  for (auto v : sheaf.member_vertices) drop_vertex[v] = true;
  std::vector<bool> drop_edge(tree.edges().size(), false);
  for (auto e : sheaf.boundary_edges) drop_edge[e] = true;

  std::vector<std::size_t> remap(tree.vertices().size(), 0);
  std::vector<Vertex> vertices;
  for (std::size_t v = 0; v < tree.vertices().size(); ++v) {
    if (drop_vertex[v]) continue;
    remap[v] = vertices.size();
    Vertex copy = tree.vertices()[v];
    if (v == center) copy.boundary = true;
    vertices.push_back(std::move(copy));
  }
  std::vector<Edge> edges;
  for (std::size_t e = 0; e < tree.edges().size(); ++e) {
    if (drop_edge[e]) continue;
    Edge copy = tree.edges()[e];
    copy.from = remap[copy.from];
    copy.to = remap[copy.to];
    edges.push_back(std::move(copy));
  }
  std::vector<std::size_t> boundary;
  bool placed = false;
  for (auto b : tree.boundary()) {
    if (drop_vertex[b]) {
      if (!placed) {
        boundary.push_back(remap[center]);
        placed = true;
      }
      continue;
    }
    boundary.push_back(remap[b]);
  }
  return MetricTree::build(std::move(vertices), std::move(edges), std::move(boundary), remap[tree.root()]);
}

MetricTree single_edge_tree(double length, const PotentialProfile& q) {
  std::vector<Vertex> v{{"a", true}, {"b", true}};
  std::vector<Edge> e{{"e", 0, 1, length, q}};
  return MetricTree::build(std::move(v), std::move(e), {0, 1}, 1);
}

}  // namespace leafpeel
