#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace leafpeel {

/// Potential q restricted to one edge, in the edge's local coordinate x in [0, l].
///
/// Piecewise-constant profiles are right-continuous; `node_value` averages the
/// one-sided limits so that grid schemes see the midpoint value at a jump.
class PotentialProfile {
 public:
  struct Zero {};
  struct Constant {
    double value = 0.0;
  };
  struct PiecewiseConstant {
    std::vector<double> breakpoints;  // interior, strictly increasing
    std::vector<double> values;       // breakpoints.size() + 1 entries
  };
  struct Sampled {
    double step = 0.0;
    std::vector<double> values;  // nodes x_k = k * step, linear in between
  };
  using Representation = std::variant<Zero, Constant, PiecewiseConstant, Sampled>;

  PotentialProfile() = default;
  explicit PotentialProfile(Representation rep) : rep_(std::move(rep)) {}

  static PotentialProfile zero() { return PotentialProfile(Zero{}); }
  static PotentialProfile constant(double c) { return PotentialProfile(Constant{c}); }
  static PotentialProfile piecewise(std::vector<double> breakpoints, std::vector<double> values);
  static PotentialProfile sampled(double step, std::vector<double> values);

  const Representation& representation() const noexcept { return rep_; }

  double right_value(double x) const;
  double left_value(double x) const;
  double value(double x) const { return right_value(x); }
  double node_value(double x) const { return 0.5 * (left_value(x) + right_value(x)); }

  /// Integral of q over [a, b] (exact for every representation).
  double integral(double a, double b) const;

  /// Points in (0, length) where q is not smooth (jumps or sample nodes).
  std::vector<double> breakpoints(double length) const;
  bool piecewise_constant() const noexcept;
  bool is_zero() const noexcept;

  /// Same potential expressed in the flipped coordinate x' = length - x.
  PotentialProfile reversed(double length) const;

  /// Sampled representations must cover [0, length] exactly.
  void check_covers(double length) const;

  double min_value(double length) const;
  double max_abs(double length) const;

  bool operator==(const PotentialProfile& other) const;

 private:
  Representation rep_{Zero{}};
};

struct Vertex {
  std::string label;
  bool boundary = false;
};

struct Edge {
  std::string label;
  std::size_t from = 0;  // x = 0
  std::size_t to = 0;    // x = length
  double length = 0.0;
  PotentialProfile potential;
};

/// A boundary edge of a sheaf, expressed with x = 0 at the sheaf's internal
/// vertex and x = length at the boundary vertex.
struct SheafEdge {
  double length = 0.0;
  PotentialProfile potential;
};

/// Internal vertex whose incident edges are all non-root boundary edges except one.
///
/// `members` are positions in the reduced boundary order (root excluded); the
/// vertex / edge ids are only meaningful when the sheaf came from a MetricTree.
struct Sheaf {
  std::vector<std::size_t> members;
  std::vector<SheafEdge> edges;
  std::optional<std::size_t> center;
  std::vector<std::size_t> member_vertices;
  std::vector<std::size_t> boundary_edges;
  std::optional<std::size_t> internal_edge;

  std::size_t size() const noexcept { return members.size(); }
  double max_length() const;
};

/// Peeled boundary order: entry k gives the old reduced position feeding new
/// position k, or nullopt for the new boundary vertex that replaces the sheaf.
std::vector<std::optional<std::size_t>> peeled_order(std::size_t reduced_size,
                                                     const std::vector<std::size_t>& members);

class MetricTree {
 public:
  /// Builds and validates. `boundary` lists every boundary vertex (root included)
  /// in canonical order.
  static MetricTree build(std::vector<Vertex> vertices, std::vector<Edge> edges,
                          std::vector<std::size_t> boundary, std::size_t root);

  const std::vector<Vertex>& vertices() const noexcept { return vertices_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const std::vector<std::size_t>& boundary() const noexcept { return boundary_; }
  std::size_t root() const noexcept { return root_; }

  /// Boundary vertices without the root, in canonical order.
  std::vector<std::size_t> reduced_boundary() const;
  /// Position of a boundary vertex in the reduced order.
  std::optional<std::size_t> reduced_position(std::size_t vertex) const;

  std::size_t degree(std::size_t vertex) const { return incidence_.at(vertex).size(); }
  /// Incident edge ids of a vertex.
  const std::vector<std::size_t>& incident(std::size_t vertex) const { return incidence_.at(vertex); }
  std::size_t other_end(std::size_t edge, std::size_t vertex) const;
  std::optional<std::size_t> find_vertex(const std::string& label) const;

  double total_length() const;

 private:
  std::vector<Vertex> vertices_;
  std::vector<Edge> edges_;
  std::vector<std::size_t> boundary_;
  std::size_t root_ = 0;
  std::vector<std::vector<std::size_t>> incidence_;
};

/// Checks every tree invariant and throws the matching ErrorCode on violation.
void validate(const std::vector<Vertex>& vertices, const std::vector<Edge>& edges,
              const std::vector<std::size_t>& boundary, std::size_t root);

double path_distance(const MetricTree& tree, std::size_t a, std::size_t b);
/// Edge ids along the unique path from a to b, in order.
std::vector<std::size_t> path_edges(const MetricTree& tree, std::size_t a, std::size_t b);

std::vector<Sheaf> enumerate_sheaves(const MetricTree& tree);

/// Removes the sheaf's boundary edges; the sheaf center becomes a boundary
/// vertex in the slot of the first removed member.
MetricTree peel(const MetricTree& tree, const Sheaf& sheaf);

/// Interval [0, length] with both ends grounded, labelled "a" (root "b").
MetricTree single_edge_tree(double length, const PotentialProfile& q);

}  // namespace leafpeel
