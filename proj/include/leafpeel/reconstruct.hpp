#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "leafpeel/forward_data.hpp"
#include "leafpeel/metric_tree.hpp"
#include "leafpeel/peel_dynamical.hpp"

namespace leafpeel {

struct ReconstructOptions {
  /// Arrival times closer than this are identified.
  double eps_t = 1e-6;
  /// Atoms below this (relative to the largest in the entry) are ignored.
  double eps_c = 1e-3;
  /// Inferred degrees must lie this close to an integer.
  double degree_tol = 1e-3;
  /// Layer stripping gives up when the front amplitude ratio leaves [1/cond_max, cond_max].
  double cond_max = 1e3;
  /// Recovered potentials with sup |q| below this are reported as zero.
  double q_zero = 1e-6;
  /// Re-simulate recovered potentials and report the kernel misfit.
  bool residuals = true;
  PeelDynamicalOptions dynamical;
};

/// l_i = half the time of the first positive-time atom of R_ii.
std::vector<double> boundary_edge_lengths(const ResponseMatrix& R, const ReconstructOptions& opt = {});

struct EdgePotential {
  PotentialProfile q;
  /// Relative L2 misfit of the regular part on (0, 2l) after re-simulation (0 when not computed).
  double residual = 0.0;
  /// Spread of the normalized front amplitude during the march.
  double condition = 1.0;
};

/// q on the edge (x = 0 at the boundary vertex) from R_ii restricted to t < 2l.
EdgePotential potential_on_edge(const DynFunction& entry, double length, const ReconstructOptions& opt = {});

struct PreSheafGroup {
  std::vector<std::size_t> members;
  std::size_t degree = 0;
  bool sheaf = false;
};

std::vector<PreSheafGroup> presheaf_groups(const ResponseMatrix& R, const std::vector<double>& lengths,
                                           const ReconstructOptions& opt = {});

/// First certified sheaf of R with edge geometry recovered from the diagonal entries.
Sheaf detect_sheaf(const ResponseMatrix& R, const ReconstructOptions& opt = {});

struct RecoveredEdge {
  std::string from;  // vertex at x = 0 (the boundary side when recovered)
  std::string to;
  double length = 0.0;
  PotentialProfile potential;
  std::size_t stage = 0;
  double length_residual = 0.0;
  double potential_residual = 0.0;
};

struct RecoveredTree {
  MetricTree tree;
  std::vector<RecoveredEdge> edges;
  std::size_t stages = 0;
};

/// Reduced response data in, tree with the given root label out.
RecoveredTree reconstruct_tree(const ResponseMatrix& R, const std::string& root_label = "root",
                               const ReconstructOptions& opt = {});

}  // namespace leafpeel
