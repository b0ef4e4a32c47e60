#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "leafpeel/edge_solvers.hpp"
#include "leafpeel/forward_data.hpp"
#include "leafpeel/metric_tree.hpp"

namespace leafpeel {

/// Value of a solution at the sheaf center and its derivative into the internal edge.
struct SpectralVertexTrace {
  cplx lambda{0.0};
  cplx u0{0.0};
  cplx du0{0.0};
  /// Largest disagreement between the center values delivered by the sheaf edges, relative.
  double residual = 0.0;
};

struct PeelSpectralOptions {
  TransferOptions transfer{1e-12};
  double consistency_tol = 1e-6;
  /// |u0| below this (relative to the Cauchy data) is a peel singularity.
  double singular_tol = 1e-10;
};

/// Integrates each sheaf edge from its boundary end, where u = values[k] and the
/// outward derivative is derivs[k], back to the center.
SpectralVertexTrace vertex_trace_spectral(const Sheaf& sheaf, const std::vector<cplx>& values,
                                          const std::vector<cplx>& derivs, cplx lambda,
                                          const PeelSpectralOptions& opt = {});

/// Trace of the solution equal to 1 at the first sheaf member, from row `members[0]` of M.
SpectralVertexTrace vertex_trace_spectral(const Sheaf& sheaf, const Eigen::MatrixXcd& M, cplx lambda,
                                          const PeelSpectralOptions& opt = {});

/// Reduced TW matrix of the peeled tree at one lambda. Rows follow peeled_order;
/// throws PeelSingularity when u(0) vanishes.
Eigen::MatrixXcd peel_tw(const Eigen::MatrixXcd& M, const Sheaf& sheaf, cplx lambda,
                         const PeelSpectralOptions& opt = {});

/// Samplewise peel. Singular samples are kept with valid = false.
TWMatrix peel_tw(const TWMatrix& M, const Sheaf& sheaf, const std::string& center_label,
                 const PeelSpectralOptions& opt = {});

}  // namespace leafpeel
