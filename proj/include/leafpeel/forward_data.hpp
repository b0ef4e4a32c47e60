#pragma once

#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "leafpeel/edge_solvers.hpp"
#include "leafpeel/metric_tree.hpp"
#include "leafpeel/train.hpp"

namespace leafpeel {

/// TW matrix samples. Row/column k refers to labels[k].
struct TWMatrix {
  std::vector<std::string> labels;
  std::vector<cplx> lambdas;
  std::vector<Eigen::MatrixXcd> values;
  /// false where the sample could not be computed (e.g. a peel singularity).
  std::vector<bool> valid;
};

/// Full (reduced = false) or root-free (reduced = true) TW matrix at one lambda.
/// Entry (i, j) is the outward derivative at boundary j of the solution equal to 1 at i.
Eigen::MatrixXcd tw_matrix(const MetricTree& tree, cplx lambda, bool reduced, const TransferOptions& opt = {});

TWMatrix tw_samples(const MetricTree& tree, const std::vector<cplx>& lambdas, bool reduced,
                    const TransferOptions& opt = {});

/// Boundary labels in canonical (reduced: root removed) order.
std::vector<std::string> boundary_labels(const MetricTree& tree, bool reduced);

struct SpectralData {
  std::vector<double> eigenvalues;
  /// alpha[k][j] = (outward derivative of phi_k at boundary j) / sqrt(lambda_k), principal root.
  std::vector<std::vector<cplx>> alpha;
  std::vector<std::vector<double>> kappa;
};

struct SpectrumOptions {
  TransferOptions transfer{1e-12};
  /// Scan step in k = sqrt(lambda - min q) is pi / (steps_per_mode * total length).
  double steps_per_mode = 16.0;
  std::size_t quadrature_cells = 200;
};

SpectralData dirichlet_spectrum(const MetricTree& tree, double lambda_max, const SpectrumOptions& opt = {});

/// Smallest singular value of the Dirichlet system divided by the largest.
double dirichlet_conditioning(const MetricTree& tree, double lambda, const TransferOptions& opt = {});

struct RayOptions {
  double eps_t = 1e-9;
  double eps_c = 1e-14;
  std::size_t budget = 5'000'000;
};

/// Geometric-optics part of R_ij (boundary positions i, j in tree.boundary()) up to time T.
SingularTrain ray_singular_train(const MetricTree& tree, std::size_t i, std::size_t j, double T,
                                 const RayOptions& opt = {});

/// Arrival times at boundary j of fronts that were reflected once by a jump of
/// the potential. The regular part of R_ij may jump there.
std::vector<double> ray_break_times(const MetricTree& tree, std::size_t i, std::size_t j, double T,
                                    const RayOptions& opt = {});

/// Response kernels R_ij on [0, T] between the listed boundary positions.
struct ResponseMatrix {
  std::vector<std::string> labels;
  double dt = 0.0;
  double dx = 0.0;
  std::vector<std::vector<DynFunction>> entries;

  std::size_t size() const noexcept { return labels.size(); }
  const DynFunction& at(std::size_t i, std::size_t j) const { return entries[i][j]; }
  DynFunction& at(std::size_t i, std::size_t j) { return entries[i][j]; }
  std::size_t samples() const { return entries.empty() ? 0 : entries[0][0].size(); }
  double horizon() const { return dt * static_cast<double>(samples() - 1); }
};

struct ResponseOptions {
  RayOptions rays;
  bool reduced = true;
};

ResponseMatrix response_matrix(const MetricTree& tree, double T, double dx, const ResponseOptions& opt = {});

struct FourierValue {
  cplx value;
  double bound = 0.0;
};

/// int_0^T R(t) e^{ikt} dt with atoms transformed exactly; bound estimates the truncated tail.
FourierValue fourier_of_response(const DynFunction& entry, cplx k, double T);

}  // namespace leafpeel
