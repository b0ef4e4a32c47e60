#pragma once

#include <complex>
#include <cstddef>
#include <map>
#include <vector>

#include <Eigen/Core>

#include "leafpeel/metric_tree.hpp"
#include "leafpeel/sampled.hpp"
#include "leafpeel/train.hpp"

namespace leafpeel {

using cplx = std::complex<double>;

/// Value and d/dx (edge-local coordinate) of a solution at a point.
struct CauchyPair {
  cplx u{0.0};
  cplx du{0.0};
};

enum class Sweep { Forward, Backward };  // 0 -> l, l -> 0

struct TransferOptions {
  double tol = 1e-10;
  std::size_t max_steps = 1'000'000;
};

/// [u(l), u'(l)]^T = T [u(0), u'(0)]^T for -u'' + q u = lambda u.
/// Closed form on constant pieces, adaptive Dormand-Prince on sampled ones.
Eigen::Matrix2cd transfer_matrix(double length, const PotentialProfile& q, cplx lambda,
                                 const TransferOptions& opt = {});

CauchyPair schrodinger_transfer(double length, const PotentialProfile& q, cplx lambda, Sweep sweep,
                                CauchyPair init, const TransferOptions& opt = {});
CauchyPair schrodinger_transfer(const Edge& edge, cplx lambda, Sweep sweep, CauchyPair init,
                                const TransferOptions& opt = {});

/// Solution values along the edge at `points` (local coordinate) from Cauchy data at x = 0.
std::vector<cplx> schrodinger_profile(double length, const PotentialProfile& q, cplx lambda, CauchyPair at_zero,
                                      const std::vector<double>& points, const TransferOptions& opt = {});

struct WaveOptions {
  /// Internal vertices whose value traces should be recorded.
  std::vector<std::size_t> probes;
  bool energy = false;
};

/// Boundary traces of the wave equation on a tree. Index k of `value`/`deriv`
/// follows tree.boundary(). Derivatives point into the incident edge.
struct TraceBundle {
  double dt = 0.0;
  double dx = 0.0;
  std::vector<SampledFunction> value;
  std::vector<SampledFunction> deriv;
  std::map<std::size_t, SampledFunction> probe;
  /// Discrete energy after each step (empty unless requested).
  std::vector<double> energy;
  /// Largest |n_e dx - l_e| over edges.
  double length_rounding = 0.0;
};

/// Leapfrog on every edge with Kirchhoff vertex updates. The step is the controls' dt.
TraceBundle td_wave_solve(const MetricTree& tree, const std::vector<SampledFunction>& controls, double T, double dx,
                          const WaveOptions& opt = {});

struct SidewaysResult {
  DynFunction value;  // u at the near end (x = 0)
  DynFunction deriv;  // d/dx at x = 0, i.e. into the edge
  std::size_t valid = 0;
};

/// Cauchy problem in space: from u and its outward derivative at x = l (the far
/// end) to the traces at x = 0. Output covers [0, T - l].
SidewaysResult sideways_wave(const SheafEdge& edge, const DynFunction& far_value, const DynFunction& far_deriv);

}  // namespace leafpeel
