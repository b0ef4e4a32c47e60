#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "leafpeel/error.hpp"
#include "leafpeel/forward_data.hpp"
#include "leafpeel/metric_tree.hpp"
#include "leafpeel/train.hpp"

namespace leafpeel {

/// Traces at the sheaf center: a = u(0, t), A = derivative into the internal edge.
struct DynVertexTrace {
  DynFunction a;
  DynFunction A;
  /// Number of valid samples of both traces.
  std::size_t valid = 0;
  /// Largest disagreement between the center values delivered by the sheaf edges.
  double residual = 0.0;
  /// Largest |sample| removed by gating R_1i before l_1 + l_i (source row only).
  double gated = 0.0;
};

struct PeelDynamicalOptions {
  double eps_t = 1e-9;
  double eps_c = 1e-12;
  /// Jumps of a~ below this (relative to its leading atom) are treated as noise.
  double jump_tol = 1e-8;
  /// Relative tolerance on the center-continuity residual.
  double consistency_tol = 1e-3;
};

/// Trace of the solution driven by delta at sheaf member `source` (an index into
/// sheaf.members); `row[k]` is R_{source, members[k]}.
DynVertexTrace vertex_trace_dynamical(const Sheaf& sheaf, std::size_t source, const std::vector<DynFunction>& row,
                                      const PeelDynamicalOptions& opt = {});

/// Trace of a solution vanishing on every sheaf boundary vertex, with outward derivatives `row`.
DynVertexTrace vertex_trace_dynamical(const Sheaf& sheaf, const std::vector<DynFunction>& row,
                                      const PeelDynamicalOptions& opt = {});

template <class S>
struct TimedCoeff {
  double time = 0.0;
  S coeff{};
};

template <class S>
struct Deconvolution {
  /// Recovered pairs (phi_l at zeta_l), strictly increasing in time.
  std::vector<TimedCoeff<S>> pairs;
  /// N_p: input atoms consumed once pair p is fixed; m_p = N_p - N_{p-1}
  /// (zero when the pair is forced by a cancellation).
  std::vector<std::size_t> consumed;
  std::vector<std::size_t> per_pair;
};

/// Product train sum_l sum_k phi_l psi_k at zeta_l + kappa_k, merged by time.
template <class S>
std::vector<TimedCoeff<S>> train_product(const std::vector<TimedCoeff<S>>& a, const std::vector<TimedCoeff<S>>& b,
                                         double eps_t, const S& eps_c) {
  std::vector<TimedCoeff<S>> raw;
  for (const auto& x : a)
    for (const auto& y : b) raw.push_back({x.time + y.time, x.coeff * y.coeff});
  std::stable_sort(raw.begin(), raw.end(), [](const auto& p, const auto& q) { return p.time < q.time; });
  std::vector<TimedCoeff<S>> out;
  for (const auto& r : raw) {
    if (!out.empty() && std::abs(r.time - out.back().time) <= eps_t)
      out.back().coeff += r.coeff;
    else
      out.push_back(r);
  }
  using std::abs;
  std::erase_if(out, [&](const auto& p) { return abs(p.coeff) <= eps_c; });
  return out;
}

/// Solves sum alpha_n delta(t - beta_n) = (sum phi_l delta(t - zeta_l)) * (sum psi_k delta(t - kappa_k))
/// for the pairs (phi, zeta), in time order, up to t_max (on the alpha side).
template <class S>
Deconvolution<S> singular_deconvolve(const std::vector<TimedCoeff<S>>& alpha, const std::vector<TimedCoeff<S>>& psi,
                                     std::size_t p_max, double eps_t, const S& eps_c,
                                     double t_max = std::numeric_limits<double>::infinity()) {
  using std::abs;
  if (psi.empty() || abs(psi.front().coeff) <= eps_c)
    fail(ErrorCode::LeadingAmplitudeZero, "leading amplitude of the vertex trace vanishes");
  for (std::size_t k = 1; k < psi.size(); ++k)
    if (!(psi[k].time > psi[k - 1].time + eps_t)) fail(ErrorCode::InconsistentTrains, "psi train not increasing");
  for (std::size_t k = 1; k < alpha.size(); ++k)
    if (!(alpha[k].time > alpha[k - 1].time + eps_t)) fail(ErrorCode::InconsistentTrains, "alpha train not increasing");

  const double kappa1 = psi.front().time;
  const S psi1 = psi.front().coeff;
  Deconvolution<S> out;
  // Contributions of the recovered pairs not yet matched against alpha.
  std::vector<TimedCoeff<S>> pending;
  std::size_t n = 0, since = 0;
  while (out.pairs.size() < p_max) {
    double t = std::numeric_limits<double>::infinity();
    if (n < alpha.size()) t = alpha[n].time;
    for (const auto& c : pending) t = std::min(t, c.time);
    if (std::isinf(t) || !(t <= t_max + eps_t)) break;
    S residual{};
    std::size_t used = 0;
    if (n < alpha.size() && alpha[n].time <= t + eps_t) {
      residual = alpha[n].coeff;
      used = 1;
    }
    for (auto& c : pending)
      if (c.time <= t + eps_t) residual -= c.coeff;
    std::erase_if(pending, [&](const auto& c) { return c.time <= t + eps_t; });
    n += used;
    since += used;
    if (abs(residual) <= eps_c) continue;
    const double zeta = t - kappa1;
    if (zeta < -eps_t) fail(ErrorCode::InconsistentTrains, "response atom precedes the first vertex arrival");
    out.pairs.push_back({std::max(zeta, 0.0), residual / psi1});
    out.consumed.push_back(n);
    out.per_pair.push_back(since);
    since = 0;
    for (std::size_t k = 1; k < psi.size(); ++k) pending.push_back({out.pairs.back().time + psi[k].time, out.pairs.back().coeff * psi[k].coeff});
  }
  return out;
}

/// Global forward march for x in
///   sum_k psi_k x(s + kappa_1 - kappa_k) + int_0^s x(tau) a~(s + kappa_1 - tau) dtau = B(s + kappa_1)
/// on n samples. `psi` holds the delta atoms of the vertex trace, `a_reg` its regular part.
SampledFunction volterra_march(const SampledFunction& B, const SingularTrain& psi, const SampledFunction& a_reg,
                               std::size_t n);

/// Same equation solved interval by interval (width = smallest gap of psi), each
/// interval as one lower-triangular system.
SampledFunction volterra_by_intervals(const SampledFunction& B, const SingularTrain& psi,
                                      const SampledFunction& a_reg, std::size_t n);

/// Regular part of x from y = x * a once the train of x is known.
SampledFunction volterra_peel_regular(const SampledFunction& r_in, const DynFunction& a, const SingularTrain& x_train,
                                      std::size_t n, const PeelDynamicalOptions& opt = {});

/// Full deconvolution y = x * a on n samples (train then regular part).
DynFunction deconvolve_response(const DynFunction& y, const DynFunction& a, std::size_t n,
                                const PeelDynamicalOptions& opt = {});

struct PeeledResponse {
  ResponseMatrix matrix;
  /// T' = T - l_source - max l_k.
  double window = 0.0;
  std::size_t source = 0;
  double residual = 0.0;
  /// Largest |R~_i0 - R~_0i| on the regular parts.
  double asymmetry = 0.0;
};

PeeledResponse peel_response(const ResponseMatrix& R, const Sheaf& sheaf, const std::string& center_label,
                             const PeelDynamicalOptions& opt = {});

}  // namespace leafpeel
