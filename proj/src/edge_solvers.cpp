#include "leafpeel/edge_solvers.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include <boost/numeric/odeint.hpp>

#include "leafpeel/error.hpp"

namespace leafpeel {

namespace {

namespace ode = boost::numeric::odeint;
using State = std::array<cplx, 4>;  // two columns of the fundamental matrix: (u, u')

Eigen::Matrix2cd constant_piece(cplx mu2, double d) {
  const cplx z = mu2 * d * d;
  cplx c, s;  // cos(mu d), sin(mu d) / mu
  if (std::abs(z) < 1e-3) {
    c = 1.0 - z / 2.0 + z * z / 24.0 - z * z * z / 720.0;
    s = d * (1.0 - z / 6.0 + z * z / 120.0 - z * z * z / 5040.0);
  } else {
    const cplx mu = std::sqrt(mu2);
    c = std::cos(mu * d);
    s = std::sin(mu * d) / mu;
  }
  Eigen::Matrix2cd m;
  m << c, s, -mu2 * s, c;
  return m;
}

Eigen::Matrix2cd linear_piece(double x0, double x1, double q0, double q1, cplx lambda, const TransferOptions& opt) {
  const double span = x1 - x0;
  auto rhs = [&](const State& y, State& dy, double x) {
    const double w = (x - x0) / span;
    const cplx k = (1.0 - w) * q0 + w * q1 - lambda;
    dy[0] = y[1];
    dy[1] = k * y[0];
    dy[2] = y[3];
    dy[3] = k * y[2];
  };
  State y{cplx(1.0), cplx(0.0), cplx(0.0), cplx(1.0)};
  auto stepper = ode::make_controlled<ode::runge_kutta_dopri5<State>>(opt.tol, opt.tol);
  double x = x0;
  double h = std::copysign(std::min(std::abs(span), 0.01), span);
  std::size_t steps = 0;
  while ((span > 0 && x < x1) || (span < 0 && x > x1)) {
    if ((span > 0 && x + h > x1) || (span < 0 && x + h < x1)) h = x1 - x;
    if (++steps > opt.max_steps) fail(ErrorCode::StepFailure, "transfer integration exceeded its step budget");
    if (std::abs(h) < 1e-14 * std::max(1.0, std::abs(x)))
      fail(ErrorCode::StepFailure, "step size underflow at x = " + std::to_string(x));
    if (stepper.try_step(rhs, y, x, h) == ode::fail) continue;
    for (const auto& v : y)
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
        fail(ErrorCode::StepFailure, "non-finite transfer solution");
  }
  Eigen::Matrix2cd m;
  m << y[0], y[2], y[1], y[3];
  return m;
}

// State map from x = a to x = b along one edge (either direction).
Eigen::Matrix2cd propagate(const PotentialProfile& q, cplx lambda, double a, double b, const TransferOptions& opt) {
  Eigen::Matrix2cd m = Eigen::Matrix2cd::Identity();
  if (a == b) return m;
  const double lo = std::min(a, b), hi = std::max(a, b);
  std::vector<double> cuts{lo};
  for (double c : q.breakpoints(hi + 1.0))
    if (c > lo && c < hi) cuts.push_back(c);
  cuts.push_back(hi);
  if (b < a) std::reverse(cuts.begin(), cuts.end());
  const bool sampled = !q.piecewise_constant();
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double x0 = cuts[k], x1 = cuts[k + 1];
    const double mid = 0.5 * (x0 + x1);
    Eigen::Matrix2cd piece = sampled ? linear_piece(x0, x1, q.value(x0), q.value(x1), lambda, opt)
                                     : constant_piece(lambda - q.value(mid), x1 - x0);
    m = piece * m;
  }
  return m;
}

CauchyPair map_pair(const Eigen::Matrix2cd& m, CauchyPair init) {
  return {m(0, 0) * init.u + m(0, 1) * init.du, m(1, 0) * init.u + m(1, 1) * init.du};
}

}  // namespace

Eigen::Matrix2cd transfer_matrix(double length, const PotentialProfile& q, cplx lambda, const TransferOptions& opt) {
  return propagate(q, lambda, 0.0, length, opt);
}

CauchyPair schrodinger_transfer(double length, const PotentialProfile& q, cplx lambda, Sweep sweep, CauchyPair init,
                                const TransferOptions& opt) {
  if (!(opt.tol > 0.0)) fail(ErrorCode::StepFailure, "tolerance must be positive");
  const double a = sweep == Sweep::Forward ? 0.0 : length;
  return map_pair(propagate(q, lambda, a, length - a, opt), init);
}

CauchyPair schrodinger_transfer(const Edge& edge, cplx lambda, Sweep sweep, CauchyPair init, const TransferOptions& opt) {
  return schrodinger_transfer(edge.length, edge.potential, lambda, sweep, init, opt);
}

std::vector<cplx> schrodinger_profile(double length, const PotentialProfile& q, cplx lambda, CauchyPair at_zero,
                                      const std::vector<double>& points, const TransferOptions& opt) {
  std::vector<cplx> out(points.size());
  std::vector<std::size_t> order(points.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](auto i, auto j) { return points[i] < points[j]; });
  CauchyPair cur = at_zero;
  double x = 0.0;
  for (auto k : order) {
    const double target = std::clamp(points[k], 0.0, length);
    cur = map_pair(propagate(q, lambda, x, target, opt), cur);
    x = target;
    out[k] = cur.u;
  }
  return out;
}

TraceBundle td_wave_solve(const MetricTree& tree, const std::vector<SampledFunction>& controls, double T, double dx,
                          const WaveOptions& opt) {
  const auto& boundary = tree.boundary();
  if (controls.size() != boundary.size())
    fail(ErrorCode::IncompatibleControl, "one control per boundary vertex is required");
  if (!(dx > 0.0)) fail(ErrorCode::CFLViolation, "dx must be positive");
  const double dt = controls.front().dt();
  const double sigma = dt / dx;
  if (sigma > 1.0 + 1e-12)
    fail(ErrorCode::CFLViolation, "dt / dx = " + std::to_string(sigma) + " exceeds 1");
  const auto steps = static_cast<std::size_t>(std::llround(T / dt));
  for (const auto& c : controls) {
    if (std::abs(c.dt() - dt) > 1e-12 * dt) fail(ErrorCode::IncompatibleControl, "controls use different steps");
    if (c.size() < steps + 1) fail(ErrorCode::HorizonTooShort, "control shorter than the time horizon");
    if (c[0] != 0.0) fail(ErrorCode::IncompatibleControl, "control must vanish at t = 0");
  }

  const auto& edges = tree.edges();
  const auto nv = tree.vertices().size();
  struct Grid {
    std::size_t cells;
    std::vector<double> q;  // node potentials
    std::vector<double> prev, cur, next;
  };
  std::vector<Grid> grid(edges.size());
  TraceBundle out;
  out.dt = dt;
  out.dx = dx;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto& edge = edges[e];
    auto& g = grid[e];
    g.cells = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(edge.length / dx)));
    out.length_rounding = std::max(out.length_rounding, std::abs(static_cast<double>(g.cells) * dx - edge.length));
    g.q.resize(g.cells + 1);
    for (std::size_t i = 0; i <= g.cells; ++i)
      g.q[i] = edge.potential.node_value(edge.length * static_cast<double>(i) / static_cast<double>(g.cells));
    g.q.front() = edge.potential.right_value(0.0);
    g.q.back() = edge.potential.left_value(edge.length);
    g.prev.assign(g.cells + 1, 0.0);
    g.cur = g.prev;
    g.next = g.prev;
  }
  std::vector<double> qbar(nv, 0.0);
  for (std::size_t v = 0; v < nv; ++v) {
    for (auto e : tree.incident(v)) qbar[v] += edges[e].from == v ? grid[e].q.front() : grid[e].q.back();
    qbar[v] /= static_cast<double>(tree.degree(v));
  }
  auto adjacent = [&](std::size_t e, std::size_t v) {
    const auto& g = grid[e];
    return edges[e].from == v ? g.cur[1] : g.cur[g.cells - 1];
  };

  std::vector<std::size_t> slot(nv, boundary.size());
  for (std::size_t k = 0; k < boundary.size(); ++k) slot[boundary[k]] = k;

  for (std::size_t k = 0; k < boundary.size(); ++k) {
    out.value.push_back(controls[k].truncated(steps + 1));
    out.deriv.push_back(SampledFunction::zeros(dt, steps + 1));
  }
  for (auto p : opt.probes) out.probe.emplace(p, SampledFunction::zeros(dt, steps + 1));

  std::vector<double> vprev(nv, 0.0), vcur(nv, 0.0), vnext(nv, 0.0);
  auto record = [&](std::size_t n) {
    for (std::size_t k = 0; k < boundary.size(); ++k) {
      const auto v = boundary[k];
      const auto e = tree.incident(v).front();
      const double qg = edges[e].from == v ? grid[e].q.front() : grid[e].q.back();
      const auto& f = controls[k];
      const double fm = n > 0 ? f[n - 1] : 0.0;
      const double fp = n + 1 < f.size() ? f[n + 1] : f[n];
      const double f2 = (fp - 2.0 * f[n] + fm) / (dt * dt);
      out.deriv[k][n] = (adjacent(e, v) - vcur[v]) / dx - 0.5 * dx * (f2 + qg * f[n]);
    }
    for (auto& [p, trace] : out.probe) trace[n] = vcur[p];
  };
  record(0);

  const double s2 = sigma * sigma;
  const double dt2 = dt * dt;
  for (std::size_t n = 0; n < steps; ++n) {
    for (auto& g : grid) {
      for (std::size_t i = 1; i < g.cells; ++i)
        g.next[i] = 2.0 * g.cur[i] - g.prev[i] + s2 * (g.cur[i + 1] - 2.0 * g.cur[i] + g.cur[i - 1]) -
                    dt2 * g.q[i] * g.cur[i];
    }
    for (std::size_t v = 0; v < nv; ++v) {
      if (slot[v] < boundary.size()) {
        vnext[v] = controls[slot[v]][n + 1];
        continue;
      }
      double flux = 0.0;
      for (auto e : tree.incident(v)) flux += adjacent(e, v) - vcur[v];
      vnext[v] = 2.0 * vcur[v] - vprev[v] + (2.0 * s2 / static_cast<double>(tree.degree(v))) * flux -
                 dt2 * qbar[v] * vcur[v];
    }
    for (std::size_t e = 0; e < edges.size(); ++e) {
      auto& g = grid[e];
      g.next.front() = vnext[edges[e].from];
      g.next.back() = vnext[edges[e].to];
    }
    if (opt.energy) {
      double energy = 0.0;
      for (auto& g : grid) {
        for (std::size_t i = 0; i <= g.cells; ++i) {
          const double w = (i == 0 || i == g.cells) ? 0.5 * dx : dx;
          const double ut = (g.next[i] - g.cur[i]) / dt;
          energy += 0.5 * w * (ut * ut + g.q[i] * g.next[i] * g.cur[i]);
        }
        for (std::size_t i = 0; i < g.cells; ++i)
          energy += 0.5 * (g.next[i + 1] - g.next[i]) * (g.cur[i + 1] - g.cur[i]) / dx;
      }
      out.energy.push_back(energy);
    }
    for (auto& g : grid) {
      std::swap(g.prev, g.cur);
      std::swap(g.cur, g.next);
    }
    std::swap(vprev, vcur);
    std::swap(vcur, vnext);
    record(n + 1);
  }
  return out;
}

SidewaysResult sideways_wave(const SheafEdge& edge, const DynFunction& far_value, const DynFunction& far_deriv) {
  const double h = far_value.dt();
  const double l = edge.length;
  const auto N = std::min(far_value.size(), far_deriv.size());
  const auto L = grid_index(l, h);
  if (L < 2) fail(ErrorCode::GridMismatch, "edge shorter than two samples");
  if (N == 0 || N <= L) fail(ErrorCode::HorizonTooShort, "data horizon shorter than the edge length");
  for (const auto& a : far_value.train.atoms())
    if (a.order != 0) fail(ErrorCode::GridMismatch, "value data may carry delta atoms only");

  // y = l - x runs from the data end (y = 0) to the near end (y = l).
  const PotentialProfile qy = edge.potential.reversed(l);
  const double Q = edge.potential.integral(0.0, l);

  // Singular part: split every event at the far end into waves moving toward
  // the near end (arrive at tau + l) and waves that left it at tau - l.
  struct Event {
    double f = 0, rho1 = 0, rho0 = 0, jump = 0;
  };
  std::map<std::size_t, Event> events;
  for (const auto& a : far_value.train.atoms()) events[grid_index(a.time, h)].f += a.coeff;
  for (const auto& a : far_deriv.train.atoms()) {
    auto& ev = events[grid_index(a.time, h)];
    (a.order == 1 ? ev.rho1 : ev.rho0) += a.coeff;
  }
  for (auto k : far_value.regular.jump_indices()) events[k].jump += far_value.regular.right(k) - far_value.regular.left(k);
  for (const auto& [k, left] : far_deriv.regular.breaks()) events[k];

  SidewaysResult res;
  res.valid = N - L;
  const std::size_t M = res.valid;
  std::map<std::size_t, double> value_jumps;
  std::vector<std::size_t> breaks;
  std::vector<Atom> vatoms, datoms;
  for (const auto& [k, ev] : events) {
    const double tau = static_cast<double>(k) * h;
    const double back = 0.5 * (ev.f + ev.rho1);   // left the near end at tau - l
    const double ahead = 0.5 * (ev.f - ev.rho1);  // reaches the near end at tau + l
    const double jb = 0.5 * (ev.jump + ev.rho0) + 0.5 * back * Q;
    const double ja = 0.5 * (ev.jump - ev.rho0) - 0.5 * ahead * Q;
    if (k >= L) {
      const auto m = k - L;
      vatoms.push_back({tau - l, back, 0});
      datoms.push_back({tau - l, -back, 1});
      datoms.push_back({tau - l, -jb, 0});
      value_jumps[m] += jb;
      breaks.push_back(m);
    }
    if (k + L < M) {
      const auto m = k + L;
      vatoms.push_back({tau + l, ahead, 0});
      datoms.push_back({tau + l, ahead, 1});
      datoms.push_back({tau + l, ja, 0});
      value_jumps[m] += ja;
      breaks.push_back(m);
    }
  }
  // Weak reflections off potential jumps reach the near end at tau +- (l - 2d).
  if (edge.potential.piecewise_constant()) {
    for (double d : edge.potential.breakpoints(l)) {
      const auto shift = static_cast<std::ptrdiff_t>(L) - 2 * static_cast<std::ptrdiff_t>(std::llround(d / h));
      for (const auto& [k, ev] : events)
        for (auto m : {static_cast<std::ptrdiff_t>(k) + shift, static_cast<std::ptrdiff_t>(k) - shift})
          if (m > 0 && m < static_cast<std::ptrdiff_t>(M)) breaks.push_back(static_cast<std::size_t>(m));
    }
  }
  const double eps_t = 1e-9 * h;
  res.value.train = SingularTrain(vatoms, eps_t, 0.0);
  res.deriv.train = SingularTrain(datoms, eps_t, 0.0);
  res.value.train = res.value.train.restricted(static_cast<double>(M - 1) * h + 0.5 * h);
  res.deriv.train = res.deriv.train.restricted(static_cast<double>(M - 1) * h + 0.5 * h);

  // Regular part: march the ramp image u * ramp in y on the characteristic grid.
  const SampledFunction GF = ramp_image({far_value.train, far_value.regular.truncated(N)});
  const SampledFunction GR = ramp_image({far_deriv.train, far_deriv.regular.truncated(N)});
  const SampledFunction P = cumulative_integral(GR);
  const std::size_t off = L + 3;  // room for t < 0
  const std::size_t width = off + N;
  auto at = [&](const SampledFunction& f, std::ptrdiff_t k) {
    if (k < 0) return 0.0;
    return f[static_cast<std::size_t>(std::min<std::ptrdiff_t>(k, static_cast<std::ptrdiff_t>(N) - 1))];
  };
  std::vector<double> prev(width, 0.0), cur(width, 0.0), next(width, 0.0);
  for (std::size_t i = 0; i < width; ++i) prev[i] = at(GF, static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(off));
  const double q0 = qy.right_value(0.0);
  for (std::size_t i = 1; i + 1 < width; ++i) {
    const auto k = static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(off);
    cur[i] = 0.5 * (at(GF, k + 1) + at(GF, k - 1)) + 0.5 * (at(P, k + 1) - at(P, k - 1)) + 0.5 * h * h * q0 * at(GF, k);
  }
  // Levels y = l - 2h .. l + 2h are kept for the derivative stencils.
  std::vector<std::vector<double>> keep(5);
  auto stash = [&](std::size_t level, const std::vector<double>& row) {
    if (level + 2 >= L && level <= L + 2) keep[level + 2 - L] = row;
  };
  stash(0, prev);
  stash(1, cur);
  for (std::size_t level = 1; level < L + 2; ++level) {
    const double y = static_cast<double>(level) * h;
    const double qv = y <= l ? qy.node_value(y) : qy.left_value(l);
    for (std::size_t i = 1; i + 1 < width; ++i) next[i] = cur[i + 1] + cur[i - 1] - prev[i] + h * h * qv * cur[i];
    next.front() = 0.0;
    next.back() = next[width - 2];
    std::swap(prev, cur);
    std::swap(cur, next);
    stash(level + 1, cur);
  }

  SampledFunction V = SampledFunction::zeros(h, M), D = SampledFunction::zeros(h, M);
  for (std::size_t m = 0; m < M; ++m) {
    const auto i = m + off;
    V[m] = keep[2][i];
    D[m] = -(keep[3][i] - keep[1][i]) / (2.0 * h);
  }
  res.value.regular = regular_from_ramp(V, res.value.train, breaks, value_jumps);
  res.deriv.regular = regular_from_ramp(D, res.deriv.train, breaks);
  return res;
}

}  // namespace leafpeel
