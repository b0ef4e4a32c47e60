#include "leafpeel/peel_dynamical.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <Eigen/Dense>

#include "leafpeel/edge_solvers.hpp"

namespace leafpeel {

namespace {

DynFunction truncate(const DynFunction& f, std::size_t n) {
  const double t_max = f.dt() * (static_cast<double>(n) - 0.5);
  return {f.train.restricted(t_max), f.regular.truncated(n)};
}

/// A jump on the last sample cannot be resolved from the data; keep its left limit.
DynFunction truncate_resolved(const DynFunction& f, std::size_t n) {
  auto out = truncate(f, n);
  const std::size_t last = out.regular.size() - 1;
  if (out.regular.is_break(last)) out.regular[last] = out.regular.left(last);
  return out;
}

DynFunction zero_dyn(double dt, std::size_t n) { return {{}, SampledFunction::zeros(dt, n)}; }

/// Zeroes f before index g; returns the largest removed magnitude.
double gate(DynFunction& f, std::size_t g) {
  double removed = 0.0;
  std::vector<Atom> keep;
  const double tg = f.dt() * (static_cast<double>(g) - 0.5);
  for (const auto& a : f.train.atoms()) {
    if (a.time < tg)
      removed = std::max(removed, std::abs(a.coeff));
    else
      keep.push_back(a);
  }
  const auto& r = f.regular;
  std::vector<double> v(r.values());
  for (std::size_t k = 0; k < std::min(g, v.size()); ++k) {
    removed = std::max(removed, std::abs(v[k]));
    v[k] = 0.0;
  }
  SampledFunction out(r.dt(), std::move(v));
  for (const auto& [k, left] : r.breaks())
    if (k >= g) out.set_left(k, left);
  // A pinned jump at g is kept; otherwise the function starts from zero there.
  if (g < out.size() && g > 0 && !r.is_break(g)) out.set_left(g, 0.0);
  f = {SingularTrain(std::move(keep)), std::move(out)};
  return removed;
}

double dyn_scale(const DynFunction& f) { return std::max(f.train.max_abs_coeff(), f.regular.max_abs()); }

double dyn_distance(const DynFunction& a, const DynFunction& b) {
  auto d = a - b;
  return dyn_scale(d);
}

DynVertexTrace assemble_trace(const Sheaf& sheaf, const std::vector<DynFunction>& values,
                              const std::vector<DynFunction>& derivs, std::size_t anchor,
                              const PeelDynamicalOptions& opt) {
  const std::size_t m0 = sheaf.size();
  std::vector<SidewaysResult> sw;
  std::size_t valid = std::numeric_limits<std::size_t>::max();
  for (std::size_t k = 0; k < m0; ++k) {
    sw.push_back(sideways_wave(sheaf.edges[k], values[k], derivs[k]));
    valid = std::min(valid, sw.back().valid);
  }
  DynVertexTrace out;
  out.valid = valid;
  out.a = truncate_resolved(sw[anchor].value, valid);
  out.A = zero_dyn(out.a.dt(), valid);
  for (std::size_t k = 0; k < m0; ++k) out.A = out.A - truncate_resolved(sw[k].deriv, valid);
  double dev = 0.0;
  for (std::size_t k = 0; k < m0; ++k)
    if (k != anchor) dev = std::max(dev, dyn_distance(truncate_resolved(sw[k].value, valid), out.a));
  const double scale = std::max(dyn_scale(out.a), 1e-300);
  out.residual = dev / scale;
  if (out.residual > opt.consistency_tol)
    fail(ErrorCode::InconsistentSheafData,
         "sheaf edges disagree at the center (relative residual " + std::to_string(out.residual) + ")");
  return out;
}

void check_row(const Sheaf& sheaf, const std::vector<DynFunction>& row) {
  if (sheaf.size() == 0 || row.size() != sheaf.size() || sheaf.edges.size() != sheaf.size())
    fail(ErrorCode::InconsistentSheafData, "sheaf data and response row sizes differ");
  for (const auto& r : row)
    if (r.dt() != row.front().dt() || r.size() != row.front().size())
      fail(ErrorCode::GridMismatch, "response entries use different grids");
}

}  // namespace

DynVertexTrace vertex_trace_dynamical(const Sheaf& sheaf, std::size_t source, const std::vector<DynFunction>& row,
                                      const PeelDynamicalOptions& opt) {
  check_row(sheaf, row);
  if (source >= sheaf.size()) fail(ErrorCode::InconsistentSheafData, "source outside the sheaf");
  const double dt = row.front().dt();
  const std::size_t n = row.front().size();
  std::vector<DynFunction> values, derivs(row);
  double gated = 0.0;
  for (std::size_t k = 0; k < sheaf.size(); ++k) {
    if (k == source) {
      values.push_back({SingularTrain({{0.0, 1.0, 0}}), SampledFunction::zeros(dt, n)});
      continue;
    }
    values.push_back(zero_dyn(dt, n));
    gated = std::max(gated, gate(derivs[k], grid_index(sheaf.edges[source].length + sheaf.edges[k].length, dt)));
  }
  auto out = assemble_trace(sheaf, values, derivs, source, opt);
  const auto first = grid_index(sheaf.edges[source].length, dt);
  gate(out.a, first);
  gate(out.A, first);
  out.gated = gated;
  return out;
}

DynVertexTrace vertex_trace_dynamical(const Sheaf& sheaf, const std::vector<DynFunction>& row,
                                      const PeelDynamicalOptions& opt) {
  check_row(sheaf, row);
  const double dt = row.front().dt();
  std::vector<DynFunction> values(sheaf.size(), zero_dyn(dt, row.front().size()));
  auto out = assemble_trace(sheaf, values, row, 0, opt);
  // Nothing reaches the center before the earliest front seen at a sheaf vertex, minus its edge.
  double arrival = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < sheaf.size(); ++k)
    if (!row[k].train.empty()) arrival = std::min(arrival, row[k].train.atoms().front().time - sheaf.edges[k].length);
  if (std::isfinite(arrival) && arrival > 0.0) {
    const auto first = static_cast<std::size_t>(std::floor(arrival / dt + 1e-6));
    gate(out.a, first);
    gate(out.A, first);
  }
  return out;
}

namespace {

struct MarchSetup {
  std::size_t K1 = 0;
  double psi1 = 0.0;
  std::vector<std::pair<std::size_t, double>> later;  // (kappa_k - kappa_1 in samples, psi_k)
  std::vector<bool> potential_break;
};

MarchSetup setup_march(const SampledFunction& B, const SingularTrain& psi, const SampledFunction& a_reg,
                       std::size_t n) {
  if (psi.empty()) fail(ErrorCode::LeadingAmplitudeZero, "vertex trace has no leading atom");
  for (const auto& p : psi.atoms())
    if (p.order != 0) fail(ErrorCode::InconsistentTrains, "vertex value trace carries a delta' atom");
  MarchSetup s;
  const double dt = B.dt();
  s.K1 = grid_index(psi.atoms().front().time, dt);
  s.psi1 = psi.atoms().front().coeff;
  if (s.psi1 == 0.0) fail(ErrorCode::LeadingAmplitudeZero, "leading amplitude of the vertex trace vanishes");
  for (std::size_t k = 1; k < psi.size(); ++k)
    s.later.emplace_back(grid_index(psi.atoms()[k].time, dt) - s.K1, psi.atoms()[k].coeff);
  if (B.size() < n + s.K1 || a_reg.size() < n + s.K1)
    fail(ErrorCode::HorizonTooShort, "data shorter than the requested peeled window");
  s.potential_break.assign(n, false);
  for (std::size_t m = 0; m < n; ++m) {
    bool b = B.is_break(m + s.K1);
    for (const auto& [D, c] : s.later)
      if (m >= D && s.potential_break[m - D]) b = true;
    s.potential_break[m] = b;
  }
  return s;
}

double shift_terms(const MarchSetup& s, const std::vector<double>& xr, const std::vector<double>& xl, std::size_t m,
                   bool left) {
  double acc = 0.0;
  for (const auto& [D, c] : s.later) {
    if (m < D) continue;
    const std::size_t j = m - D;
    acc += c * (left ? (j == 0 ? 0.0 : xl[j]) : xr[j]);
  }
  return acc;
}

SampledFunction finish(double dt, std::vector<double> xr, const std::vector<double>& xl, const MarchSetup& s) {
  SampledFunction x(dt, std::move(xr));
  for (std::size_t m = 1; m < x.size(); ++m)
    if (s.potential_break[m]) x.set_left(m, xl[m]);
  return x;
}

}  // namespace

SampledFunction volterra_march(const SampledFunction& B, const SingularTrain& psi, const SampledFunction& a_reg,
                               std::size_t n) {
  const auto s = setup_march(B, psi, a_reg, n);
  const double h = B.dt();
  const double diag = s.psi1 + 0.5 * h * a_reg.right(s.K1);
  if (diag == 0.0) fail(ErrorCode::LeadingAmplitudeZero, "discrete leading coefficient vanishes");
  std::vector<double> xr(n, 0.0), xl(n, 0.0);
  for (std::size_t m = 0; m < n; ++m) {
    const std::size_t t = m + s.K1;
    const double rhs_r = B.right(t) - shift_terms(s, xr, xl, m, false);
    if (m == 0) {
      xr[0] = rhs_r / s.psi1;
      continue;
    }
    double I = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      I += xr[j] * a_reg.left(t - j);
      if (j + 1 < m) I += xl[j + 1] * a_reg.right(t - j - 1);
    }
    I *= 0.5 * h;
    const double rhs_l = B.left(t) - shift_terms(s, xr, xl, m, true);
    xl[m] = (rhs_l - I) / diag;
    xr[m] = (rhs_r - I - 0.5 * h * xl[m] * a_reg.right(s.K1)) / s.psi1;
    if (!s.potential_break[m]) xl[m] = xr[m];
  }
  return finish(h, std::move(xr), xl, s);
}

SampledFunction volterra_by_intervals(const SampledFunction& B, const SingularTrain& psi,
                                      const SampledFunction& a_reg, std::size_t n) {
  const auto s = setup_march(B, psi, a_reg, n);
  const double h = B.dt();
  std::size_t width = n;
  for (std::size_t k = 0; k < s.later.size(); ++k) {
    const std::size_t prev = k == 0 ? 0 : s.later[k - 1].first;
    width = std::min(width, s.later[k].first - prev);
  }
  width = std::max<std::size_t>(width, 1);
  std::vector<double> xr(n, 0.0), xl(n, 0.0);
  for (std::size_t start = 0; start < n; start += width) {
    const std::size_t stop = std::min(n, start + width);
    const auto W = static_cast<Eigen::Index>(2 * (stop - start));
    // Unknowns ordered x_l(m), x_r(m) for m = start..stop-1.
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(W, W);
    Eigen::VectorXd b(W);
    auto col_l = [&](std::size_t m) { return static_cast<Eigen::Index>(2 * (m - start)); };
    for (std::size_t m = start; m < stop; ++m) {
      const std::size_t t = m + s.K1;
      const Eigen::Index rl = col_l(m), rr = rl + 1;
      // Shift terms only reach earlier intervals.
      b(rl) = B.left(t) - shift_terms(s, xr, xl, m, true);
      b(rr) = B.right(t) - shift_terms(s, xr, xl, m, false);
      if (m == 0) {
        A(rl, rl) = 1.0;
        b(rl) = 0.0;
        A(rr, rr) = s.psi1;
        continue;
      }
      A(rl, rl) += s.psi1;
      A(rr, rr) += s.psi1;
      for (std::size_t j = 0; j < m; ++j) {
        const double wr = 0.5 * h * a_reg.left(t - j), wl = 0.5 * h * a_reg.right(t - j - 1);
        for (auto row : {rl, rr}) {
          if (j >= start) A(row, col_l(j) + 1) += wr;
          else b(row) -= wr * xr[j];
          if (j + 1 >= start) A(row, col_l(j + 1)) += wl;
          else b(row) -= wl * xl[j + 1];
        }
      }
      if (!s.potential_break[m]) {
        // Continuity: x_l(m) = x_r(m).
        A.row(rl).setZero();
        A(rl, rl) = 1.0;
        A(rl, rr) = -1.0;
        b(rl) = 0.0;
      }
    }
    Eigen::VectorXd x = A.partialPivLu().solve(b);
    for (std::size_t m = start; m < stop; ++m) {
      xl[m] = x(col_l(m));
      xr[m] = x(col_l(m) + 1);
    }
  }
  return finish(h, std::move(xr), xl, s);
}

SampledFunction volterra_peel_regular(const SampledFunction& r_in, const DynFunction& a, const SingularTrain& x_train,
                                      std::size_t n, const PeelDynamicalOptions& opt) {
  if (a.train.empty()) fail(ErrorCode::LeadingAmplitudeZero, "vertex trace has no leading atom");
  const std::size_t K1 = grid_index(a.train.atoms().front().time, a.dt());
  const std::size_t nt = n + K1;
  if (r_in.size() < nt || a.size() < nt) fail(ErrorCode::HorizonTooShort, "data shorter than the peeled window");
  if (std::abs(r_in.dt() - a.dt()) > 1e-12 * a.dt()) fail(ErrorCode::GridMismatch, "response and trace grids differ");
  ConvolveOptions copt{opt.eps_t, 0.0, 0.0};
  auto D = convolve(DynFunction{x_train, SampledFunction::zeros(a.dt(), nt)},
                    DynFunction{{}, a.regular.truncated(nt)}, nt, copt);
  auto B = r_in.truncated(nt) - D.regular;
  return volterra_march(B, a.train, a.regular, n);
}

namespace {

std::vector<TimedCoeff<double>> to_timed(const SingularTrain& t) {
  std::vector<TimedCoeff<double>> out;
  for (const auto& a : t.atoms()) out.push_back({a.time, a.coeff});
  return out;
}

std::vector<Atom> to_atoms(const Deconvolution<double>& d, int order, double dt) {
  std::vector<Atom> out;
  for (const auto& p : d.pairs) out.push_back({std::round(p.time / dt) * dt, p.coeff, order});
  return out;
}

}  // namespace

DynFunction deconvolve_response(const DynFunction& y, const DynFunction& a, std::size_t n,
                                const PeelDynamicalOptions& opt) {
  if (a.train.empty()) fail(ErrorCode::LeadingAmplitudeZero, "vertex trace has no leading atom");
  const double dt = a.dt();
  const std::size_t K1 = grid_index(a.train.atoms().front().time, dt);
  const std::size_t nt = n + K1;
  if (y.size() < nt || a.size() < nt) fail(ErrorCode::HorizonTooShort, "data shorter than the peeled window");
  const double t_max = dt * static_cast<double>(nt - 1);
  const auto psi = to_timed(a.train);
  const double eps_c = opt.eps_c * std::max(1.0, y.train.max_abs_coeff());
  const std::size_t cap = std::numeric_limits<std::size_t>::max();

  auto x1 = singular_deconvolve(to_timed(y.train.of_order(1)), psi, cap, opt.eps_t, eps_c, t_max);
  SingularTrain t1(to_atoms(x1, 1, dt), opt.eps_t);
  const double jtol = opt.jump_tol * std::abs(psi.front().coeff);
  ConvolveOptions copt{opt.eps_t, 0.0, jtol};
  auto C = convolve(DynFunction{t1, SampledFunction::zeros(dt, nt)}, DynFunction{{}, a.regular.truncated(nt)}, nt, copt);
  auto y0 = merge(y.train.of_order(0), C.train.of_order(0).scaled(-1.0), opt.eps_t, eps_c);
  const double eps_c0 = std::max(eps_c, jtol * std::max(1.0, t1.max_abs_coeff()));
  auto x0 = singular_deconvolve(to_timed(y0), psi, cap, opt.eps_t, eps_c0, t_max);

  auto atoms = to_atoms(x1, 1, dt);
  for (const auto& at : to_atoms(x0, 0, dt)) atoms.push_back(at);
  SingularTrain train(std::move(atoms), opt.eps_t);
  train = train.restricted(dt * (static_cast<double>(n) - 0.5));
  auto reg = volterra_peel_regular(y.regular, a, train, n, opt);
  return {std::move(train), std::move(reg)};
}

PeeledResponse peel_response(const ResponseMatrix& R, const Sheaf& sheaf, const std::string& center_label,
                             const PeelDynamicalOptions& opt) {
  const std::size_t m0 = sheaf.size();
  if (m0 == 0 || sheaf.edges.size() != m0) fail(ErrorCode::InconsistentSheafData, "empty sheaf");
  for (auto p : sheaf.members)
    if (p >= R.size()) fail(ErrorCode::InconsistentSheafData, "sheaf member outside the response matrix");
  const double dt = R.dt;
  const std::size_t N = R.samples();

  PeeledResponse out;
  out.source = 0;
  double lmax = 0.0;
  for (std::size_t k = 0; k < m0; ++k) {
    if (sheaf.edges[k].length < sheaf.edges[out.source].length) out.source = k;
    lmax = std::max(lmax, sheaf.edges[k].length);
  }
  const std::size_t Ls = grid_index(sheaf.edges[out.source].length, dt), Lmax = grid_index(lmax, dt);
  if (N <= Ls + Lmax + 1) fail(ErrorCode::WindowEmpty, "horizon does not cover a trip through the sheaf");
  const std::size_t n = N - Ls - Lmax;
  out.window = dt * static_cast<double>(n - 1);

  auto row_of = [&](std::size_t i) {
    std::vector<DynFunction> row;
    for (auto p : sheaf.members) row.push_back(R.at(i, p));
    return row;
  };
  const std::size_t ps = sheaf.members[out.source];
  auto src = vertex_trace_dynamical(sheaf, out.source, row_of(ps), opt);
  out.residual = src.residual;

  const auto order = peeled_order(R.size(), sheaf.members);
  const std::size_t n_out = order.size();
  auto& M = out.matrix;
  M.dt = dt;
  M.dx = R.dx;
  M.entries.assign(n_out, std::vector<DynFunction>(n_out));
  std::size_t z = 0;
  for (std::size_t k = 0; k < n_out; ++k) {
    M.labels.push_back(order[k] ? R.labels[*order[k]] : center_label);
    if (!order[k]) z = k;
  }

  M.at(z, z) = deconvolve_response(src.A, src.a, n, opt);
  for (std::size_t b = 0; b < n_out; ++b)
    if (order[b]) M.at(z, b) = deconvolve_response(R.at(ps, *order[b]), src.a, n, opt);

  ConvolveOptions copt{opt.eps_t, 0.0, 1e-12};
  for (std::size_t a = 0; a < n_out; ++a) {
    if (!order[a]) continue;
    auto tr = vertex_trace_dynamical(sheaf, row_of(*order[a]), opt);
    out.residual = std::max(out.residual, tr.residual);
    if (tr.valid < n) fail(ErrorCode::HorizonTooShort, "row trace shorter than the peeled window");
    M.at(a, z) = truncate(tr.A, n) - convolve(M.at(z, z), tr.a, n, copt);
    for (std::size_t b = 0; b < n_out; ++b) {
      if (!order[b]) continue;
      M.at(a, b) = truncate(R.at(*order[a], *order[b]), n) - convolve(M.at(z, b), tr.a, n, copt);
    }
    out.asymmetry = std::max(out.asymmetry, (M.at(a, z).regular - M.at(z, a).regular).max_abs());
  }
  double scale = 1.0;
  for (std::size_t i = 0; i < R.size(); ++i)
    for (std::size_t j = 0; j < R.size(); ++j) scale = std::max(scale, R.at(i, j).train.max_abs_coeff());
  for (auto& row : M.entries)
    for (auto& e : row) e.train.normalize(opt.eps_t, opt.eps_c * scale);
  return out;
}

}  // namespace leafpeel
