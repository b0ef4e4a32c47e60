#include "leafpeel/train.hpp"

#include <algorithm>
#include <cmath>

#include "leafpeel/error.hpp"

namespace leafpeel {

SingularTrain::SingularTrain(std::vector<Atom> atoms, double eps_t, double eps_c) : atoms_(std::move(atoms)) {
  normalize(eps_t, eps_c);
}

void SingularTrain::normalize(double eps_t, double eps_c) {
  std::stable_sort(atoms_.begin(), atoms_.end(), [](const Atom& a, const Atom& b) {
    return a.order != b.order ? a.order < b.order : a.time < b.time;
  });
  std::vector<Atom> merged;
  for (const auto& a : atoms_) {
    if (!merged.empty() && merged.back().order == a.order && std::abs(merged.back().time - a.time) <= eps_t)
      merged.back().coeff += a.coeff;
    else
      merged.push_back(a);
  }
  std::erase_if(merged, [eps_c](const Atom& a) { return std::abs(a.coeff) <= eps_c; });
  std::stable_sort(merged.begin(), merged.end(), [](const Atom& a, const Atom& b) {
    return a.time != b.time ? a.time < b.time : a.order < b.order;
  });
  atoms_ = std::move(merged);
}

SingularTrain SingularTrain::of_order(int order) const {
  SingularTrain out;
  for (const auto& a : atoms_)
    if (a.order == order) out.atoms_.push_back(a);
  return out;
}

SingularTrain SingularTrain::restricted(double t_max) const {
  SingularTrain out;
  for (const auto& a : atoms_)
    if (a.time <= t_max) out.atoms_.push_back(a);
  return out;
}

SingularTrain SingularTrain::shifted(double tau) const {
  SingularTrain out = *this;
  for (auto& a : out.atoms_) a.time += tau;
  return out;
}

SingularTrain SingularTrain::scaled(double s) const {
  SingularTrain out = *this;
  for (auto& a : out.atoms_) a.coeff *= s;
  return out;
}

double SingularTrain::max_abs_coeff() const {
  double m = 0.0;
  for (const auto& a : atoms_) m = std::max(m, std::abs(a.coeff));
  return m;
}

SingularTrain merge(const SingularTrain& a, const SingularTrain& b, double eps_t, double eps_c) {
  std::vector<Atom> all = a.atoms();
  all.insert(all.end(), b.atoms().begin(), b.atoms().end());
  return SingularTrain(std::move(all), eps_t, eps_c);
}

DynFunction operator+(const DynFunction& a, const DynFunction& b) {
  return {merge(a.train, b.train, 1e-9, 0.0), a.regular + b.regular};
}

DynFunction operator-(const DynFunction& a, const DynFunction& b) { return a + (-1.0) * b; }

DynFunction operator*(double s, const DynFunction& a) { return {a.train.scaled(s), s * a.regular}; }

DynFunction apply_atom(const Atom& atom, const SampledFunction& g, std::size_t n, double jump_tol) {
  n = std::min(n, g.size());
  const auto m = grid_index(atom.time, g.dt());
  DynFunction out{{}, SampledFunction::zeros(g.dt(), n)};
  if (m >= n) return out;
  if (atom.order == 0) {
    out.regular = (atom.coeff * g.truncated(n)).shifted(m);
    return out;
  }
  if (atom.order != 1) fail(ErrorCode::GridMismatch, "only delta and delta' atoms are supported");
  out.regular = (atom.coeff * derivative(g.truncated(n))).shifted(m);
  for (auto k : g.jump_indices(jump_tol)) {
    if (k + m >= n) continue;
    const double jump = g.right(k) - g.left(k);
    out.train.add({atom.time + static_cast<double>(k) * g.dt(), atom.coeff * jump, 0});
  }
  out.train.normalize(1e-9 * g.dt(), 0.0);
  return out;
}

DynFunction convolve(const DynFunction& a, const DynFunction& b, std::size_t n, const ConvolveOptions& opt) {
  const double dt = a.dt();
  n = std::min(n, std::min(a.size(), b.size()));
  const double t_max = dt * static_cast<double>(n - 1) + 0.5 * dt;
  DynFunction out{{}, convolve(a.regular, b.regular, n)};
  for (const auto& x : a.train.atoms())
    for (const auto& y : b.train.atoms()) {
      if (x.order + y.order > 1) fail(ErrorCode::GridMismatch, "product of two delta' atoms is not representable");
      if (x.time + y.time <= t_max) out.train.add({x.time + y.time, x.coeff * y.coeff, x.order + y.order});
    }
  auto fold = [&](const SingularTrain& train, const SampledFunction& g) {
    for (const auto& x : train.atoms()) {
      if (x.time > t_max) continue;
      auto part = apply_atom(x, g, n, opt.jump_tol);
      out.regular += part.regular;
      for (const auto& y : part.train.atoms()) out.train.add(y);
    }
  };
  fold(a.train, b.regular);
  fold(b.train, a.regular);
  out.train.normalize(opt.eps_t, opt.eps_c);
  return out;
}

}  // namespace leafpeel

namespace leafpeel {

SampledFunction ramp_image(const DynFunction& f) {
  const double dt = f.dt();
  const auto n = f.size();
  SampledFunction g = cumulative_integral(cumulative_integral(f.regular));
  for (const auto& a : f.train.atoms()) {
    const auto m = grid_index(a.time, dt);
    for (std::size_t k = m; k < n; ++k) {
      if (a.order == 1)
        g[k] += a.coeff;
      else
        g[k] += a.coeff * dt * static_cast<double>(k - m);
    }
    if (a.order == 1 && m < n) g.set_left(m, g.left(m) - a.coeff);
  }
  return g;
}

SampledFunction regular_from_ramp(const SampledFunction& g, const SingularTrain& train, std::vector<std::size_t> breaks,
                                  const std::map<std::size_t, double>& jumps) {
  DynFunction known{train, SampledFunction::zeros(g.dt(), g.size())};
  SampledFunction rest = g - ramp_image(known);
  for (const auto& a : train.atoms()) breaks.push_back(grid_index(a.time, g.dt()));
  for (const auto& [k, j] : jumps) breaks.push_back(k);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  SampledFunction r = second_derivative(rest, breaks);
  for (const auto& [k, j] : jumps) {
    if (k == 0 && !r.empty())
      r[0] = j;
    else if (k + 1 == r.size() && !r.is_break(k)) {
      // The last sample only carries the left limit.
      const double left = r[k];
      r[k] = left + j;
      r.set_left(k, left);
    } else if (k < r.size())
      r.set_left(k, r.right(k) - j);
  }
  return r;
}

}  // namespace leafpeel
