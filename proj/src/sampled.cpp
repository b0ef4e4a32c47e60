#include "leafpeel/sampled.hpp"

#include <algorithm>
#include <optional>
#include <cmath>
#include <string>

#include "leafpeel/error.hpp"

namespace leafpeel {

SampledFunction::SampledFunction(double dt, std::vector<double> values) : dt_(dt), values_(std::move(values)) {
  if (!(dt > 0.0)) fail(ErrorCode::GridMismatch, "sample step must be positive");
}

SampledFunction SampledFunction::zeros(double dt, std::size_t n) { return SampledFunction(dt, std::vector<double>(n, 0.0)); }

double SampledFunction::left(std::size_t k) const {
  if (k == 0) return 0.0;
  auto it = breaks_.find(k);
  return it == breaks_.end() ? values_[k] : it->second;
}

std::vector<std::size_t> SampledFunction::jump_indices(double tol) const {
  std::vector<std::size_t> out;
  if (!values_.empty() && std::abs(values_[0]) > tol) out.push_back(0);
  for (const auto& [k, l] : breaks_)
    if (k > 0 && k < values_.size() && std::abs(values_[k] - l) > tol) out.push_back(k);
  return out;
}

double SampledFunction::eval(double t) const {
  if (values_.empty() || t < 0.0) return 0.0;
  const double pos = t / dt_;
  const auto last = values_.size() - 1;
  if (pos >= static_cast<double>(last)) return values_.back();
  const auto k = static_cast<std::size_t>(std::floor(pos));
  const double w = pos - static_cast<double>(k);
  if (w == 0.0) return values_[k];
  return (1.0 - w) * values_[k] + w * left(k + 1);
}

SampledFunction SampledFunction::truncated(std::size_t n) const {
  SampledFunction out = *this;
  out.values_.resize(n, values_.empty() ? 0.0 : values_.back());
  for (auto it = out.breaks_.begin(); it != out.breaks_.end();)
    it = it->first >= n ? out.breaks_.erase(it) : std::next(it);
  return out;
}

SampledFunction& SampledFunction::operator+=(const SampledFunction& other) {
  const auto n = std::min(values_.size(), other.values_.size());
  std::map<std::size_t, double> merged;
  for (const auto& [k, l] : breaks_)
    if (k < n) merged[k] = l + other.left(k);
  for (const auto& [k, l] : other.breaks_)
    if (k < n && !merged.count(k)) merged[k] = left(k) + l;
  values_.resize(n);
  for (std::size_t k = 0; k < n; ++k) values_[k] += other.values_[k];
  breaks_ = std::move(merged);
  return *this;
}

SampledFunction& SampledFunction::operator-=(const SampledFunction& other) {
  SampledFunction neg = other;
  neg *= -1.0;
  return *this += neg;
}

SampledFunction& SampledFunction::operator*=(double s) {
  for (auto& v : values_) v *= s;
  for (auto& [k, l] : breaks_) l *= s;
  return *this;
}

SampledFunction SampledFunction::shifted(std::size_t m) const {
  SampledFunction out = SampledFunction::zeros(dt_, values_.size());
  for (std::size_t k = 0; k + m < values_.size(); ++k) out.values_[k + m] = values_[k];
  if (m < values_.size()) out.breaks_[m] = 0.0;
  for (const auto& [k, l] : breaks_)
    if (k + m < values_.size()) out.breaks_[k + m] = l;
  return out;
}

double SampledFunction::max_abs() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  for (const auto& [k, l] : breaks_) m = std::max(m, std::abs(l));
  return m;
}

double SampledFunction::l2_norm(std::size_t n) const {
  n = std::min(n, values_.size());
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double a = values_[k], b = left(k + 1);
    acc += 0.5 * dt_ * (a * a + b * b);
  }
  return std::sqrt(acc);
}

SampledFunction operator+(SampledFunction a, const SampledFunction& b) { return a += b; }
SampledFunction operator-(SampledFunction a, const SampledFunction& b) { return a -= b; }
SampledFunction operator*(double s, SampledFunction a) { return a *= s; }

std::vector<double> fd_weights(double x0, std::span<const double> x, int order) {
  const int n = static_cast<int>(x.size()) - 1;
  std::vector<std::vector<double>> c(static_cast<std::size_t>(n + 1), std::vector<double>(static_cast<std::size_t>(order + 1), 0.0));
  double c1 = 1.0, c4 = x[0] - x0;
  c[0][0] = 1.0;
  for (int i = 1; i <= n; ++i) {
    const int mn = std::min(i, order);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i] - x0;
    for (int j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(static_cast<std::size_t>(n + 1));
  for (int i = 0; i <= n; ++i) w[i] = c[i][order];
  return w;
}

namespace {

// Piece boundaries: 0, every break, last index.
std::vector<std::size_t> piece_ends(std::size_t n, const std::vector<std::size_t>& breaks) {
  std::vector<std::size_t> ends{0};
  for (auto b : breaks)
    if (b > 0 && b + 1 < n) ends.push_back(b);
  ends.push_back(n - 1);
  std::sort(ends.begin(), ends.end());
  ends.erase(std::unique(ends.begin(), ends.end()), ends.end());
  return ends;
}

// Value at k as seen from inside the piece [a, b].
double piece_value(const SampledFunction& f, std::size_t k, std::size_t b) {
  return k == b ? f.left(k) : f.right(k);
}

}  // namespace

SampledFunction derivative(const SampledFunction& f) {
  const auto n = f.size();
  SampledFunction out = SampledFunction::zeros(f.dt(), n);
  if (n < 2) return out;
  std::vector<std::size_t> bk;
  for (const auto& [k, l] : f.breaks()) bk.push_back(k);
  const auto ends = piece_ends(n, bk);
  const double h = f.dt();
  for (std::size_t p = 0; p + 1 < ends.size(); ++p) {
    const auto a = ends[p], b = ends[p + 1];
    auto v = [&](std::size_t k) { return piece_value(f, k, b); };
    for (std::size_t k = a + 1; k < b; ++k) out[k] = (v(k + 1) - v(k - 1)) / (2.0 * h);
    double da, db;
    if (b - a >= 4) {
      // Limits at piece ends are often extrapolated; keep them out of the stencils.
      static const double x[3] = {1.0, 2.0, 3.0};
      const auto w0 = fd_weights(0.0, x, 1), w1 = fd_weights(1.0, x, 1);
      da = db = 0.0;
      double d1 = 0.0, d2 = 0.0;
      for (std::size_t j = 0; j < 3; ++j) {
        da += w0[j] * v(a + 1 + j) / h;
        db -= w0[j] * v(b - 1 - j) / h;
        d1 += w1[j] * v(a + 1 + j) / h;
        d2 -= w1[j] * v(b - 1 - j) / h;
      }
      out[a + 1] = d1;
      out[b - 1] = d2;
    } else if (b - a >= 2) {
      da = (-3.0 * v(a) + 4.0 * v(a + 1) - v(a + 2)) / (2.0 * h);
      db = (3.0 * v(b) - 4.0 * v(b - 1) + v(b - 2)) / (2.0 * h);
    } else {
      da = db = (v(b) - v(a)) / h;
    }
    out[a] = da;
    if (b == n - 1)
      out[b] = db;
    else
      out.set_left(b, db);
  }
  return out;
}

SampledFunction second_derivative(const SampledFunction& g, const std::vector<std::size_t>& breaks) {
  const auto n = g.size();
  SampledFunction out = SampledFunction::zeros(g.dt(), n);
  if (n < 3) return out;
  const double h2 = g.dt() * g.dt();
  const auto ends = piece_ends(n, breaks);
  std::vector<bool> is_end(n, false);
  for (auto e : ends) is_end[e] = true;
  // Samples on a break are never used. Stencils prefer stride 2 so that they
  // only combine samples of one parity; leapfrog traces carry an alternating
  // O(h^2) offset that a stride-1 second difference would amplify.
  static const std::vector<std::vector<int>> stencils{
      {-2, 0, 2}, {0, 2, 4, 6}, {0, -2, -4, -6}, {0, 2, 4}, {0, -2, -4},
      {-1, 0, 1}, {0, 1, 2, 3}, {0, -1, -2, -3}, {0, 1, 2}, {0, -1, -2}};
  std::vector<std::size_t> next_end(n, n), prev_end(n, n);
  for (std::size_t k = 0, last = n; k < n; ++k) {
    if (is_end[k]) last = k;
    prev_end[k] = last;
  }
  for (std::size_t k = n, last = n; k-- > 0;) {
    if (is_end[k]) last = k;
    next_end[k] = last;
  }
  for (std::size_t k = 1; k + 1 < n; ++k) {
    if (is_end[k]) continue;
    const auto lo_ok = static_cast<std::ptrdiff_t>(prev_end[k] == n ? 0 : prev_end[k] + 1);
    const auto hi_ok = static_cast<std::ptrdiff_t>(next_end[k] == n ? n - 1 : next_end[k] - 1);
    for (const auto& st : stencils) {
      const auto lo = static_cast<std::ptrdiff_t>(k) + *std::min_element(st.begin(), st.end());
      const auto hi = static_cast<std::ptrdiff_t>(k) + *std::max_element(st.begin(), st.end());
      if (lo < lo_ok || hi > hi_ok) continue;
      std::vector<double> xs(st.begin(), st.end());
      auto w = fd_weights(0.0, xs, 2);
      double acc = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) acc += w[i] * g[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(k) + st[i])];
      out[k] = acc / h2;
      break;
    }
  }

  auto extrapolate = [&](std::size_t k, int dir) -> std::optional<double> {
    std::vector<double> xs, ys;
    for (int s = 1; s <= 4; ++s) {
      const auto j = static_cast<std::ptrdiff_t>(k) + dir * s;
      if (j < 0 || j >= static_cast<std::ptrdiff_t>(n) || is_end[static_cast<std::size_t>(j)]) break;
      xs.push_back(static_cast<double>(dir * s));
      ys.push_back(out[static_cast<std::size_t>(j)]);
    }
    if (xs.empty()) return std::nullopt;
    auto w = fd_weights(0.0, xs, 0);
    double v = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) v += w[i] * ys[i];
    return v;
  };
  for (auto e : ends) {
    auto r = extrapolate(e, +1);
    auto l = extrapolate(e, -1);
    if (e == n - 1) {
      out[e] = l.value_or(0.0);
    } else {
      out[e] = r.value_or(l.value_or(0.0));
      if (e > 0) out.set_left(e, l.value_or(out[e]));
    }
  }
  return out;
}

SampledFunction convolve(const SampledFunction& f, const SampledFunction& g, std::size_t n) {
  if (std::abs(f.dt() - g.dt()) > 1e-12 * f.dt()) fail(ErrorCode::GridMismatch, "convolution of different grids");
  n = std::min({n, f.size(), g.size()});
  SampledFunction out = SampledFunction::zeros(f.dt(), n);
  const double h = f.dt();
  std::vector<double> fl(n), gl(n);
  for (std::size_t k = 0; k < n; ++k) {
    fl[k] = f.left(k);
    gl[k] = g.left(k);
  }
  const auto& fr = f.values();
  const auto& gr = g.values();
  for (std::size_t m = 1; m < n; ++m) {
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) acc += fr[j] * gl[m - j] + fl[j + 1] * gr[m - j - 1];
    out[m] = 0.5 * h * acc;
  }
  return out;
}

SampledFunction cumulative_integral(const SampledFunction& f) {
  SampledFunction out = SampledFunction::zeros(f.dt(), f.size());
  double acc = 0.0;
  for (std::size_t k = 1; k < f.size(); ++k) {
    acc += 0.5 * f.dt() * (f.right(k - 1) + f.left(k));
    out[k] = acc;
  }
  return out;
}

SampledFunction ramp(double dt, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t k = 0; k < n; ++k) v[k] = dt * static_cast<double>(k);
  return SampledFunction(dt, std::move(v));
}

std::size_t grid_index(double t, double dt) {
  const double pos = t / dt;
  const double r = std::round(pos);
  if (r < 0.0 || std::abs(pos - r) > 1e-6)
    fail(ErrorCode::GridMismatch, "time " + std::to_string(t) + " is not on the grid with step " + std::to_string(dt));
  return static_cast<std::size_t>(r);
}

}  // namespace leafpeel
