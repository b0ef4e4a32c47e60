#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace leafpeel {

/// Uniform samples t_k = k * dt on [0, (n-1) dt], zero for t < 0.
///
/// `values` hold right limits. Samples listed in the break map carry a distinct
/// left limit; a jump from the zero extension at t = 0 is implicit.
class SampledFunction {
 public:
  SampledFunction() = default;
  SampledFunction(double dt, std::vector<double> values);
  static SampledFunction zeros(double dt, std::size_t n);

  double dt() const noexcept { return dt_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  double horizon() const noexcept { return values_.empty() ? 0.0 : dt_ * static_cast<double>(values_.size() - 1); }

  double operator[](std::size_t k) const { return values_[k]; }
  double& operator[](std::size_t k) { return values_[k]; }
  const std::vector<double>& values() const noexcept { return values_; }

  double right(std::size_t k) const { return values_[k]; }
  /// Left limit; 0 at k = 0.
  double left(std::size_t k) const;
  void set_left(std::size_t k, double v) { breaks_[k] = v; }
  bool is_break(std::size_t k) const { return breaks_.count(k) != 0; }
  const std::map<std::size_t, double>& breaks() const noexcept { return breaks_; }
  /// Indices where the function jumps, including k = 0 when f(0+) != 0.
  std::vector<std::size_t> jump_indices(double tol = 0.0) const;

  /// Linear interpolation inside pieces, respecting breaks. Zero for t < 0.
  double eval(double t) const;

  SampledFunction truncated(std::size_t n) const;
  SampledFunction& operator+=(const SampledFunction& other);
  SampledFunction& operator-=(const SampledFunction& other);
  SampledFunction& operator*=(double s);
  /// f(t - shift_samples * dt); index `shift_samples` becomes a break.
  SampledFunction shifted(std::size_t shift_samples) const;

  double max_abs() const;
  /// Trapezoid L2 norm over the samples [0, n).
  double l2_norm(std::size_t n) const;

 private:
  double dt_ = 1.0;
  std::vector<double> values_;
  std::map<std::size_t, double> breaks_;
};

SampledFunction operator+(SampledFunction a, const SampledFunction& b);
SampledFunction operator-(SampledFunction a, const SampledFunction& b);
SampledFunction operator*(double s, SampledFunction a);

/// Finite-difference weights for derivative `order` at x0 from nodes x (Fornberg).
std::vector<double> fd_weights(double x0, std::span<const double> x, int order);

/// Piecewise derivative: centered inside pieces, one-sided second order at piece ends.
SampledFunction derivative(const SampledFunction& f);

/// Second derivative of a C^1 function whose second derivative jumps at `breaks`.
/// Centered differences away from breaks; limits at breaks extrapolated from
/// up to four neighbours on each side.
SampledFunction second_derivative(const SampledFunction& g, const std::vector<std::size_t>& breaks);

/// (f * g)(t) = int_0^t f(s) g(t - s) ds on the common grid, first n samples.
SampledFunction convolve(const SampledFunction& f, const SampledFunction& g, std::size_t n);

/// int_0^t f, trapezoid with one-sided limits.
SampledFunction cumulative_integral(const SampledFunction& f);

/// Exact samples of the ramp t * Theta(t).
SampledFunction ramp(double dt, std::size_t n);

/// Convert a time to a grid index; throws GridMismatch if it is off the grid.
std::size_t grid_index(double t, double dt);

}  // namespace leafpeel
