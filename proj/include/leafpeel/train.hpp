#pragma once

#include <cstddef>
#include <map>
#include <vector>

#include "leafpeel/sampled.hpp"

namespace leafpeel {

/// c * delta(t - time) for order 0, c * delta'(t - time) for order 1.
struct Atom {
  double time = 0.0;
  double coeff = 0.0;
  int order = 1;

  bool operator==(const Atom&) const = default;
};

/// Finite sum of atoms ordered by (time, order), at most one atom per (time, order).
class SingularTrain {
 public:
  SingularTrain() = default;
  explicit SingularTrain(std::vector<Atom> atoms, double eps_t = 1e-9, double eps_c = 0.0);

  const std::vector<Atom>& atoms() const noexcept { return atoms_; }
  std::size_t size() const noexcept { return atoms_.size(); }
  bool empty() const noexcept { return atoms_.empty(); }

  /// Adds atoms, merging coincident (time, order) pairs and dropping |c| <= eps_c.
  void add(const Atom& a) { atoms_.push_back(a); }
  void normalize(double eps_t, double eps_c);

  SingularTrain of_order(int order) const;
  SingularTrain restricted(double t_max) const;
  SingularTrain shifted(double tau) const;
  SingularTrain scaled(double s) const;
  double max_abs_coeff() const;

 private:
  std::vector<Atom> atoms_;
};

SingularTrain merge(const SingularTrain& a, const SingularTrain& b, double eps_t, double eps_c);

/// Distribution = singular train + piecewise-smooth regular part on a uniform grid.
struct DynFunction {
  SingularTrain train;
  SampledFunction regular;

  double dt() const { return regular.dt(); }
  std::size_t size() const { return regular.size(); }
};

DynFunction operator+(const DynFunction& a, const DynFunction& b);
DynFunction operator-(const DynFunction& a, const DynFunction& b);
DynFunction operator*(double s, const DynFunction& a);

struct ConvolveOptions {
  double eps_t = 1e-9;
  double eps_c = 1e-14;
  /// Jumps of a regular part smaller than this do not produce delta atoms.
  double jump_tol = 1e-12;
};

/// Causal convolution truncated to the first n samples of the common grid.
/// Atom times must lie on the grid.
DynFunction convolve(const DynFunction& a, const DynFunction& b, std::size_t n, const ConvolveOptions& opt = {});

/// The atom c * delta^{(order)}(t - time) convolved with a regular function.
DynFunction apply_atom(const Atom& atom, const SampledFunction& g, std::size_t n, double jump_tol = 1e-12);

}  // namespace leafpeel

namespace leafpeel {

/// Samples of f * ramp, exact on atoms, trapezoid on the regular part.
SampledFunction ramp_image(const DynFunction& f);

/// Recovers the regular part of f from samples of f * ramp and the known train.
/// `breaks` are sample indices where the regular part may jump; `jumps` pins
/// the jump size at some of them.
SampledFunction regular_from_ramp(const SampledFunction& g, const SingularTrain& train,
                                  std::vector<std::size_t> breaks, const std::map<std::size_t, double>& jumps = {});

}  // namespace leafpeel
