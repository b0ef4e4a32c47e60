#include <cmath>

#include "doctest.h"
#include "leafpeel/error.hpp"
#include "leafpeel/sampled.hpp"
#include "leafpeel/train.hpp"

using namespace leafpeel;

namespace {

SampledFunction sample(double dt, std::size_t n, auto&& f) {
  std::vector<double> v(n);
  for (std::size_t k = 0; k < n; ++k) v[k] = f(dt * static_cast<double>(k));
  return SampledFunction(dt, std::move(v));
}

}  // namespace

TEST_CASE("fd weights") {
  std::vector<double> x{-1, 0, 1};
  auto w = fd_weights(0.0, x, 2);
  CHECK(w[0] == doctest::Approx(1.0));
  CHECK(w[1] == doctest::Approx(-2.0));
  CHECK(w[2] == doctest::Approx(1.0));
  std::vector<double> y{1, 2, 3};
  auto e = fd_weights(0.0, y, 0);  // extrapolate a quadratic to 0
  CHECK(e[0] * 1 + e[1] * 4 + e[2] * 9 == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("convolution is second order with jumps at grid points") {
  double errs[2];
  for (int r = 0; r < 2; ++r) {
    const double h = r == 0 ? 0.01 : 0.005;
    const std::size_t n = static_cast<std::size_t>(std::lround(3.0 / h)) + 1;
    auto f = sample(h, n, [](double t) { return t < 1.0 ? 0.0 : std::cos(t); });
    f.set_left(static_cast<std::size_t>(std::lround(1.0 / h)), 0.0);
    auto g = sample(h, n, [](double t) { return std::sin(t); });
    auto c = convolve(f, g, n);
    // Reference by composite Simpson on [1, t].
    double err = 0.0;
    for (std::size_t k = 0; k < n; k += 10) {
      const double t = h * static_cast<double>(k);
      double ref = 0.0;
      if (t > 1.0) {
        const int m = 2000;
        const double w = (t - 1.0) / m;
        for (int i = 0; i <= m; ++i) {
          const double s = 1.0 + w * i;
          const double c4 = (i == 0 || i == m) ? 1.0 : (i % 2 ? 4.0 : 2.0);
          ref += c4 * std::cos(s) * std::sin(t - s);
        }
        ref *= w / 3.0;
      }
      err = std::max(err, std::abs(c[k] - ref));
    }
    errs[r] = err;
  }
  CHECK(errs[1] < 1e-4);
  CHECK(std::log2(errs[0] / errs[1]) > 1.8);
}

TEST_CASE("piecewise derivative keeps one-sided limits") {
  const double h = 0.01;
  auto f = sample(h, 201, [](double t) { return t < 1.0 ? t * t : 3.0 - t; });
  f.set_left(100, 1.0);
  auto d = derivative(f);
  CHECK(d.left(100) == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(d.right(100) == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(d[50] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(d[0] == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("second derivative of a ramp response") {
  // g'' = r where r jumps at t = 1.
  const double h = 0.0025;
  const std::size_t n = 801;
  auto r = sample(h, n, [](double t) { return t < 1.0 ? std::exp(-t) : std::cos(3 * t); });
  r.set_left(400, std::exp(-1.0));
  auto g = convolve(r, ramp(h, n), n);
  auto back = second_derivative(g, {400});
  double err = 0.0;
  for (std::size_t k = 0; k < n; ++k) err = std::max(err, std::abs(back[k] - r[k]));
  CHECK(err < 5e-4);
  CHECK(back.left(400) == doctest::Approx(std::exp(-1.0)).epsilon(1e-4));
}

TEST_CASE("delta' acting on a function with jumps emits delta atoms") {
  const double h = 0.01;
  auto g = sample(h, 301, [](double t) { return t < 1.0 ? 2.0 : 2.0 - (t - 1.0); });
  g.set_left(100, 2.0);
  g[100] = 1.5;  // jump of -0.5 at t = 1
  for (std::size_t k = 101; k < 301; ++k) g[k] = 1.5 - (h * static_cast<double>(k) - 1.0);
  auto out = apply_atom({0.5, 3.0, 1}, g, 301);
  REQUIRE(out.train.size() == 2);
  CHECK(out.train.atoms()[0].time == doctest::Approx(0.5));
  CHECK(out.train.atoms()[0].coeff == doctest::Approx(6.0));
  CHECK(out.train.atoms()[0].order == 0);
  CHECK(out.train.atoms()[1].time == doctest::Approx(1.5));
  CHECK(out.train.atoms()[1].coeff == doctest::Approx(-1.5));
  CHECK(out.regular[200] == doctest::Approx(-3.0));
  CHECK(out.regular[10] == 0.0);
}

TEST_CASE("train algebra") {
  SingularTrain t({{2.0, 1.0, 1}, {1.0, 0.5, 1}, {2.0 + 1e-12, -1.0, 1}, {1.0, 0.25, 0}});
  REQUIRE(t.size() == 2);
  CHECK(t.atoms()[0].order == 0);
  CHECK(t.atoms()[1].coeff == 0.5);

  const double h = 0.01;
  DynFunction a{SingularTrain({{0.5, 2.0, 0}}), SampledFunction::zeros(h, 301)};
  DynFunction b{SingularTrain({{1.0, -1.0, 1}}), SampledFunction::zeros(h, 301)};
  auto c = convolve(a, b, 301);
  REQUIRE(c.train.size() == 1);
  CHECK(c.train.atoms()[0].time == doctest::Approx(1.5));
  CHECK(c.train.atoms()[0].coeff == doctest::Approx(-2.0));
  CHECK(c.train.atoms()[0].order == 1);
  CHECK_THROWS_AS(grid_index(0.123456, h), Error);
}
