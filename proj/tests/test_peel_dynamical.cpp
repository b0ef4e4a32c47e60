#include <cmath>
#include <random>

#include <boost/multiprecision/cpp_int.hpp>

#include "doctest.h"
#include "leafpeel/error.hpp"
#include "leafpeel/fixtures.hpp"
#include "leafpeel/forward_data.hpp"
#include "leafpeel/peel_dynamical.hpp"

using namespace leafpeel;
using boost::multiprecision::cpp_rational;
using RT = TimedCoeff<cpp_rational>;

namespace {

// Brute-force product, merged by exact time equality.
std::vector<RT> product(const std::vector<RT>& a, const std::vector<RT>& b) {
  std::map<double, cpp_rational> m;
  for (const auto& x : a)
    for (const auto& y : b) m[x.time + y.time] += x.coeff * y.coeff;
  std::vector<RT> out;
  for (const auto& [t, c] : m)
    if (c != 0) out.push_back({t, c});
  return out;
}

bool same(const std::vector<RT>& a, const std::vector<RT>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k)
    if (a[k].time != b[k].time || a[k].coeff != b[k].coeff) return false;
  return true;
}

SampledFunction sample(double h, std::size_t n, auto f) {
  std::vector<double> v(n);
  for (std::size_t k = 0; k < n; ++k) v[k] = f(h * static_cast<double>(k));
  return SampledFunction(h, std::move(v));
}

}  // namespace

TEST_CASE("singular_deconvolve base step") {
  std::vector<TimedCoeff<double>> alpha{{3.0, 2.0}}, psi{{1.0, 1.0}};
  auto d = singular_deconvolve(alpha, psi, 10, 1e-12, 0.0);
  REQUIRE(d.pairs.size() == 1);
  CHECK(d.pairs[0].time == 2.0);
  CHECK(d.pairs[0].coeff == 2.0);
  CHECK(d.consumed == std::vector<std::size_t>{1});
}

TEST_CASE("singular_deconvolve recovers products exactly") {
  const std::vector<RT> phi{{1.0, cpp_rational(1, 2)}, {2.5, cpp_rational(1, 4)}};
  const std::vector<RT> psi{{1.0, 1}, {3.0, cpp_rational(-1, 2)}};
  auto alpha = product(phi, psi);
  const std::vector<RT> expected{{2.0, cpp_rational(1, 2)},
                                 {3.5, cpp_rational(1, 4)},
                                 {4.0, cpp_rational(-1, 4)},
                                 {5.5, cpp_rational(-1, 8)}};
  CHECK(same(alpha, expected));
  auto d = singular_deconvolve(alpha, psi, 100, 1e-12, cpp_rational(0));
  CHECK(same(d.pairs, phi));

  SUBCASE("coincident arrivals add up") {
    const std::vector<RT> p{{0.0, 1}, {1.0, 2}}, q{{1.0, 1}, {2.0, -1}};
    auto a = product(p, q);  // t = 2 collects 2 * 1 + 1 * (-1)
    CHECK(a[1].coeff == 1);
    CHECK(same(singular_deconvolve(a, q, 100, 1e-12, cpp_rational(0)).pairs, p));
  }
  SUBCASE("coincident arrivals cancel") {
    const std::vector<RT> p{{0.0, 1}, {1.0, 1}}, q{{1.0, 1}, {2.0, -1}};
    auto a = product(p, q);  // nothing left at t = 2
    CHECK(a.size() == 2);
    auto d = singular_deconvolve(a, q, 100, 1e-12, cpp_rational(0));
    CHECK(same(d.pairs, p));
    CHECK(d.per_pair[1] == 0);
  }
}

TEST_CASE("singular_deconvolve round trip on random trains") {
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> num(-9, 9), slot(0, 12), count(1, 5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<RT> phi, psi;
    std::set<int> used_phi, used_psi;
    for (int k = count(rng); k > 0; --k) used_phi.insert(slot(rng));
    for (int k = count(rng); k > 0; --k) used_psi.insert(1 + slot(rng));
    for (int s : used_phi) {
      int c = num(rng);
      phi.push_back({0.25 * s, cpp_rational(c == 0 ? 1 : c, 1 + slot(rng))});
    }
    for (int s : used_psi) {
      int c = num(rng);
      psi.push_back({0.25 * s, cpp_rational(c == 0 ? 3 : c, 1 + slot(rng))});
    }
    auto alpha = product(phi, psi);
    auto d = singular_deconvolve(alpha, psi, 1000, 1e-9, cpp_rational(0));
    CHECK(same(d.pairs, phi));
    CHECK(same(product(d.pairs, psi), alpha));
  }
}

TEST_CASE("singular_deconvolve failure modes") {
  std::vector<TimedCoeff<double>> alpha{{3.0, 2.0}}, psi{{1.0, 0.0}};
  CHECK_THROWS_AS(singular_deconvolve(alpha, psi, 10, 1e-12, 1e-14), Error);
  std::vector<TimedCoeff<double>> early{{0.5, 1.0}}, psi1{{1.0, 1.0}};
  CHECK_THROWS_AS(singular_deconvolve(early, psi1, 10, 1e-12, 1e-14), Error);
}

TEST_CASE("volterra march without regular trace") {
  const double h = 0.01;
  const std::size_t n = 300;
  auto B = sample(h, n + 200, [](double t) { return std::sin(3.0 * t) + t; });
  auto zero = SampledFunction::zeros(h, n + 200);
  SUBCASE("single atom is shift and scale") {
    auto x = volterra_march(B, SingularTrain({{1.0, 0.5, 0}}), zero, n);
    for (std::size_t k = 0; k < n; ++k) CHECK(x[k] == doctest::Approx(B[k + 100] / 0.5).epsilon(1e-13));
  }
  SUBCASE("two atoms unroll") {
    // 2 x(s) - x(s - 0.5) = B(s + 1)  =>  x(s) = sum_j B(s + 1 - 0.5 j) / 2^(j+1).
    auto x = volterra_march(B, SingularTrain({{1.0, 2.0, 0}, {1.5, -1.0, 0}}), zero, n);
    double err = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double s = h * static_cast<double>(k);
      double want = 0.0;
      for (int j = 0; s - 0.5 * j >= -1e-12; ++j) want += B.eval(s + 1.0 - 0.5 * j) / std::pow(2.0, j + 1);
      err = std::max(err, std::abs(x[k] - want));
    }
    CHECK(err < 1e-12);
  }
}

TEST_CASE("volterra march is second order and matches the interval scheme") {
  // x(s) = cos s, a~(t) = e^{-t} for t >= 1, psi = 1.5 delta(t - 1) - 0.4 delta(t - 1.7).
  auto B_exact = [](double t) {
    auto x = [](double s) { return s >= 0.0 ? std::cos(s) : 0.0; };
    const double s = t - 1.0;
    double v = 1.5 * x(s) - 0.4 * x(t - 1.7);
    if (s > 0.0) v += std::exp(-1.0) * (0.5 * (std::cos(s) + std::sin(s)) - 0.5 * std::exp(-s));
    return v;
  };
  const SingularTrain psi({{1.0, 1.5, 0}, {1.7, -0.4, 0}});
  std::vector<double> errs;
  for (double h : {0.02, 0.01, 0.005}) {
    const auto n = static_cast<std::size_t>(std::llround(3.0 / h)) + 1;
    const auto nt = n + static_cast<std::size_t>(std::llround(1.0 / h));
    auto B = sample(h, nt, B_exact);
    const auto k1 = static_cast<std::size_t>(std::llround(1.0 / h)), k17 = static_cast<std::size_t>(std::llround(1.7 / h));
    B.set_left(k1, 0.0);
    B.set_left(k17, B_exact(1.7) + 0.4);
    auto a = sample(h, nt, [](double t) { return t >= 1.0 - 1e-12 ? std::exp(-t) : 0.0; });
    a.set_left(k1, 0.0);
    auto x = volterra_march(B, psi, a, n);
    auto y = volterra_by_intervals(B, psi, a, n);
    CHECK((x - y).max_abs() < 1e-12);
    double err = 0.0;
    for (std::size_t k = 0; k < n; ++k) err = std::max(err, std::abs(x[k] - std::cos(h * static_cast<double>(k))));
    errs.push_back(err);
  }
  CHECK(std::log2(errs[0] / errs[1]) > 1.9);
  CHECK(std::log2(errs[1] / errs[2]) > 1.9);
}

TEST_CASE("vertex trace of a potential-free sheaf") {
  auto star = fixtures::three_star(1, 2, 3);
  auto R = response_matrix(star, 6.0, 0.01);
  auto sheaf = enumerate_sheaves(star).at(0);
  auto tr = vertex_trace_dynamical(sheaf, 0, {R.at(0, 0), R.at(0, 1)});
  REQUIRE(!tr.a.train.empty());
  CHECK(tr.a.train.atoms()[0].time == doctest::Approx(1.0));
  CHECK(tr.a.train.atoms()[0].coeff == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(tr.a.regular.max_abs() < 1e-6);
  CHECK(tr.A.regular.max_abs() < 1e-5);
  CHECK(tr.residual < 1e-6);
  CHECK(tr.gated < 1e-6);

  auto noisy = R.at(0, 1);
  noisy.train.add({1.0, 0.3, 1});
  noisy.train.normalize(1e-9, 0.0);
  auto gated = vertex_trace_dynamical(sheaf, 0, {R.at(0, 0), noisy});
  CHECK(gated.gated == doctest::Approx(0.3));
}

namespace {

void compare_peel(const MetricTree& tree, double T, double dx, double coeff_tol, double l2_tol) {
  auto R = response_matrix(tree, T, dx);
  for (const auto& sheaf : enumerate_sheaves(tree)) {
    auto P = peel_response(R, sheaf, "v0");
    auto F = response_matrix(peel(tree, sheaf), P.window, dx);
    REQUIRE(P.matrix.size() == F.size());
    for (std::size_t i = 0; i < F.size(); ++i)
      for (std::size_t j = 0; j < F.size(); ++j) {
        const auto& got = P.matrix.at(i, j);
        const auto& want = F.at(i, j);
        REQUIRE(got.train.size() == want.train.size());
        for (std::size_t k = 0; k < got.train.size(); ++k) {
          CHECK(std::abs(got.train.atoms()[k].time - want.train.atoms()[k].time) < 1e-9 * T);
          CHECK(got.train.atoms()[k].order == want.train.atoms()[k].order);
          CHECK(std::abs(got.train.atoms()[k].coeff - want.train.atoms()[k].coeff) < coeff_tol);
        }
        const auto n = want.size();
        const double diff = (got.regular - want.regular).l2_norm(n);
        CHECK(diff <= l2_tol * std::max(1.0, want.regular.l2_norm(n)));
      }
  }
}

}  // namespace

TEST_CASE("peel_response of the 3-star is the single-edge response") {
  compare_peel(fixtures::three_star(1, 2, 3), 10.0, 0.01, 1e-10, 1e-6);
}

TEST_CASE("peel_response on the two-level tree") {
  compare_peel(fixtures::two_level(false), 8.0, 0.01, 1e-10, 1e-6);
  compare_peel(fixtures::two_level(true), 8.0, 0.005, 1e-8, 0.02);
}

TEST_CASE("peel_response failure modes") {
  auto star = fixtures::three_star(1, 2, 3);
  auto sheaf = enumerate_sheaves(star).at(0);
  auto R = response_matrix(star, 3.0, 0.01);
  try {
    peel_response(R, sheaf, "c");
    FAIL("expected WindowEmpty");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::WindowEmpty);
  }
  DynFunction y{SingularTrain({{2.0, 1.0, 1}}), SampledFunction::zeros(0.01, 400)};
  DynFunction a{SingularTrain({{1.0, 0.0, 0}}), SampledFunction::zeros(0.01, 400)};
  try {
    deconvolve_response(y, a, 200);
    FAIL("expected LeadingAmplitudeZero");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::LeadingAmplitudeZero);
  }
}
