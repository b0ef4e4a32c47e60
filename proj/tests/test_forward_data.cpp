#include <cmath>
#include <numbers>

#include <Eigen/Dense>
#include <boost/math/special_functions/bessel.hpp>

#include "doctest.h"
#include "leafpeel/error.hpp"
#include "leafpeel/fixtures.hpp"
#include "leafpeel/forward_data.hpp"

using namespace leafpeel;
using std::numbers::pi;

TEST_CASE("tw_matrix of a single edge") {
  auto t = single_edge_tree(1.0, PotentialProfile::zero());
  auto M = tw_matrix(t, -1.0, false);
  CHECK(std::abs(M(0, 0) + 1.0 / std::tanh(1.0)) < 1e-12);
  CHECK(std::abs(M(0, 1) - 1.0 / std::sinh(1.0)) < 1e-12);
  CHECK(std::abs(M(1, 1) + 1.0 / std::tanh(1.0)) < 1e-12);
  auto Mr = tw_matrix(t, -1.0, true);
  CHECK(Mr.rows() == 1);
}

TEST_CASE("tw_matrix of the equilateral star against a hyperbolic ansatz") {
  auto t = fixtures::three_star(1, 1, 1);
  auto M = tw_matrix(t, -1.0, false);
  // u_e(x) = A cosh x + B_e sinh x from the center; unknowns (A, B1, B2, B3).
  const double c = std::cosh(1.0), s = std::sinh(1.0);
  for (int i = 0; i < 3; ++i) {
    Eigen::Matrix4d K = Eigen::Matrix4d::Zero();
    Eigen::Vector4d rhs = Eigen::Vector4d::Zero();
    for (int e = 0; e < 3; ++e) {
      K(e, 0) = c;
      K(e, 1 + e) = s;
      rhs(e) = e == i ? 1.0 : 0.0;
    }
    K(3, 1) = K(3, 2) = K(3, 3) = 1.0;
    Eigen::Vector4d x = K.lu().solve(rhs);
    for (int j = 0; j < 3; ++j) {
      const double outward = -(x(0) * s + x(1 + j) * c);
      CHECK(std::abs(M(i, j) - outward) < 1e-12);
    }
  }
}

TEST_CASE("tw_matrix is symmetric below the spectrum") {
  for (auto t : {fixtures::three_star(1, 2, 3), fixtures::two_level(true), fixtures::caterpillar()}) {
    for (double lambda : {-5.0, -0.5, 0.3}) {
      auto M = tw_matrix(t, lambda, false);
      CHECK((M - M.transpose()).cwiseAbs().maxCoeff() < 1e-10 * M.cwiseAbs().maxCoeff());
    }
    auto Mc = tw_matrix(t, cplx(2.0, 3.0), true);
    CHECK((Mc - Mc.transpose()).cwiseAbs().maxCoeff() < 1e-10 * Mc.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("tw_matrix reports spectrum hits") {
  auto t = single_edge_tree(pi, PotentialProfile::zero());
  CHECK_THROWS_AS(tw_matrix(t, 1.0, false), Error);
}

TEST_CASE("dirichlet spectrum of an interval") {
  auto t = single_edge_tree(pi, PotentialProfile::zero());
  auto sd = dirichlet_spectrum(t, 30.0);
  REQUIRE(sd.eigenvalues.size() == 5);
  for (std::size_t k = 0; k < 5; ++k) {
    const double kk = static_cast<double>(k + 1);
    CHECK(sd.eigenvalues[k] == doctest::Approx(kk * kk).epsilon(1e-10));
    CHECK(std::abs(sd.kappa[k][0]) == doctest::Approx(kk * std::sqrt(2.0 / pi)).epsilon(1e-6));
    CHECK(std::abs(sd.alpha[k][0]) == doctest::Approx(std::sqrt(2.0 / pi)).epsilon(1e-6));
  }
  auto shifted = dirichlet_spectrum(single_edge_tree(pi, PotentialProfile::constant(2.5)), 32.5);
  REQUIRE(shifted.eigenvalues.size() == 5);
  for (std::size_t k = 0; k < 5; ++k)
    CHECK(shifted.eigenvalues[k] == doctest::Approx(sd.eigenvalues[k] + 2.5).epsilon(1e-10));
}

TEST_CASE("dirichlet spectrum of the equilateral star") {
  // Symmetric modes: tan(k) = -k/... reduce to cos(k) * 3 sin... ; antisymmetric modes vanish at the
  // center: sin(k) = 0 with multiplicity two. Symmetric modes solve cos(k) = 0.
  auto t = fixtures::three_star(1, 1, 1);
  auto sd = dirichlet_spectrum(t, 50.0);
  std::vector<double> expected{std::pow(pi / 2, 2), pi * pi, pi * pi, std::pow(1.5 * pi, 2), 4 * pi * pi, 4 * pi * pi};
  REQUIRE(sd.eigenvalues.size() == expected.size());
  for (std::size_t k = 0; k < expected.size(); ++k) CHECK(sd.eigenvalues[k] == doctest::Approx(expected[k]).epsilon(1e-9));
  // The two pi^2 modes are orthonormal: their boundary derivatives have the same total energy.
  double n1 = 0, n2 = 0, dot = 0;
  for (int j = 0; j < 3; ++j) {
    n1 += sd.kappa[1][j] * sd.kappa[1][j];
    n2 += sd.kappa[2][j] * sd.kappa[2][j];
    dot += sd.kappa[1][j] * sd.kappa[2][j];
  }
  CHECK(n1 == doctest::Approx(n2).epsilon(1e-6));
  CHECK(std::abs(dot) < 1e-6 * n1);
}

TEST_CASE("ray trains") {
  auto edge = single_edge_tree(1.0, PotentialProfile::zero());
  auto r11 = ray_singular_train(edge, 0, 0, 3.0);
  REQUIRE(r11.size() == 2);
  CHECK(r11.atoms()[0].time == 0.0);
  CHECK(r11.atoms()[0].coeff == -1.0);
  CHECK(r11.atoms()[1].time == doctest::Approx(2.0));
  CHECK(r11.atoms()[1].coeff == doctest::Approx(-2.0));

  auto star = fixtures::three_star(1, 2, 3);
  auto r12 = ray_singular_train(star, 0, 1, 3.5);
  REQUIRE(r12.size() == 1);
  CHECK(r12.atoms()[0].time == doctest::Approx(3.0));
  CHECK(r12.atoms()[0].coeff == doctest::Approx(4.0 / 3.0));
  CHECK(ray_singular_train(star, 0, 1, 2.9).empty());

  auto tl = fixtures::two_level(true);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      auto a = ray_singular_train(tl, i, j, 7.0), b = ray_singular_train(tl, j, i, 7.0);
      REQUIRE(a.size() == b.size());
      for (std::size_t k = 0; k < a.size(); ++k) {
        CHECK(a.atoms()[k].time == doctest::Approx(b.atoms()[k].time));
        CHECK(a.atoms()[k].coeff == doctest::Approx(b.atoms()[k].coeff));
      }
    }

  RayOptions tight;
  tight.budget = 10;
  CHECK_THROWS_AS(ray_singular_train(tl, 0, 0, 30.0, tight), Error);
}

TEST_CASE("response of a potential-free tree is purely singular") {
  auto star = fixtures::three_star(1, 2, 3);
  auto R = response_matrix(star, 7.0, 0.005);
  REQUIRE(R.size() == 2);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) CHECK(R.at(i, j).regular.max_abs() < 2e-6);
}

TEST_CASE("single edge with constant potential matches the Klein-Gordon kernel") {
  // Before the first reflection r(t) = -sqrt(c) J1(sqrt(c) t) / t.
  for (double c : {0.5, 2.0}) {
    auto t = single_edge_tree(1.0, PotentialProfile::constant(c));
    auto R = response_matrix(t, 2.5, 0.0025, {{}, false});
    const auto& r = R.at(0, 0).regular;
    double err = 0.0;
    for (std::size_t k = 1; k < 790; ++k) {
      const double s = 0.0025 * static_cast<double>(k);
      err = std::max(err, std::abs(r[k] + std::sqrt(c) * boost::math::cyl_bessel_j(1, std::sqrt(c) * s) / s));
    }
    CHECK(err < 1e-4 * c);
    CHECK(r[0] == doctest::Approx(-c / 2).epsilon(1e-4));
    // The reflected front picks up 2 * int q = 2c as a delta atom.
    auto d0 = R.at(0, 0).train.of_order(0);
    REQUIRE(!d0.empty());
    CHECK(d0.atoms()[0].time == doctest::Approx(2.0));
    CHECK(d0.atoms()[0].coeff == doctest::Approx(2.0 * c));
  }
}

TEST_CASE("fourier_of_response") {
  DynFunction one{SingularTrain({{0.7, 1.5, 1}}), SampledFunction::zeros(0.01, 101)};
  const cplx k(1.0, 2.0), I(0.0, 1.0);
  auto v = fourier_of_response(one, k, 1.0);
  CHECK(std::abs(v.value - (-I * k * 1.5 * std::exp(I * k * 0.7))) < 1e-14);
  DynFunction zero{{}, SampledFunction::zeros(0.01, 101)};
  CHECK(std::abs(fourier_of_response(zero, k, 1.0).value) == 0.0);
  CHECK_THROWS_AS(fourier_of_response(zero, cplx(1.0, 0.0), 1.0), Error);

  auto edge = single_edge_tree(1.0, PotentialProfile::zero());
  auto R = response_matrix(edge, 4.0, 0.005, {{}, false});
  auto f = fourier_of_response(R.at(0, 0), cplx(0.0, 2.0), 4.0);
  auto M = tw_matrix(edge, -4.0, false);
  CHECK(std::abs(f.value - M(0, 0)) <= f.bound);

  auto qedge = single_edge_tree(1.0, PotentialProfile::constant(2.0));
  auto Rq = response_matrix(qedge, 6.0, 0.0025, {{}, false});
  auto fq = fourier_of_response(Rq.at(0, 0), cplx(0.0, 2.0), 6.0);
  auto Mq = tw_matrix(qedge, -4.0, false);
  CHECK(std::abs(fq.value - Mq(0, 0)) <= fq.bound + 1e-4);
}
