#include "doctest.h"

#include <random>

#include "eplse/circular.hpp"
#include "support/oracles.hpp"

using namespace eplse;

namespace {

double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

std::vector<double> kappa_grid() {
  std::vector<double> out{0.0, 1e-8, 1e-6, 1e-3, 0.01, 0.1, 0.5};
  for (double k = 1.0; k <= 500.0; k *= 1.17) out.push_back(k);
  for (double k : {1.999, 2.0, 2.001, 4.999, 5.0, 9.99, 10.0, 19.9, 20.0, 34.99, 35.0, 49.99, 50.0,
                   50.01, 120.0, 499.0, 500.0})
    out.push_back(k);
  return out;
}

}  // namespace

TEST_CASE("bessel ratio trivial orders") {
  CHECK(bessel_ratio(0, 3.7) == 1.0);
  CHECK(bessel_ratio(2, 0.0) == 0.0);
  CHECK(bessel_ratio(0, 0.0) == 1.0);
  CHECK_THROWS_AS(bessel_ratio(-1, 1.0), InputError);
}

TEST_CASE("bessel ratio matches high precision values") {
  // reference values from a 30-digit evaluation
  CHECK(rel_err(bessel_ratio(1, 2.0), 0.69777465796400798201) < 1e-13);
  CHECK(rel_err(bessel_ratio(1, 0.5), 0.24249961258080194535) < 1e-13);
  CHECK(rel_err(bessel_ratio(3, 10.0), 0.62448781203123363569) < 1e-13);
  CHECK(rel_err(bessel_ratio(64, 500.0), 0.01666396952430671698) < 1e-11);
  CHECK(rel_err(bessel_ratio(1, 500.0), 0.99899949899686193252) < 1e-13);
  CHECK(rel_err(bessel_ratio(5, 1e-3), 2.6041661241320415967e-19) < 1e-11);
  CHECK(rel_err(bessel_ratio(2, 50.0), 0.9604020413048600899) < 1e-13);
  CHECK(rel_err(bessel_ratio_complement(1e5), 5.0000125001250019532e-6) < 1e-11);
  CHECK(rel_err(bessel_ratio_complement(50.0), 0.010051032621502247407) < 1e-11);
}

TEST_CASE("bessel ratio matches the power series over the working range") {
  double worst = 0.0;
  for (const double kappa : kappa_grid()) {
    for (int order = 0; order <= 64; ++order) {
      const double expected = oracle::bessel_ratio(order, kappa);
      const double got = bessel_ratio(order, kappa);
      if (expected == 0.0) {
        CHECK(got == 0.0);
        continue;
      }
      worst = std::max(worst, rel_err(got, expected));
    }
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("complement of the first-order ratio keeps relative accuracy") {
  for (const double kappa : kappa_grid()) {
    if (kappa == 0.0) continue;
    const long double i0 = oracle::scaled_bessel_i(0, kappa);
    const long double i1 = oracle::scaled_bessel_i(1, kappa);
    const double expected = static_cast<double>((i0 - i1) / i0);
    CHECK(rel_err(bessel_ratio_complement(kappa), expected) < 1e-10);
  }
}

TEST_CASE("bessel ratio lies in [0,1] and increases in kappa") {
  for (int order : {1, 2, 5, 20, 40, 64}) {
    double previous = -1.0;
    for (double kappa = 0.0; kappa <= 2000.0; kappa = kappa * 1.3 + 0.01) {
      const double r = bessel_ratio(order, kappa);
      CHECK(r >= 0.0);
      CHECK(r < 1.0);
      if (kappa > 0.0 && r > 1e-280) CHECK(r > previous);
      previous = r;
    }
  }
  CHECK(bessel_ratio(1, 1e7) < 1.0);
}

TEST_CASE("circular moment") {
  CHECK(std::abs(circular_moment(VonMisesMsg::uniform(), 1)) == 0.0);
  const auto sharp = VonMisesMsg::from_polar(kPi / 2, 1e6);
  CHECK(std::abs(circular_moment(sharp, 1) - Complex(0.0, 1.0)) < 1e-6);

  const auto msg = VonMisesMsg::from_polar(0.3, 2.0);
  const Complex expected = 0.69777465796400798 * std::polar(1.0, 0.3);
  CHECK(std::abs(circular_moment(msg, 1) - expected) < 1e-13);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> angle(-kPi, kPi);
  for (int i = 0; i < 50; ++i) {
    const auto m = VonMisesMsg::from_polar(angle(rng), std::exp(angle(rng) * 2));
    for (int order : {1, 3, 17, 40}) {
      CHECK(std::abs(circular_moment(m, order)) == doctest::Approx(bessel_ratio(order, m.kappa())).epsilon(1e-15));
    }
  }
}

TEST_CASE("circular moment agrees with quadrature against the density") {
  for (const double kappa : {0.1, 1.0, 10.0, 100.0}) {
    for (const int order : {1, 20, 40}) {
      const double mu = 0.7;
      const Complex got = circular_moment(VonMisesMsg::from_polar(mu, kappa), order);
      const auto expected = oracle::vm_moment_quadrature(mu, kappa, order, 100000);
      CHECK(std::abs(got - expected) < 1e-8);
    }
  }
}

TEST_CASE("product and quotient of von Mises densities") {
  const VonMisesMsg a{Complex(1.0, 0.0)};
  const VonMisesMsg b = VonMisesMsg::from_polar(kPi, 1.0);
  CHECK(std::abs(vm_multiply(a, b).eta) < 1e-15);

  const auto c = vm_multiply(VonMisesMsg::from_polar(0.4, 2.0), VonMisesMsg::from_polar(0.4, 3.0));
  CHECK(c.kappa() == doctest::Approx(5.0));
  CHECK(c.mu() == doctest::Approx(0.4));

  const auto self = VonMisesMsg::from_polar(1.0, 5.0);
  CHECK(vm_divide(self, self).is_uniform());
  CHECK(vm_divide(self, VonMisesMsg::uniform()).eta == self.eta);

  // product direction against the first circular moment of the product density
  const auto p = vm_multiply(VonMisesMsg::from_polar(0.5, 2.0), VonMisesMsg::from_polar(1.5, 1.0));
  long double re = 0, im = 0;
  for (int i = 0; i < 100000; ++i) {
    const double t = -kPi + kTwoPi * i / 100000.0;
    const double w = std::exp(2.0 * std::cos(t - 0.5) + std::cos(t - 1.5));
    re += w * std::cos(t);
    im += w * std::sin(t);
  }
  CHECK(p.mu() == doctest::Approx(std::atan2(static_cast<double>(im), static_cast<double>(re))).epsilon(1e-12));
  CHECK(std::abs(p.eta - (std::polar(2.0, 0.5) + std::polar(1.0, 1.5))) < 1e-15);
}

TEST_CASE("natural-parameter algebra is a commutative group") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 3.0);
  for (int i = 0; i < 100; ++i) {
    const VonMisesMsg a{Complex(g(rng), g(rng))};
    const VonMisesMsg b{Complex(g(rng), g(rng))};
    const VonMisesMsg c{Complex(g(rng), g(rng))};
    CHECK(std::abs(vm_multiply(a, b).eta - vm_multiply(b, a).eta) < 1e-14);
    CHECK(std::abs(vm_multiply(vm_multiply(a, b), c).eta - vm_multiply(a, vm_multiply(b, c)).eta) <
          1e-12);
    CHECK(std::abs(vm_divide(vm_multiply(a, b), b).eta - a.eta) < 1e-12);
  }
}

TEST_CASE("mean direction is reported in [-pi, pi)") {
  CHECK(VonMisesMsg::from_polar(kPi, 1.0).mu() == doctest::Approx(-kPi));
  for (double t = -10.0; t < 10.0; t += 0.37) {
    const double mu = VonMisesMsg::from_polar(t, 2.0).mu();
    CHECK(mu >= -kPi);
    CHECK(mu < kPi);
  }
}

TEST_CASE("a_inverse") {
  CHECK(a_inverse(0.0) == 0.0);
  CHECK(a_inverse(oracle::bessel_ratio(1, 5.0)) == doctest::Approx(5.0).epsilon(1e-9));
  CHECK(a_inverse(0.69777) == doctest::Approx(2.0).epsilon(1e-4));
  CHECK(a_inverse(0.69777465796400798) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK_THROWS(a_inverse(1.5));
}

TEST_CASE("a_inverse inverts the series forward map") {
  double worst = 0.0;
  for (double kappa = 1e-6; kappa <= 500.0; kappa *= 1.21) {
    const double r = oracle::bessel_ratio(1, kappa);
    worst = std::max(worst, rel_err(a_inverse(r), kappa));
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("curvature to concentration mapping") {
  CHECK(kappa_from_curvature(0.0) == 0.0);
  CHECK(kappa_from_curvature(-3.0) == 0.0);
  for (double c : {0.01, 0.3, 1.0, 7.0, 100.0, 1e4}) {
    CHECK(kappa_from_curvature(c) ==
          doctest::Approx(oracle::a_inverse(std::exp(-1.0 / (2.0 * c)))).epsilon(1e-8));
  }
  // the Laplace-matched concentration approaches the curvature for sharp densities
  CHECK(kappa_from_curvature(1e5) == doctest::Approx(1e5).epsilon(1e-4));
  CHECK(kappa_from_curvature(1e12) <= kKappaMax);
}

TEST_CASE("projection of a von Mises density is stationary") {
  const double mu = 0.8, kappa = 4.0;
  auto grad = [&](double t) { return kappa * std::sin(t - mu); };
  auto hess = [&](double t) { return kappa * std::cos(t - mu); };
  const auto out = vm_project_laplace(grad, hess, mu, 1, 0.0);
  CHECK(out.mu() == doctest::Approx(mu).epsilon(1e-15));
  CHECK(out.kappa() == doctest::Approx(a_inverse(std::exp(-1.0 / (2.0 * kappa)))).epsilon(1e-12));
}

TEST_CASE("projection is local to the starting basin") {
  // g = -(3 cos(theta) + 2 cos(theta - 2.5)) + ... : two maxima of f, take the shallower one
  auto f = [](long double t) { return 3.0L * std::cos(2.0L * t) + 0.8L * std::cos(t); };
  auto grad = [](double t) { return 6.0 * std::sin(2.0 * t) + 0.8 * std::sin(t); };
  auto hess = [](double t) { return 12.0 * std::cos(2.0 * t) + 0.8 * std::cos(t); };
  // f has maxima at 0 (deeper) and at pi (shallower)
  const auto out = vm_project_laplace(grad, hess, 3.0, 30, 0.0);
  CHECK(std::abs(wrap_angle(out.mu() - kPi)) < 1e-10);
  const auto ref = oracle::grid_projection(f, 3.0);
  CHECK(std::abs(wrap_angle(out.mu() - ref.mode)) < 1e-6);
}

TEST_CASE("projection matches the grid and finite-difference oracle") {
  auto f = [](long double t) { return 10.0L * std::cos(t) + 3.0L * std::cos(2.0L * t + 0.4L); };
  auto grad = [](double t) { return 10.0 * std::sin(t) + 6.0 * std::sin(2.0 * t + 0.4); };
  auto hess = [](double t) { return 10.0 * std::cos(t) + 12.0 * std::cos(2.0 * t + 0.4); };
  const auto out = vm_project_laplace(grad, hess, 0.0, 30, 0.0);
  const auto ref = oracle::grid_projection(f, 0.0);
  CHECK(std::abs(wrap_angle(out.mu() - ref.mode)) < 1e-4);
  CHECK(rel_err(out.kappa(), ref.kappa) < 1e-4);
}

TEST_CASE("projection falls back on non-positive curvature") {
  auto grad = [](double t) { return -std::sin(t); };
  auto hess = [](double t) { return -std::cos(t); };
  const auto out = vm_project_laplace(grad, hess, 0.0, 1, 0.25);
  CHECK(out.mu() == doctest::Approx(0.0));
  CHECK(out.kappa() == doctest::Approx(0.25));
}

TEST_CASE("concentration cap") {
  const auto big = VonMisesMsg::from_polar(0.2, 5e7);
  const auto capped = cap_concentration(big);
  CHECK(capped.kappa() == doctest::Approx(kKappaMax));
  CHECK(capped.mu() == doctest::Approx(0.2));
  CHECK(bessel_ratio(1, kKappaMax) > 0.9999999);
}

TEST_CASE("kernels also instantiate in long double") {
  const long double r = bessel_ratio<long double>(1, 2.0L);
  CHECK(static_cast<double>(r) == doctest::Approx(0.69777465796400798).epsilon(1e-15));
  CHECK(static_cast<double>(a_inverse<long double>(r)) == doctest::Approx(2.0).epsilon(1e-12));
}
