#include "doctest.h"

#include <algorithm>
#include <numeric>
#include <random>

#include "eplse/metrics.hpp"
#include "support/oracles.hpp"

using namespace eplse;

namespace {

VectorXcd random_vector(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g(0.0, 1.0);
  VectorXcd v(n);
  for (int i = 0; i < n; ++i) v(i) = Complex(g(rng), g(rng));
  return v;
}

// Minimum over all assignments of the summed squared wrap distance.
double brute_force_error(const ArrayXd& a, const ArrayXd& b) {
  std::vector<int> perm(static_cast<std::size_t>(a.size()));
  std::iota(perm.begin(), perm.end(), 0);
  double best = INFINITY;
  do {
    double s = 0.0;
    for (Index k = 0; k < a.size(); ++k) {
      const double d = oracle::wrap(a(perm[static_cast<std::size_t>(k)]) - b(k));
      s += d * d;
    }
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::sqrt(best);
}

}  // namespace

TEST_CASE("nmse") {
  std::mt19937_64 rng(1);
  const VectorXcd z = random_vector(rng, 9);
  CHECK(nmse_db(z, z) == kDbFloor);
  CHECK(nmse_db(VectorXcd::Zero(9), z) == doctest::Approx(0.0));
  CHECK(nmse_db(1.1 * z, z) == doctest::Approx(-20.0).epsilon(1e-12));
  CHECK_THROWS_AS(nmse_db(z, VectorXcd::Zero(9)), InputError);
  CHECK_THROWS_AS(nmse_db(z, VectorXcd::Zero(3)), InputError);
}

TEST_CASE("debiased nmse") {
  std::mt19937_64 rng(2);
  const VectorXcd z = random_vector(rng, 8);
  CHECK(dnmse_db(Complex(0.0, 2.0) * z, z) < -250.0);
  VectorXcd a = VectorXcd::Zero(4), b = VectorXcd::Zero(4);
  a(0) = 1.0;
  b(1) = 1.0;
  CHECK(dnmse_db(a, b) == doctest::Approx(0.0));
  CHECK(dnmse_db(VectorXcd::Zero(4), b) == doctest::Approx(0.0));
}

TEST_CASE("debiased nmse is the minimum over complex scales") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 30; ++i) {
    const VectorXcd z = random_vector(rng, 10);
    const VectorXcd zh = z + 0.5 * random_vector(rng, 10);
    const double d = dnmse_db(zh, z);
    CHECK(d <= nmse_db(zh, z) + 1e-12);
    double grid_best = INFINITY;
    for (double re = -0.5; re <= 2.0; re += 0.01)
      for (double im = -1.0; im <= 1.0; im += 0.01)
        grid_best = std::min(grid_best, nmse_db(Complex(re, im) * zh, z));
    CHECK(d <= grid_best + 1e-12);
    CHECK(d >= grid_best - 0.05);
  }
}

TEST_CASE("frequency error") {
  ArrayXd t(3);
  t << -2.0, 0.5, 3.0;
  ArrayXd p(3);
  p << 3.0, -2.0, 0.5;
  CHECK(*freq_error_db(p, t) == kDbFloor);
  ArrayXd one(1), shifted(1);
  one << 1.0;
  shifted << 1.01;
  CHECK(*freq_error_db(shifted, one) == doctest::Approx(-40.0).epsilon(1e-9));
  ArrayXd c1(2), c2(2);
  c1 << -0.1, 0.1;
  c2 << 0.1, -0.1;
  CHECK(*freq_error_db(c1, c2) == kDbFloor);
  CHECK_FALSE(freq_error_db(c1, one).has_value());
  // wrap-around: pi - 0.01 against -pi + 0.01 is 0.02 apart
  ArrayXd w1(1), w2(1);
  w1 << kPi - 0.01;
  w2 << -kPi + 0.01;
  CHECK(*freq_error_db(w1, w2) == doctest::Approx(20.0 * std::log10(0.02)).epsilon(1e-9));
}

TEST_CASE("frequency error matches exhaustive assignment") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-kPi, kPi);
  for (int k = 1; k <= 7; ++k) {
    for (int rep = 0; rep < 20; ++rep) {
      ArrayXd a(k), b(k);
      for (int i = 0; i < k; ++i) {
        a(i) = u(rng);
        b(i) = u(rng);
      }
      CHECK(*freq_error_db(a, b) ==
            doctest::Approx(20.0 * std::log10(brute_force_error(a, b))).epsilon(1e-12));
    }
  }
}

TEST_CASE("metrics are invariant to relabeling and to 2 pi shifts") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-kPi, kPi);
  for (int rep = 0; rep < 30; ++rep) {
    ArrayXd a(5), b(5);
    for (int i = 0; i < 5; ++i) {
      a(i) = u(rng);
      b(i) = a(i) + 0.05 * u(rng);
    }
    const double base = *freq_error_db(a, b);
    ArrayXd ar = a.reverse(), br = b;
    std::swap(br(0), br(3));
    CHECK(*freq_error_db(ar, b) == doctest::Approx(base).epsilon(1e-12));
    CHECK(*freq_error_db(a, br) == doctest::Approx(base).epsilon(1e-12));
    CHECK(*freq_error_db(a + kTwoPi, b) == doctest::Approx(base).epsilon(1e-9));
    CHECK(*freq_error_db(a - 3 * kTwoPi, b + kTwoPi) == doctest::Approx(base).epsilon(1e-9));
  }
}
