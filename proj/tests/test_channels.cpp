#include "doctest.h"

#include <random>

#include "eplse/channels.hpp"
#include "support/oracles.hpp"

using namespace eplse;

namespace {

ObservedRows one_code(int re, int im) {
  ObservedRows y;
  y.indices = {0};
  y.full_length = 1;
  y.codes.re = Eigen::ArrayXi::Constant(1, re);
  y.codes.im = Eigen::ArrayXi::Constant(1, im);
  return y;
}

ObservedRows one_sample(Complex v) {
  ObservedRows y;
  y.indices = {0};
  y.full_length = 1;
  y.y = VectorXcd::Constant(1, v);
  return y;
}

}  // namespace

TEST_CASE("sign quantizer") {
  VectorXcd v(1);
  v << Complex(0.7, -0.2);
  const auto codes = quantize(v, 1, 1.0);
  CHECK(codes.re(0) == 1);
  CHECK(codes.im(0) == 0);
  const Quantizer q(1, 1.0);
  CHECK(q.cell_bounds(1).first == 0.0);
  CHECK(std::isinf(q.cell_bounds(1).second));
}

TEST_CASE("two-bit cells") {
  const Quantizer q(2, 1.0);
  CHECK(q.cell_of(-0.6) == 0);
  CHECK(std::isinf(q.cell_bounds(0).first));
  CHECK(q.cell_bounds(0).second == -0.5);
  CHECK(q.cell_bounds(1) == std::pair{-0.5, 0.0});
  CHECK(q.cell_bounds(2) == std::pair{0.0, 0.5});
  CHECK(q.cell_of(0.0) == 2);
  CHECK(q.cell_of(5.0) == 3);
}

TEST_CASE("three-bit cells agree with a brute-force search") {
  const Quantizer q(3, 3.0);
  CHECK(q.width() == doctest::Approx(0.75));
  CHECK(q.cell_of(2.99) == q.levels() - 1);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int i = 0; i < 2000; ++i) {
    const double v = u(rng);
    int expected = -1;
    for (int c = 0; c < q.levels(); ++c) {
      const auto [lo, hi] = q.cell_bounds(c);
      if (v >= lo && v < hi) expected = c;
    }
    CHECK(q.cell_of(v) == expected);
  }
}

TEST_CASE("quantizer input checks") {
  CHECK_THROWS_AS(Quantizer(0, 1.0), InputError);
  CHECK_THROWS_AS(Quantizer(2, 0.0), InputError);
  CHECK_THROWS_AS(Quantizer(2, 1.0).cell_bounds(4), InputError);
}

TEST_CASE("Gaussian channel posterior") {
  const auto ch = Channel::awgn(1.0);
  const auto post = posterior_moments(ch, one_sample(Complex(2.0, 0.0)), 0, Complex(0.0, 0.0), 1.0);
  CHECK(std::abs(post.mean - Complex(1.0, 0.0)) < 1e-15);
  CHECK(post.var == doctest::Approx(0.5));

  const auto flat = posterior_moments(ch, one_sample(Complex(2.0, -1.0)), 0, Complex(5.0, 5.0), 1e10);
  CHECK(std::abs(flat.mean - Complex(2.0, -1.0)) < 1e-8);
  CHECK(flat.var == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("Gaussian channel precision addition") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.01, 5.0);
  for (int i = 0; i < 100; ++i) {
    const double s2 = u(rng), vA = u(rng);
    const auto post = posterior_moments(Channel::awgn(s2), one_sample(Complex(u(rng), -u(rng))), 0,
                                        Complex(u(rng), 0.0), vA);
    CHECK(1.0 / post.var == doctest::Approx(1.0 / vA + 1.0 / s2).epsilon(1e-15));
    CHECK(post.var <= vA + s2);
    CHECK(post.var > 0.0);
  }
}

TEST_CASE("one-bit posterior against quadrature") {
  const auto ch = Channel::quantized(1, 1.0, 1.0, false);
  const auto post = posterior_moments(ch, one_code(1, 1), 0, Complex(0.0, 0.0), 1.0);
  const auto q = oracle::interval_posterior_quadrature(0.0, 0.5, 0.5, 0.0, INFINITY);
  CHECK(std::abs(post.mean - Complex(q.mean, q.mean)) < 1e-6);
  CHECK(std::abs(post.var - 2.0 * q.var) < 1e-6);
}

TEST_CASE("quantized posterior against per-dimension quadrature") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const int bits = 1 + i % 3;
    const double limit = 0.5 + 2.0 * u(rng);
    const double s2 = 0.01 + u(rng);
    const double vA = 0.05 + 2.0 * u(rng);
    const Complex zA(g(rng), g(rng));
    const auto ch = Channel::quantized(bits, limit, s2, true);
    const int levels = 1 << bits;
    const int cr = static_cast<int>(u(rng) * levels), ci = static_cast<int>(u(rng) * levels);
    const auto post = posterior_moments(ch, one_code(cr, ci), 0, zA, vA);
    REQUIRE_FALSE(post.underflow);
    const auto [rl, rh] = ch.quantizer.cell_bounds(cr);
    const auto [il, ih] = ch.quantizer.cell_bounds(ci);
    const auto qr = oracle::interval_posterior_quadrature(zA.real(), vA / 2, s2 / 2, rl, rh);
    const auto qi = oracle::interval_posterior_quadrature(zA.imag(), vA / 2, s2 / 2, il, ih);
    CHECK(std::abs(post.mean.real() - qr.mean) < 1e-6);
    CHECK(std::abs(post.mean.imag() - qi.mean) < 1e-6);
    CHECK(std::abs(post.var - (qr.var + qi.var)) < 1e-6);
    CHECK(post.var > 0.0);
    CHECK(post.var <= vA + s2);
  }
}

TEST_CASE("cell posteriors average back to the prior") {
  for (const int bits : {1, 2, 3}) {
    const Quantizer q(bits, 1.3);
    const double mean = 0.4, var = 0.7, noise = 0.2;
    double mass = 0.0, first = 0.0, second = 0.0;
    for (int c = 0; c < q.levels(); ++c) {
      const auto [lo, hi] = q.cell_bounds(c);
      const auto t = interval_posterior(mean, var, noise, lo, hi);
      const double w = std::exp(t.log_mass);
      mass += w;
      first += w * t.mean;
      second += w * (t.var + t.mean * t.mean);
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(first - mean) < 1e-8);
    CHECK(std::abs(second - (var + mean * mean)) < 1e-8);
  }
}

TEST_CASE("far tail cells stay finite") {
  for (const double mean : {-40.0, -12.0, 12.0, 40.0}) {
    const auto t = interval_posterior(mean, 1.0, 0.01, 0.0, INFINITY);
    if (t.underflow) continue;
    CHECK(std::isfinite(t.mean));
    CHECK(t.var > 0.0);
    CHECK(t.var <= 1.0);
    // the cell pulls the posterior toward it, but noise lets z sit slightly below 0
    CHECK(t.mean >= mean);
    CHECK(t.mean > -1.0);
  }
  // against quadrature where the posterior mass is inside the default window
  for (const double mean : {-3.0, 3.0}) {
    const auto t = interval_posterior(mean, 1.0, 0.01, 0.0, INFINITY);
    const auto q = oracle::interval_posterior_quadrature(mean, 1.0, 0.01, 0.0, INFINITY);
    CHECK(std::abs(t.mean - q.mean) < 1e-6);
    CHECK(std::abs(t.var - q.var) < 1e-6);
  }
  const auto inside = interval_posterior(30.0, 1.0, 0.01, 0.0, INFINITY);
  CHECK(inside.mean == doctest::Approx(30.0).epsilon(1e-9));
}

TEST_CASE("erfcx") {
  for (double x : {-3.0, -0.5, 0.0, 0.7, 3.0, 10.0, 24.9}) {
    const long double expected = std::exp(static_cast<long double>(x) * x) * std::erfc(static_cast<long double>(x));
    CHECK(erfcx(x) == doctest::Approx(static_cast<double>(expected)).epsilon(1e-13));
  }
  // asymptotic regime: erfcx(x) ~ 1 / (x sqrt(pi)) (1 - 1/(2x^2) + 3/(4x^4))
  for (double x : {26.0, 100.0, 1e4}) {
    const double series = 1.0 / (x * std::sqrt(kPi)) * (1.0 - 0.5 / (x * x) + 0.75 / std::pow(x, 4));
    CHECK(erfcx(x) == doctest::Approx(series).epsilon(1e-9));
  }
}

TEST_CASE("noise variance EM update") {
  VectorXcd yt(2), zp = VectorXcd::Zero(2);
  yt << Complex(1.0, 0.0), Complex(0.0, 1.0);
  VectorXd vp(2);
  vp << 0.5, 0.5;
  CHECK(em_noise_variance(yt, zp, vp) == doctest::Approx(1.5));
  CHECK(em_noise_variance(yt, yt, VectorXd::Zero(2)) == kVarMin);
  CHECK(em_noise_variance(yt, zp, VectorXd::Zero(2)) == doctest::Approx(1.0));

  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 1.0);
  VectorXcd a(7), b(7);
  VectorXd v(7);
  for (int i = 0; i < 7; ++i) {
    a(i) = Complex(g(rng), g(rng));
    b(i) = Complex(g(rng), g(rng));
    v(i) = std::abs(g(rng));
  }
  const double base = em_noise_variance(a, b, v);
  std::vector<int> perm{3, 0, 6, 1, 5, 2, 4};
  VectorXcd pa(7), pb(7);
  VectorXd pv(7);
  for (int i = 0; i < 7; ++i) {
    pa(i) = a(perm[i]);
    pb(i) = b(perm[i]);
    pv(i) = v(perm[i]);
  }
  CHECK(em_noise_variance(pa, pb, pv) == doctest::Approx(base).epsilon(1e-15));
}

TEST_CASE("observed rows validation") {
  ObservedRows y = one_sample(Complex(1.0, 0.0));
  CHECK_NOTHROW(y.validate(ChannelKind::kAwgn));
  CHECK_THROWS_AS(y.validate(ChannelKind::kQuantized), InputError);
  y.indices = {2};
  CHECK_THROWS_AS(y.validate(ChannelKind::kAwgn), InputError);
  CHECK_THROWS_AS(Channel::awgn(0.0), InputError);
}
