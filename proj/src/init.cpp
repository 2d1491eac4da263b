#include "eplse/init.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "eplse/circular.hpp"

namespace eplse {

namespace {

struct Spectrum {
  double value = 0.0;  // P(theta)
  double d1 = 0.0;
  double d2 = 0.0;
};

Spectrum spectrum(const VectorXcd& residual, const std::vector<int>& rows, double theta) {
  Complex a(0.0, 0.0), a1(0.0, 0.0), a2(0.0, 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double p = rows[i];
    const Complex term = residual(static_cast<Index>(i)) * std::polar(1.0, -p * theta);
    a += term;
    a1 += Complex(0.0, -p) * term;
    a2 += -p * p * term;
  }
  const double count = static_cast<double>(rows.size());
  Spectrum s;
  s.value = std::norm(a) / count;
  s.d1 = 2.0 * std::real(std::conj(a) * a1) / count;
  s.d2 = 2.0 * (std::norm(a1) + std::real(std::conj(a) * a2)) / count;
  return s;
}

// Index of the largest periodogram value on the grid theta_g = -pi + 2 pi g / G.
// There e^{-j p theta_g} = (-1)^p w^{-(p g mod G)} with w = e^{j 2 pi / G}, so
// one table of roots of unity replaces the per-term sincos.
Index grid_argmax(const VectorXcd& residual, const std::vector<int>& rows,
                  const std::vector<Complex>& roots) {
  const auto G = static_cast<long long>(roots.size());
  std::vector<Complex> signed_residual(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    signed_residual[i] = rows[i] % 2 == 0 ? residual(static_cast<Index>(i))
                                          : -residual(static_cast<Index>(i));
  Index best = 0;
  double best_value = -1.0;
  for (long long g = 0; g < G; ++g) {
    Complex a(0.0, 0.0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const long long k = (static_cast<long long>(rows[i]) * g) % G;
      a += signed_residual[i] * std::conj(roots[static_cast<std::size_t>(k)]);
    }
    const double value = std::norm(a);
    if (value > best_value) {
      best_value = value;
      best = static_cast<Index>(g);
    }
  }
  return best;
}

}  // namespace

VectorXcd pseudo_measurements(const ObservedRows& y, const Channel& ch) {
  if (ch.kind == ChannelKind::kAwgn) return y.y;
  // Flat extrinsic matched to the quantizer's design scale: L = 3 sigma_z / sqrt(2).
  const double limit = ch.quantizer.limit;
  const double vA = clamp_variance(2.0 * limit * limit / 9.0);
  VectorXcd out(y.size());
  for (Index m = 0; m < y.size(); ++m) {
    const PosteriorMoments post = posterior_moments(ch, y, m, Complex(0.0, 0.0), vA);
    const double ext_precision = 1.0 / post.var - 1.0 / vA;
    if (!(ext_precision > 0.0) || !std::isfinite(ext_precision)) {
      out(m) = post.mean;
      continue;
    }
    out(m) = post.mean / (post.var * ext_precision);
  }
  return out;
}

double periodogram(const VectorXcd& residual, const std::vector<int>& rows, double theta) {
  return spectrum(residual, rows, theta).value;
}

InitResult init_periodogram(const ObservedRows& y, Index N, const Channel& ch) {
  if (y.size() < 2) throw InputError("init_periodogram: need at least two observed rows");
  if (N < 1) throw InputError("init_periodogram: N must be >= 1");
  ch.validate();
  y.validate(ch.kind);

  const std::vector<int>& rows = y.indices;
  const Index M = y.size();
  const double count = static_cast<double>(M);
  VectorXcd residual = pseudo_measurements(y, ch);

  InitResult init;
  init.x0 = VectorXcd::Zero(N);
  init.mu0 = ArrayXd::Zero(N);
  init.kappa0 = ArrayXd::Zero(N);
  init.sx0 = ArrayXd::Constant(N, kVarMin);

  const double energy0 = residual.squaredNorm();
  if (!(energy0 > 0.0)) {
    init.sigma_w2_0 = kVarMin;
    init.prior0 = BgPrior::constant(N, kPiMin, Complex(0.0, 0.0), 1.0);
    return init;
  }

  // 4 points per Fourier bin even when N is below the full length
  const Index grid = 4 * std::max<Index>(N, y.full_length);
  std::vector<double> energy{energy0};  // residual energy after k components
  std::vector<double> peak_curvature(static_cast<std::size_t>(N), 0.0);
  std::vector<Complex> roots(static_cast<std::size_t>(grid));
  for (Index g = 0; g < grid; ++g)
    roots[static_cast<std::size_t>(g)] = std::polar(1.0, kTwoPi * static_cast<double>(g) / static_cast<double>(grid));
  for (Index n = 0; n < N; ++n) {
    const Index best = grid_argmax(residual, rows, roots);
    double theta = -kPi + kTwoPi * static_cast<double>(best) / static_cast<double>(grid);
    for (int step = 0; step < 3; ++step) {
      const Spectrum s = spectrum(residual, rows, theta);
      if (!(s.d2 < 0.0)) break;
      theta -= s.d1 / s.d2;
    }
    theta = wrap_angle(theta);
    const Spectrum at_peak = spectrum(residual, rows, theta);
    peak_curvature[static_cast<std::size_t>(n)] = -at_peak.d2;

    Complex amplitude(0.0, 0.0);
    for (Index i = 0; i < M; ++i)
      amplitude += std::polar(1.0, -rows[static_cast<std::size_t>(i)] * theta) * residual(i);
    amplitude /= count;
    for (Index i = 0; i < M; ++i)
      residual(i) -= std::polar(1.0, rows[static_cast<std::size_t>(i)] * theta) * amplitude;

    init.mu0(n) = theta;
    init.x0(n) = amplitude;
    energy.push_back(std::min(residual.squaredNorm(), energy.back()));
  }

  // Model order of the greedy fit by BIC on 2|M| real observations, three
  // real parameters per sinusoid.
  const Index k_max = std::min<Index>(N, (2 * M - 1) / 3);
  const double floor = energy0 * 1e-300;
  Index k_hat = 0;
  double best_bic = std::numeric_limits<double>::infinity();
  for (Index k = 0; k <= k_max; ++k) {
    const double e = std::max(energy[static_cast<std::size_t>(k)], floor);
    const double bic = 2.0 * count * std::log(e / count) +
                       3.0 * static_cast<double>(k) * std::log(2.0 * count);
    if (bic < best_bic) {
      best_bic = bic;
      k_hat = k;
    }
  }
  init.detected = static_cast<int>(k_hat);
  const double noise = std::max(energy[static_cast<std::size_t>(k_hat)] / count, kVarMin);
  init.sigma_w2_0 = noise;
  init.sx0.setConstant(std::max(noise / count, kVarMin));
  for (Index n = 0; n < k_hat; ++n)
    init.kappa0(n) =
        std::min(kappa_from_curvature(peak_curvature[static_cast<std::size_t>(n)] / noise),
                 kKappaMax);

  std::vector<double> power(static_cast<std::size_t>(N));
  for (Index n = 0; n < N; ++n) power[static_cast<std::size_t>(n)] = std::norm(init.x0(n));
  std::vector<double> sorted = power;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted.size() % 2 == 1
                            ? sorted[sorted.size() / 2]
                            : 0.5 * (sorted[sorted.size() / 2 - 1] + sorted[sorted.size() / 2]);
  double sum = 0.0;
  int used = 0;
  for (const double p : power) {
    if (p > median) {
      sum += p;
      ++used;
    }
  }
  if (used == 0) {
    for (const double p : power) sum += p;
    used = static_cast<int>(power.size());
  }
  const double tau0 = std::max(sum / used, kVarMin);
  init.prior0 = BgPrior::constant(N, 0.5, Complex(0.0, 0.0), tau0);
  return init;
}

}  // namespace eplse
