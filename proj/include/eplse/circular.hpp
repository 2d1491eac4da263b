#pragma once

// Von Mises kernel: natural-parameter algebra, Bessel-ratio circular moments
// and the Laplace-style projection of a circular density onto a von Mises.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <string>
#include <type_traits>

#include "eplse/types.hpp"

namespace eplse {

/// Von Mises density proportional to exp(Re{conj(eta) e^{j theta}}),
/// i.e. mean direction arg(eta) and concentration |eta|.
template <typename Scalar>
struct VonMises {
  std::complex<Scalar> eta{0, 0};

  static VonMises from_polar(Scalar mu, Scalar kappa) {
    return VonMises{std::polar(kappa, mu)};
  }
  static VonMises uniform() { return VonMises{}; }

  /// Mean direction in [-pi, pi); 0 for the uniform density.
  Scalar mu() const { return wrap_angle(std::arg(eta)); }
  Scalar kappa() const { return std::abs(eta); }
  bool is_uniform() const { return eta == std::complex<Scalar>(0, 0); }
};

using VonMisesMsg = VonMises<double>;

namespace detail {

// I_nu(x) / I_{nu-1}(x) for nu >= 1, x > 0, from Perron's continued fraction
//   x / (2nu + x - (2nu+1)x / (2nu+1+2x - (2nu+3)x / (2nu+2+2x - ...)))
// evaluated with the modified Lentz scheme. Converges in a few dozen terms
// uniformly in x, unlike the Gauss fraction which needs O(x) terms.
// Also returns the tail t (the nested fraction) so callers can form
// 1 - I_1/I_0 = (2 - t) / (2 + x - t) without cancellation.
template <typename Scalar>
Scalar perron_ratio(int nu, Scalar x, Scalar* tail = nullptr) {
  const Scalar tiny = std::numeric_limits<Scalar>::min() * Scalar(1e10);
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  const Scalar two_nu = Scalar(2 * nu);
  // t = a1 / (b1 - a2 / (b2 - ...)), a_k = (2nu+2k-1)x, b_k = 2nu+k+2x
  // Lentz on f = b1 + (-a2)/(b2 + (-a3)/(b3 + ...)), t = a1 / f.
  Scalar f = two_nu + Scalar(1) + Scalar(2) * x;
  Scalar c = f;
  Scalar d = 0;
  for (int k = 2; k < 10000; ++k) {
    const Scalar a = -(two_nu + Scalar(2 * k - 1)) * x;
    const Scalar b = two_nu + Scalar(k) + Scalar(2) * x;
    d = b + a * d;
    if (std::abs(d) < tiny) d = tiny;
    c = b + a / c;
    if (std::abs(c) < tiny) c = tiny;
    d = Scalar(1) / d;
    const Scalar delta = c * d;
    f *= delta;
    if (std::abs(delta - Scalar(1)) < eps) break;
  }
  const Scalar t = (two_nu + Scalar(1)) * x / f;
  if (tail) *tail = t;
  return x / (two_nu + x - t);
}

// 1 - I_1/I_0 on (0, 50) from piecewise Chebyshev fits to the continued
// fraction, built once. Used on the per-edge hot path of the engine.
class ComplementTable {
 public:
  static const ComplementTable& instance() {
    static const ComplementTable table;
    return table;
  }
  static constexpr double kUpper = 50.0;

  double operator()(double kappa) const {
    int piece = 0;
    while (kappa >= kBreaks[piece + 1]) ++piece;
    const double a = kBreaks[piece], b = kBreaks[piece + 1];
    const double t = (2.0 * kappa - a - b) / (b - a);
    const auto& c = coeffs_[piece];
    double b1 = 0.0, b2 = 0.0;
    for (int k = kDegree; k >= 1; --k) {
      const double next = 2.0 * t * b1 - b2 + c[k];
      b2 = b1;
      b1 = next;
    }
    return t * b1 - b2 + c[0];
  }

 private:
  static constexpr int kPieces = 6;
  static constexpr int kDegree = 24;
  static constexpr double kBreaks[kPieces + 1] = {0.0, 2.0, 5.0, 10.0, 20.0, 35.0, kUpper};

  static double exact(double kappa) {
    if (kappa == 0.0) return 1.0;
    double tail = 0.0;
    perron_ratio(1, kappa, &tail);
    return (2.0 - tail) / (2.0 + kappa - tail);
  }

  ComplementTable() {
    constexpr int n = kDegree + 1;
    for (int piece = 0; piece < kPieces; ++piece) {
      const double a = kBreaks[piece], b = kBreaks[piece + 1];
      double values[n];
      for (int j = 0; j < n; ++j) {
        const double node = std::cos(std::numbers::pi * (j + 0.5) / n);
        values[j] = exact(0.5 * (a + b) + 0.5 * (b - a) * node);
      }
      for (int k = 0; k < n; ++k) {
        double sum = 0.0;
        for (int j = 0; j < n; ++j)
          sum += values[j] * std::cos(std::numbers::pi * k * (j + 0.5) / n);
        coeffs_[piece][k] = (k == 0 ? 1.0 : 2.0) * sum / n;
      }
    }
  }

  double coeffs_[kPieces][kDegree + 1] = {};
};

}  // namespace detail

/// I_order(kappa) / I_0(kappa). Chains the backward recurrence
/// I_{v-1}/I_v = 2v/kappa + I_{v+1}/I_v from a continued-fraction start,
/// so no unscaled Bessel value is ever formed.
template <typename Scalar>
Scalar bessel_ratio(int order, Scalar kappa) {
  if (order < 0) throw InputError("bessel_ratio: negative order");
  if (!std::isfinite(kappa) || kappa < Scalar(0))
    throw InputError("bessel_ratio: kappa must be finite and >= 0");
  if (order == 0) return Scalar(1);
  if (kappa == Scalar(0)) return Scalar(0);
  Scalar r = detail::perron_ratio(order, kappa);  // I_p / I_{p-1}
  Scalar product = r;
  for (int v = order - 1; v >= 1; --v) {
    r = kappa / (Scalar(2 * v) + kappa * r);  // I_v / I_{v-1}
    product *= r;
  }
  return product;
}

/// 1 - I_1(kappa)/I_0(kappa), accurate for large kappa.
template <typename Scalar>
Scalar bessel_ratio_complement(Scalar kappa) {
  if (!std::isfinite(kappa) || kappa < Scalar(0))
    throw InputError("bessel_ratio_complement: kappa must be finite and >= 0");
  if (kappa == Scalar(0)) return Scalar(1);
  if (kappa >= Scalar(50)) {
    // Asymptotic expansion from the large-argument series of I_0 and I_1;
    // relative error below 3e-12 on this range.
    static constexpr Scalar c[] = {Scalar(1) / 2,         Scalar(1) / 8,      Scalar(1) / 8,
                                   Scalar(25) / 128,      Scalar(13) / 32,    Scalar(1073) / 1024,
                                   Scalar(103) / 32,      Scalar(375733) / 32768};
    const Scalar u = Scalar(1) / kappa;
    Scalar sum = 0;
    for (int i = 7; i >= 0; --i) sum = sum * u + c[i];
    return sum * u;
  }
  if constexpr (std::is_same_v<Scalar, double>) {
    return detail::ComplementTable::instance()(kappa);
  } else {
    Scalar tail = 0;
    detail::perron_ratio(1, kappa, &tail);
    return (Scalar(2) - tail) / (Scalar(2) + kappa - tail);
  }
}

/// E[e^{j order theta}] = e^{j order mu} I_order(kappa)/I_0(kappa).
template <typename Scalar>
std::complex<Scalar> circular_moment(const VonMises<Scalar>& msg, int order) {
  const Scalar rho = bessel_ratio(order, msg.kappa());
  if (rho == Scalar(0)) return {0, 0};
  return std::polar(rho, Scalar(order) * std::arg(msg.eta));
}

template <typename Scalar>
VonMises<Scalar> vm_multiply(const VonMises<Scalar>& a, const VonMises<Scalar>& b) {
  return VonMises<Scalar>{a.eta + b.eta};
}

template <typename Scalar>
VonMises<Scalar> vm_divide(const VonMises<Scalar>& num, const VonMises<Scalar>& den) {
  return VonMises<Scalar>{num.eta - den.eta};
}

/// Rescales eta so that kappa <= kKappaMax.
template <typename Scalar>
VonMises<Scalar> cap_concentration(const VonMises<Scalar>& msg) {
  const Scalar k = msg.kappa();
  if (k <= Scalar(kKappaMax)) return msg;
  return VonMises<Scalar>{msg.eta * (Scalar(kKappaMax) / k)};
}

/// Solves 1 - A(kappa) = complement for kappa, where A = I_1/I_0.
/// Working on the complement keeps full precision when A is close to 1.
template <typename Scalar>
Scalar a_inverse_complement(Scalar complement) {
  if (!(complement > Scalar(0)) || complement > Scalar(1))
    throw InputError("a_inverse: argument must satisfy 0 <= r < 1");
  if (complement == Scalar(1)) return Scalar(0);
  static const Scalar floor_complement = bessel_ratio_complement(Scalar(kKappaMax));
  if (complement <= floor_complement) return Scalar(kKappaMax);

  const Scalar r = Scalar(1) - complement;
  Scalar kappa;
  if (complement < Scalar(0.03)) {
    // Invert 1 - A(k) = u/2 + u^2/8 + u^3/8 + 25u^4/128 + O(u^5), u = 1/k.
    Scalar u = Scalar(2) * complement;
    for (int it = 0; it < 6; ++it)
      u = Scalar(2) * (complement - u * u * (Scalar(1) / 8 + u / 8 + Scalar(25) * u * u / 128));
    kappa = Scalar(1) / u;
  } else if (r < Scalar(0.53)) {
    kappa = Scalar(2) * r + r * r * r + Scalar(5) * std::pow(r, 5) / Scalar(6);
  } else if (r < Scalar(0.85)) {
    kappa = Scalar(-0.4) + Scalar(1.39) * r + Scalar(0.43) / complement;
  } else {
    kappa = Scalar(1) / (r * complement * (Scalar(3) - r));
  }

  Scalar previous_step = std::numeric_limits<Scalar>::infinity();
  for (int it = 0; it < 100; ++it) {
    const Scalar c = bessel_ratio_complement(kappa);
    if (std::abs(c - complement) <= Scalar(1e-14) * complement) break;
    const Scalar a = Scalar(1) - c;
    // A'(k) = 1 - A/k - A^2 = c(2 - c) - (1 - c)/k
    const Scalar slope = c * (Scalar(2) - c) - a / kappa;
    if (!(slope > Scalar(0))) break;
    Scalar next = kappa + (c - complement) / slope;
    if (!(next > Scalar(0))) next = kappa / Scalar(2);
    if (next > Scalar(kKappaMax)) next = Scalar(kKappaMax);
    const Scalar step = std::abs(next - kappa);
    kappa = next;
    // Newton converges quadratically, so after a step this small the error is
    // below roundoff. A step that fails to shrink is roundoff as well.
    if (step <= Scalar(1e-7) * kappa || step >= previous_step) break;
    previous_step = step;
  }
  return kappa;
}

/// Inverse of A(kappa) = I_1(kappa)/I_0(kappa) on [0, 1).
template <typename Scalar>
Scalar a_inverse(Scalar r) {
  if (!std::isfinite(r) || r < Scalar(0) || r >= Scalar(1))
    throw InputError("a_inverse: argument must satisfy 0 <= r < 1");
  if (r == Scalar(0)) return Scalar(0);
  return a_inverse_complement(Scalar(1) - r);
}

/// Von Mises concentration matched to a local curvature g'' of the negative
/// log-density: kappa = A^{-1}(exp(-1 / (2 g''))).
template <typename Scalar>
Scalar kappa_from_curvature(Scalar curvature) {
  if (!(curvature > Scalar(0))) return Scalar(0);
  const Scalar complement = -std::expm1(Scalar(-1) / (Scalar(2) * curvature));
  if (!(complement > Scalar(0))) return Scalar(kKappaMax);
  return a_inverse_complement(std::min(complement, Scalar(1)));
}

/// kappa_from_curvature without the kKappaMax cap, for intermediate values
/// such as a projected belief that is later divided by a cavity. Above a
/// curvature of 1e6 the asymptotic inversion is exact to roundoff.
template <typename Scalar>
Scalar kappa_from_curvature_unbounded(Scalar curvature) {
  if (!(curvature > Scalar(1e6))) return kappa_from_curvature(curvature);
  if (!std::isfinite(curvature)) return curvature;
  const Scalar complement = -std::expm1(Scalar(-1) / (Scalar(2) * curvature));
  Scalar u = Scalar(2) * complement;
  for (int it = 0; it < 4; ++it)
    u = Scalar(2) * (complement - u * u * (Scalar(1) / 8 + u / 8 + Scalar(25) * u * u / 128));
  return Scalar(1) / u;
}

/// Two-step projection of p(theta) ~ exp(-g(theta)) onto a von Mises density.
///
/// Runs `newton_steps` Newton iterations on g from `theta0` to locate the
/// local mode, then matches the concentration to g'' at that mode. The
/// projection is local: it follows whichever basin contains `theta0`. When
/// the curvature is not positive the result is (theta0, fallback_kappa).
template <typename Scalar, typename Grad, typename Hess>
VonMises<Scalar> vm_project_laplace(const Grad& g_grad, const Hess& g_hess, Scalar theta0,
                                    int newton_steps, Scalar fallback_kappa) {
  const auto fallback = VonMises<Scalar>::from_polar(theta0, fallback_kappa);
  Scalar theta = theta0;
  for (int step = 0; step < newton_steps; ++step) {
    const Scalar d1 = g_grad(theta);
    const Scalar d2 = g_hess(theta);
    if (!std::isfinite(d1) || !std::isfinite(d2))
      throw NumericError("vm_project_laplace: non-finite derivative");
    if (!(d2 > Scalar(0))) return fallback;
    theta -= d1 / d2;
  }
  const Scalar mode = wrap_angle(theta);
  const Scalar curvature = g_hess(mode);
  if (!std::isfinite(curvature)) throw NumericError("vm_project_laplace: non-finite curvature");
  if (!(curvature > Scalar(0))) return fallback;
  return VonMises<Scalar>::from_polar(mode, kappa_from_curvature(curvature));
}

}  // namespace eplse
