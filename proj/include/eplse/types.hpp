#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace eplse {

using Index = Eigen::Index;
using Complex = std::complex<double>;

using VectorXd = Eigen::VectorXd;
using VectorXcd = Eigen::VectorXcd;
using ArrayXd = Eigen::ArrayXd;
using ArrayXcd = Eigen::ArrayXcd;
using ArrayXXd = Eigen::ArrayXXd;
using ArrayXXcd = Eigen::ArrayXXcd;
using ArrayXi = Eigen::ArrayXi;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Numerical guard rails shared by all modules.
inline constexpr double kVarMin = 1e-16;
inline constexpr double kVarMax = 1e10;
inline constexpr double kKappaMax = 1e7;
inline constexpr double kPiMin = 5e-3;

/// Thrown when a caller violates a documented precondition.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when an intermediate quantity becomes non-finite.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Wraps an angle into [-pi, pi).
template <typename Scalar>
Scalar wrap_angle(Scalar theta) {
  const Scalar two_pi = Scalar(2) * std::numbers::pi_v<Scalar>;
  Scalar w = std::fmod(theta + std::numbers::pi_v<Scalar>, two_pi);
  if (w < Scalar(0)) w += two_pi;
  w -= std::numbers::pi_v<Scalar>;
  // fmod can round to exactly +pi
  if (w >= std::numbers::pi_v<Scalar>) w -= two_pi;
  return w;
}

/// Clamps a variance into [kVarMin, kVarMax]; NaN maps to kVarMax (uninformative).
template <typename Scalar>
Scalar clamp_variance(Scalar v) {
  if (std::isnan(v)) return Scalar(kVarMax);
  if (v < Scalar(kVarMin)) return Scalar(kVarMin);
  if (v > Scalar(kVarMax)) return Scalar(kVarMax);
  return v;
}

/// Complex Gaussian message CN(mean, var).
struct GaussianMsg {
  Complex mean{0.0, 0.0};
  double var = kVarMax;
};

}  // namespace eplse
