#pragma once

// Measurement channels p(y_m | z_m; sigma_w2): componentwise posterior moments
// of z under a Gaussian extrinsic, EM noise learning, and the uniform quantizer.

#include <utility>
#include <vector>

#include "eplse/types.hpp"

namespace eplse {

enum class ChannelKind { kAwgn, kQuantized };

/// Mid-rise uniform quantizer over [-limit, limit] applied to one real
/// dimension. Cells are indexed 0 .. 2^bits - 1; the outer two cells extend
/// to -inf / +inf. With one bit the single threshold sits at zero.
struct Quantizer {
  int bits = 1;
  double limit = 1.0;

  Quantizer() = default;
  Quantizer(int bits, double limit);

  int levels() const { return 1 << bits; }
  double width() const { return 2.0 * limit / levels(); }
  int cell_of(double v) const;
  /// [lower, upper) bounds of a cell; infinities for the outer cells.
  std::pair<double, double> cell_bounds(int cell) const;
};

struct QuantizedCodes {
  Eigen::ArrayXi re;
  Eigen::ArrayXi im;
};

/// Per real dimension cell codes of a complex vector.
QuantizedCodes quantize(const VectorXcd& v, int bits, double limit);

/// Observed subset of the full measurement grid.
///
/// `indices` are the absolute row indices (strictly increasing). For the AWGN
/// channel `y` holds the complex samples; for the quantized channel `codes`
/// holds the cell of each real dimension and `y` is left empty.
struct ObservedRows {
  std::vector<int> indices;
  VectorXcd y;
  QuantizedCodes codes;
  int full_length = 0;

  Index size() const { return static_cast<Index>(indices.size()); }
  void validate(ChannelKind kind) const;
};

struct Channel {
  ChannelKind kind = ChannelKind::kAwgn;
  Quantizer quantizer;
  double sigma_w2 = 1.0;
  bool learn_noise = true;

  static Channel awgn(double sigma_w2, bool learn_noise = true);
  static Channel quantized(int bits, double limit, double sigma_w2, bool learn_noise);
  void validate() const;
};

struct PosteriorMoments {
  Complex mean;
  double var = 0.0;
  bool underflow = false;  // cell mass vanished; prior moments returned
};

/// Moments of z_m under CN(z_m; zA, vA) p(y_m | z_m).
PosteriorMoments posterior_moments(const Channel& ch, const ObservedRows& y, Index m,
                                   Complex zA, double vA);

/// Scalar helpers for one real dimension: z ~ N(mean, var), observed through
/// z + N(0, noise_var) falling in [lower, upper).
struct TruncatedMoments {
  double mean = 0.0;
  double var = 0.0;
  double log_mass = 0.0;  // log P(lower <= z + w < upper)
  bool underflow = false;
};
TruncatedMoments interval_posterior(double mean, double var, double noise_var, double lower,
                                    double upper);

/// sigma_w2 = (||y_tilde - z_post||^2 + sum(v_post)) / |M|, floored at kVarMin.
double em_noise_variance(const VectorXcd& y_tilde, const VectorXcd& z_post,
                         const VectorXd& v_post);

/// Scaled complementary error function exp(x^2) erfc(x).
double erfcx(double x);

}  // namespace eplse
