#include "eplse/channels.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace eplse {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSqrt2 = std::numbers::sqrt2;
const double kLogSqrt2Pi = 0.5 * std::log(kTwoPi);

double normal_pdf(double x) {
  if (std::isinf(x)) return 0.0;
  return std::exp(-0.5 * x * x - kLogSqrt2Pi);
}

// Upper-tail Q(x) = P(N(0,1) >= x) divided by phi(x), i.e. the reciprocal
// inverse Mills ratio. Finite and well-scaled for any x >= 0.
double mills(double x) { return std::sqrt(kPi / 2.0) * erfcx(x / kSqrt2); }

struct TailTerms {
  double psi1 = 0.0;  // (phi(a) - phi(b)) / Z
  double psi2 = 0.0;  // (a phi(a) - b phi(b)) / Z
  double log_mass = 0.0;
  bool ok = true;
};

// Standardized interval [a, b) with a >= 0: everything is expressed relative
// to phi(a) so that neither phi nor the tail mass is formed on its own.
TailTerms upper_tail(double a, double b) {
  TailTerms t;
  const double decay = std::isinf(b) ? 0.0 : std::exp(-0.5 * (b - a) * (b + a));
  const double mass_over_pdf = mills(a) - (std::isinf(b) ? 0.0 : decay * mills(b));
  if (!(mass_over_pdf > 0.0) || !std::isfinite(mass_over_pdf)) {
    t.ok = false;
    return t;
  }
  t.psi1 = (1.0 - decay) / mass_over_pdf;
  t.psi2 = (a - (std::isinf(b) ? 0.0 : b * decay)) / mass_over_pdf;
  t.log_mass = -0.5 * a * a - kLogSqrt2Pi + std::log(mass_over_pdf);
  return t;
}

TailTerms standardized_interval(double a, double b) {
  if (a >= 0.0) return upper_tail(a, b);
  if (b <= 0.0) {
    TailTerms t = upper_tail(-b, -a);
    t.psi1 = -t.psi1;
    return t;
  }
  TailTerms t;
  const double mass = 1.0 - 0.5 * std::erfc(b / kSqrt2) - 0.5 * std::erfc(-a / kSqrt2);
  if (!(mass > 0.0)) {
    t.ok = false;
    return t;
  }
  const double pa = normal_pdf(a);
  const double pb = normal_pdf(b);
  t.psi1 = (pa - pb) / mass;
  t.psi2 = ((std::isinf(a) ? 0.0 : a * pa) - (std::isinf(b) ? 0.0 : b * pb)) / mass;
  t.log_mass = std::log(mass);
  return t;
}

}  // namespace

double erfcx(double x) {
  if (x < 0.0) return 2.0 * std::exp(x * x) - erfcx(-x);
  if (x < 25.0) return std::exp(x * x) * std::erfc(x);
  // Laplace continued fraction erfc(x) e^{x^2} sqrt(pi) = 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
  double tail = 0.0;
  for (int k = 60; k >= 1; --k) tail = (0.5 * k) / (x + tail);
  return 1.0 / ((x + tail) * std::sqrt(kPi));
}

Quantizer::Quantizer(int bits_, double limit_) : bits(bits_), limit(limit_) {
  if (bits < 1 || bits > 16) throw InputError("Quantizer: bits must be in [1, 16]");
  if (!(limit > 0.0) || !std::isfinite(limit)) throw InputError("Quantizer: limit must be > 0");
}

int Quantizer::cell_of(double v) const {
  if (bits == 1) return v >= 0.0 ? 1 : 0;
  const int n = levels();
  const double pos = std::floor((v + limit) / width());
  if (!(pos >= 1.0)) return 0;  // also catches NaN
  if (pos >= n - 1) return n - 1;
  return static_cast<int>(pos);
}

std::pair<double, double> Quantizer::cell_bounds(int cell) const {
  const int n = levels();
  if (cell < 0 || cell >= n) throw InputError("Quantizer: cell index out of range");
  if (bits == 1) return cell == 0 ? std::pair{-kInf, 0.0} : std::pair{0.0, kInf};
  const double lo = cell == 0 ? -kInf : -limit + cell * width();
  const double hi = cell == n - 1 ? kInf : -limit + (cell + 1) * width();
  return {lo, hi};
}

QuantizedCodes quantize(const VectorXcd& v, int bits, double limit) {
  const Quantizer q(bits, limit);
  QuantizedCodes out;
  out.re.resize(v.size());
  out.im.resize(v.size());
  for (Index i = 0; i < v.size(); ++i) {
    out.re(i) = q.cell_of(v(i).real());
    out.im(i) = q.cell_of(v(i).imag());
  }
  return out;
}

void ObservedRows::validate(ChannelKind kind) const {
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || (full_length > 0 && indices[i] >= full_length))
      throw InputError("ObservedRows: row index out of range");
    if (i > 0 && indices[i] <= indices[i - 1])
      throw InputError("ObservedRows: indices must be strictly increasing");
  }
  if (kind == ChannelKind::kAwgn) {
    if (y.size() != size()) throw InputError("ObservedRows: |y| does not match |indices|");
  } else if (codes.re.size() != size() || codes.im.size() != size()) {
    throw InputError("ObservedRows: code count does not match |indices|");
  }
}

Channel Channel::awgn(double sigma_w2, bool learn_noise) {
  Channel ch;
  ch.kind = ChannelKind::kAwgn;
  ch.sigma_w2 = sigma_w2;
  ch.learn_noise = learn_noise;
  ch.validate();
  return ch;
}

Channel Channel::quantized(int bits, double limit, double sigma_w2, bool learn_noise) {
  Channel ch;
  ch.kind = ChannelKind::kQuantized;
  ch.quantizer = Quantizer(bits, limit);
  ch.sigma_w2 = sigma_w2;
  ch.learn_noise = learn_noise;
  ch.validate();
  return ch;
}

void Channel::validate() const {
  if (!(sigma_w2 > 0.0) || !std::isfinite(sigma_w2))
    throw InputError("Channel: sigma_w2 must be positive and finite");
}

TruncatedMoments interval_posterior(double mean, double var, double noise_var, double lower,
                                    double upper) {
  TruncatedMoments out{mean, var, 0.0, false};
  const double total_sd = std::sqrt(var + noise_var);
  const TailTerms t =
      standardized_interval((lower - mean) / total_sd, (upper - mean) / total_sd);
  if (!t.ok || !std::isfinite(t.psi1) || !std::isfinite(t.psi2)) {
    out.underflow = true;
    out.log_mass = -kInf;
    return out;
  }
  const double gain = var / total_sd;
  out.mean = mean + gain * t.psi1;
  out.var = var + gain * gain * (t.psi2 - t.psi1 * t.psi1);
  // truncation can only shrink the variance; guard roundoff at extreme cells
  if (!(out.var > 0.0)) out.var = var * std::numeric_limits<double>::epsilon();
  out.log_mass = t.log_mass;
  return out;
}

PosteriorMoments posterior_moments(const Channel& ch, const ObservedRows& y, Index m, Complex zA,
                                   double vA) {
  if (!(vA > 0.0) || !std::isfinite(vA))
    throw InputError("posterior_moments: vA must be positive and finite");
  PosteriorMoments out;
  if (ch.kind == ChannelKind::kAwgn) {
    const double precision = 1.0 / vA + 1.0 / ch.sigma_w2;
    out.var = 1.0 / precision;
    out.mean = out.var * (zA / vA + y.y(m) / ch.sigma_w2);
    return out;
  }
  const auto [re_lo, re_hi] = ch.quantizer.cell_bounds(y.codes.re(m));
  const auto [im_lo, im_hi] = ch.quantizer.cell_bounds(y.codes.im(m));
  const TruncatedMoments re = interval_posterior(zA.real(), vA / 2, ch.sigma_w2 / 2, re_lo, re_hi);
  const TruncatedMoments im = interval_posterior(zA.imag(), vA / 2, ch.sigma_w2 / 2, im_lo, im_hi);
  if (re.underflow || im.underflow) {
    out.mean = zA;
    out.var = vA;
    out.underflow = true;
    return out;
  }
  out.mean = Complex(re.mean, im.mean);
  out.var = re.var + im.var;
  return out;
}

double em_noise_variance(const VectorXcd& y_tilde, const VectorXcd& z_post,
                         const VectorXd& v_post) {
  if (y_tilde.size() == 0) throw InputError("em_noise_variance: empty input");
  if (y_tilde.size() != z_post.size() || y_tilde.size() != v_post.size())
    throw InputError("em_noise_variance: length mismatch");
  const double residual = (y_tilde - z_post).squaredNorm();
  const double value = (residual + v_post.sum()) / static_cast<double>(y_tilde.size());
  return std::max(value, kVarMin);
}

}  // namespace eplse
