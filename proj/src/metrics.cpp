#include "eplse/metrics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <vector>

namespace eplse {

namespace {

double to_db(double ratio) {
  if (!(ratio > 0.0)) return kDbFloor;
  return std::max(20.0 * std::log10(ratio), kDbFloor);
}

}  // namespace

double nmse_db(const VectorXcd& z_hat, const VectorXcd& z_true) {
  if (z_hat.size() != z_true.size()) throw InputError("nmse_db: length mismatch");
  const double ref = z_true.norm();
  if (!(ref > 0.0)) throw InputError("nmse_db: reference signal is zero");
  return to_db((z_hat - z_true).norm() / ref);
}

double dnmse_db(const VectorXcd& z_hat, const VectorXcd& z_true) {
  if (z_hat.size() != z_true.size()) throw InputError("dnmse_db: length mismatch");
  const double energy = z_hat.squaredNorm();
  if (!(energy > 0.0)) return 0.0;
  const Complex scale = z_hat.dot(z_true) / energy;  // dot conjugates z_hat
  return nmse_db(scale * z_hat, z_true);
}

std::optional<double> freq_error_db(const ArrayXd& theta_hat, const ArrayXd& theta_true) {
  const Index K = theta_true.size();
  if (theta_hat.size() != K) return std::nullopt;
  if (K == 0) return kDbFloor;
  if (K > 20) throw InputError("freq_error_db: more than 20 frequencies");

  // Exact assignment by dynamic programming over subsets of estimates:
  // best[mask] = min cost of matching truths 0..popcount(mask)-1 to `mask`.
  const std::size_t full = std::size_t{1} << K;
  std::vector<double> best(full, std::numeric_limits<double>::infinity());
  best[0] = 0.0;
  for (std::size_t mask = 0; mask < full; ++mask) {
    if (!std::isfinite(best[mask])) continue;
    const int k = std::popcount(mask);
    if (k >= K) continue;
    for (Index e = 0; e < K; ++e) {
      const std::size_t bit = std::size_t{1} << e;
      if (mask & bit) continue;
      const double d = wrap_angle(theta_hat(e) - theta_true(k));
      best[mask | bit] = std::min(best[mask | bit], best[mask] + d * d);
    }
  }
  return to_db(std::sqrt(best[full - 1]));
}

}  // namespace eplse
