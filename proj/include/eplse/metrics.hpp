#pragma once

#include <optional>

#include "eplse/types.hpp"

namespace eplse {

inline constexpr double kDbFloor = -300.0;

struct TrialReport {
  double nmse_db = 0.0;
  double dnmse_db = 0.0;
  bool order_correct = false;
  std::optional<double> freq_err_db;  // present iff order_correct
  int iterations = 0;
  bool converged = false;
  int K_hat = 0;
  double sigma_w2_hat = 0.0;
};

/// 20 log10(||z_hat - z|| / ||z||), floored at -300 dB.
double nmse_db(const VectorXcd& z_hat, const VectorXcd& z_true);

/// NMSE after the best complex rescaling c* = <z_hat, z> / ||z_hat||^2.
double dnmse_db(const VectorXcd& z_hat, const VectorXcd& z_true);

/// 20 log10 of the l2 norm of wrapped frequency errors under the assignment
/// minimizing the summed squared wrap distance. Empty on length mismatch.
std::optional<double> freq_error_db(const ArrayXd& theta_hat, const ArrayXd& theta_true);

}  // namespace eplse
