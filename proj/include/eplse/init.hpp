#pragma once

// Starting messages for the EP engine from successive periodogram
// cancellation on the (pseudo) measurements.

#include "eplse/bgprior.hpp"
#include "eplse/channels.hpp"
#include "eplse/types.hpp"

namespace eplse {

struct InitResult {
  VectorXcd x0;       // amplitude messages x_{n->m}
  ArrayXd sx0;        // their variances
  ArrayXd mu0;        // frequency message directions
  ArrayXd kappa0;     // frequency message concentrations
  double sigma_w2_0 = kVarMin;
  BgPrior prior0;
  int detected = 0;   // components considered above the noise floor

  Index size() const { return x0.size(); }
};

/// One flat-extrinsic pass through the channel: returns the Gaussian
/// pseudo measurements (z_B^ext) for non-AWGN channels, y itself for AWGN.
VectorXcd pseudo_measurements(const ObservedRows& y, const Channel& ch);

/// Periodogram |sum_m r_m e^{-j p_m theta}|^2 / |M| of a residual on the rows.
double periodogram(const VectorXcd& residual, const std::vector<int>& rows, double theta);

InitResult init_periodogram(const ObservedRows& y, Index N, const Channel& ch);

}  // namespace eplse
