#pragma once

// Bernoulli-Gaussian amplitude prior (1 - pi_n) delta(x) + pi_n CN(x; mu0, tau0):
// componentwise posterior under a pseudo measurement r_n = x_n + noise and
// the EM update of the hyperparameters.

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include "eplse/types.hpp"

namespace eplse {

template <typename Scalar>
struct BgPriorT {
  Eigen::Array<Scalar, Eigen::Dynamic, 1> pi;
  std::complex<Scalar> mu0{0, 0};
  Scalar tau0 = 1;

  static BgPriorT constant(Index n, Scalar pi0, std::complex<Scalar> mu0, Scalar tau0) {
    BgPriorT p;
    p.pi = Eigen::Array<Scalar, Eigen::Dynamic, 1>::Constant(n, pi0);
    p.mu0 = mu0;
    p.tau0 = tau0;
    return p;
  }
  Index size() const { return pi.size(); }
};

template <typename Scalar>
struct BgPosteriorT {
  Scalar lambda = 0;             // posterior activation probability
  std::complex<Scalar> m{0, 0};  // mean of the active component
  Scalar V = 0;                  // variance of the active component
  std::complex<Scalar> mhat{0, 0};
  Scalar vhat = 0;
};

using BgPrior = BgPriorT<double>;
using BgPosterior = BgPosteriorT<double>;

template <typename Scalar>
Scalar logistic(Scalar x) {
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

/// Posterior of x_n given r_n = x_n + CN(0, sigma2) under the prior's n-th
/// component. The activation is evaluated as logistic(M + logit(pi_n)).
template <typename Scalar>
BgPosteriorT<Scalar> bg_posterior(std::complex<Scalar> r, Scalar sigma2,
                                  const BgPriorT<Scalar>& prior, Index n) {
  if (!(sigma2 > Scalar(0)) || !std::isfinite(sigma2))
    throw InputError("bg_posterior: sigma2 must be positive and finite");
  if (!std::isfinite(r.real()) || !std::isfinite(r.imag()))
    throw InputError("bg_posterior: non-finite pseudo measurement");
  if (n < 0 || n >= prior.size()) throw InputError("bg_posterior: component index out of range");

  const Scalar tau0 = prior.tau0;
  const Scalar total = sigma2 + tau0;
  BgPosteriorT<Scalar> post;
  post.m = (tau0 * r + sigma2 * prior.mu0) / total;
  post.V = tau0 * sigma2 / total;

  const Scalar pi_n = prior.pi(n);
  if (pi_n >= Scalar(1)) {
    post.lambda = 1;
  } else if (pi_n <= Scalar(0)) {
    post.lambda = 0;
  } else {
    const Scalar evidence =
        std::log(sigma2 / total) + std::norm(r) / sigma2 - std::norm(r - prior.mu0) / total;
    post.lambda = logistic(evidence + std::log(pi_n) - std::log1p(-pi_n));
  }
  post.mhat = post.lambda * post.m;
  // lambda(|m|^2 + V) - |lambda m|^2, arranged to stay nonnegative
  post.vhat = post.lambda * post.V + post.lambda * (Scalar(1) - post.lambda) * std::norm(post.m);
  return post;
}

template <typename Scalar>
struct EmPriorUpdate {
  BgPriorT<Scalar> prior;
  bool degenerate = false;  // every lambda was zero; mu0 and tau0 kept
};

/// One EM step on (pi, mu0, tau0). pi_n follows lambda_n inside
/// [pi_min, 1 - pi_min]; mu0 is the lambda-weighted mean of m_n; tau0 is the
/// lambda-weighted spread of m_n around the previous mu0 plus V_n.
template <typename Scalar>
EmPriorUpdate<Scalar> em_update_prior(std::span<const BgPosteriorT<Scalar>> posteriors,
                                      const BgPriorT<Scalar>& prior,
                                      Scalar pi_min = Scalar(kPiMin)) {
  if (static_cast<Index>(posteriors.size()) != prior.size())
    throw InputError("em_update_prior: posterior count does not match prior size");
  EmPriorUpdate<Scalar> out{prior, false};
  Scalar weight = 0;
  std::complex<Scalar> mean_acc{0, 0};
  Scalar spread_acc = 0;
  for (std::size_t n = 0; n < posteriors.size(); ++n) {
    const auto& p = posteriors[n];
    out.prior.pi(static_cast<Index>(n)) = std::clamp(p.lambda, pi_min, Scalar(1) - pi_min);
    weight += p.lambda;
    mean_acc += p.lambda * p.m;
    spread_acc += p.lambda * (std::norm(prior.mu0 - p.m) + p.V);
  }
  if (!(weight > Scalar(0))) {
    out.degenerate = true;
    return out;
  }
  out.prior.mu0 = mean_acc / weight;
  out.prior.tau0 = std::max(spread_acc / weight, Scalar(kVarMin));
  return out;
}

template <typename Scalar>
EmPriorUpdate<Scalar> em_update_prior(const std::vector<BgPosteriorT<Scalar>>& posteriors,
                                      const BgPriorT<Scalar>& prior,
                                      Scalar pi_min = Scalar(kPiMin)) {
  return em_update_prior(std::span<const BgPosteriorT<Scalar>>(posteriors), prior, pi_min);
}

}  // namespace eplse
