#pragma once

// Expectation-propagation line spectral estimation on the factor graph
// y_m <- z_m <- delta(z_m - sum_n e^{j p_m theta_n} x_n) -> {theta_n, x_n}.
//
// Edge messages are stored as N x |M| arrays (component n, observed row m).
// Frequencies travel as von Mises natural parameters, amplitudes and the
// z-extrinsics as complex Gaussians.

#include <optional>
#include <vector>

#include "eplse/bgprior.hpp"
#include "eplse/channels.hpp"
#include "eplse/circular.hpp"
#include "eplse/init.hpp"
#include "eplse/types.hpp"

namespace eplse {

struct EngineConfig {
  int max_outer_iters = 2000;
  /// Inner sweeps per outer iteration; 0 selects 1 for AWGN and 30 otherwise.
  int inner_iters = 0;
  double conv_tol = 1e-6;
  double gamma = 0.5;
  double pi_min = kPiMin;
  /// Inner loop stops once ||lambda_t - lambda_{t-1}|| / ||lambda_{t-1}|| drops below this.
  double inner_stop_tol = 1e-3;
  /// |E[e^{j p theta}]| below which an amplitude message is left uninformative.
  double lambda_floor = 1e-8;
  int projection_newton_steps = 1;
  bool learn_prior = true;
  bool record_signals = false;  // keep z_hat and lambda for every iteration

  int resolved_inner_iters(ChannelKind kind) const {
    if (inner_iters > 0) return inner_iters;
    return kind == ChannelKind::kAwgn ? 1 : 30;
  }
  void validate() const;
};

struct GraphState {
  ArrayXXcd theta_in;   // eta of m_{n->m}(theta_n)
  ArrayXXcd theta_out;  // eta of m~_{m->n}(theta_n)
  ArrayXXcd x_in_mean;  // m_{n->m}(x_n)
  ArrayXXd x_in_var;
  ArrayXXcd x_out_mean;  // m~_{m->n}(x_n)
  ArrayXXd x_out_var;
  VectorXcd zA_mean;  // m_{delta->z}
  VectorXd zA_var;
  VectorXcd zB_mean;  // m_{z->delta}
  VectorXd zB_var;
  ArrayXcd theta_post;  // eta~_n
  ArrayXcd r;           // combined amplitude pseudo measurement
  ArrayXd sigma2;
  std::vector<BgPosterior> x_post;
  // E[e^{j p_m theta}] and its modulus under theta_in, cached per edge
  ArrayXXcd moment_in;
  ArrayXXd rho_in;
  // Newton start for components whose incoming message is uniform
  ArrayXd anchor;

  Index components() const { return theta_in.rows(); }
  Index rows() const { return theta_in.cols(); }
};

struct Estimate {
  ArrayXd theta_hat;          // all N posterior mean directions
  VectorXcd x_hat;            // all N posterior means
  ArrayXd lambda;
  ArrayXd pi;
  std::vector<int> active_set;  // pi_n > gamma
  int K_hat = 0;
  VectorXcd z_hat;            // active-set reconstruction on the full grid
  double sigma_w2_hat = 0.0;

  ArrayXd active_theta() const;
  VectorXcd active_x() const;
};

struct TraceRecord {
  int iteration = 0;
  double rel_change = 0.0;
  std::optional<double> nmse_db;
  int K_hat = 0;
  double sigma_w2 = 0.0;
  int inner_sweeps = 0;
  VectorXcd z_hat;  // filled only when record_signals is set
  ArrayXd lambda;
};

struct RunResult {
  Estimate estimate;
  std::vector<TraceRecord> trace;
  int iterations = 0;
  bool converged = false;
};

class Engine {
 public:
  Engine(ObservedRows y, Channel channel, EngineConfig config, const InitResult& init);

  /// m_{z->delta}: channel posterior divided by m_{delta->z}, then EM on sigma_w2.
  void update_z_to_delta();
  /// Sums over the other components l != n on row m.
  struct Interference {
    Complex mean;        // sum_{l != n} E[e^{j p theta_l}] x_{l->m}
    double var_x = 0.0;  // sum_{l != n} sigma^2_{l->m}
    double spread = 0.0; // sum_{l != n} |x_{l->m}|^2 (1 - rho_l^2)
  };
  Interference leave_one_out(Index n, Index m) const;

  /// m~_{m->n}(theta_n) from the Laplace projection of the edge's local belief.
  VonMisesMsg compute_theta_out(Index n, Index m) const;
  VonMisesMsg compute_theta_out(Index n, Index m, const Interference& rest) const;
  /// Posterior and leave-one-out messages m_{n->m}(theta_n) of component n.
  /// `rest`, when given, holds leave_one_out(n, m) for every row.
  void combine_theta_in(Index n, const std::vector<Interference>* rest = nullptr);
  /// m~_{m->n}(x_n) treating the other components as Gaussian interference.
  GaussianMsg compute_x_out(Index n, Index m) const;
  GaussianMsg compute_x_out(Index n, Index m, const Interference& rest) const;
  /// Bernoulli-Gaussian posterior of x_n and its extrinsic messages m_{n->m}(x_n).
  void combine_x_in(Index n, const std::vector<Interference>* rest = nullptr);
  /// EM update of the Bernoulli-Gaussian hyperparameters.
  void update_prior();
  /// m_{delta->z} from the incoming theta and x messages.
  void update_delta_to_z();

  /// One inner iteration: all four component-side updates for every n,
  /// strongest component first, then the prior update.
  void sweep();

  /// Runs the outer/inner schedule until convergence or the iteration cap.
  RunResult run(const VectorXcd* z_true = nullptr);

  Estimate estimate() const;
  /// Reconstruction from every component on the full grid.
  VectorXcd reconstruct_all() const;

  const GraphState& state() const { return state_; }
  GraphState& mutable_state() { return state_; }
  const Channel& channel() const { return channel_; }
  const BgPrior& prior() const { return prior_; }
  BgPrior& mutable_prior() { return prior_; }
  const EngineConfig& config() const { return config_; }
  const ObservedRows& observations() const { return y_; }
  int row_order(Index m) const { return y_.indices[static_cast<std::size_t>(m)]; }
  /// Refreshes moment_in / rho_in of component n after theta_in changed.
  void refresh_moments(Index n);
  bool last_update_clamped() const { return clamped_; }

 private:
  std::vector<Index> sweep_order() const;

  ObservedRows y_;
  Channel channel_;
  EngineConfig config_;
  BgPrior prior_;
  GraphState state_;
  bool clamped_ = false;
};

/// Convenience wrapper: builds an engine from the init and runs it.
RunResult run_eplse(const ObservedRows& y, const Channel& channel, const EngineConfig& config,
                    const InitResult& init, const VectorXcd* z_true = nullptr);

}  // namespace eplse
