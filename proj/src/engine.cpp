#include "eplse/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "eplse/metrics.hpp"
#include "eplse/scene.hpp"

namespace eplse {

void EngineConfig::validate() const {
  if (max_outer_iters < 1) throw InputError("EngineConfig: max_outer_iters must be >= 1");
  if (inner_iters < 0) throw InputError("EngineConfig: inner_iters must be >= 0");
  if (!(conv_tol > 0.0)) throw InputError("EngineConfig: conv_tol must be > 0");
  if (!(gamma > 0.0 && gamma < 1.0)) throw InputError("EngineConfig: gamma must be in (0, 1)");
  if (!(pi_min > 0.0 && pi_min < 0.5)) throw InputError("EngineConfig: pi_min must be in (0, 0.5)");
  if (!(inner_stop_tol > 0.0)) throw InputError("EngineConfig: inner_stop_tol must be > 0");
  if (!(lambda_floor > 0.0)) throw InputError("EngineConfig: lambda_floor must be > 0");
  if (projection_newton_steps < 1)
    throw InputError("EngineConfig: projection_newton_steps must be >= 1");
}

ArrayXd Estimate::active_theta() const {
  ArrayXd out(static_cast<Index>(active_set.size()));
  for (std::size_t i = 0; i < active_set.size(); ++i)
    out(static_cast<Index>(i)) = theta_hat(active_set[i]);
  return out;
}

VectorXcd Estimate::active_x() const {
  VectorXcd out(static_cast<Index>(active_set.size()));
  for (std::size_t i = 0; i < active_set.size(); ++i)
    out(static_cast<Index>(i)) = x_hat(active_set[i]);
  return out;
}

Engine::Engine(ObservedRows y, Channel channel, EngineConfig config, const InitResult& init)
    : y_(std::move(y)), channel_(channel), config_(config), prior_(init.prior0) {
  config_.validate();
  channel_.validate();
  y_.validate(channel_.kind);
  const Index N = init.size();
  const Index M = y_.size();
  if (N < 1 || M < 1) throw InputError("Engine: need at least one component and one row");
  if (init.sx0.size() != N || init.mu0.size() != N || init.kappa0.size() != N ||
      prior_.size() != N)
    throw InputError("Engine: inconsistent init lengths");
  if (channel_.learn_noise) channel_.sigma_w2 = std::max(init.sigma_w2_0, kVarMin);

  auto& s = state_;
  s.theta_in.resize(N, M);
  s.x_in_mean.resize(N, M);
  s.x_in_var.resize(N, M);
  for (Index n = 0; n < N; ++n) {
    const Complex eta = std::polar(std::min(init.kappa0(n), kKappaMax), init.mu0(n));
    s.theta_in.row(n).setConstant(eta);
    s.x_in_mean.row(n).setConstant(init.x0(n));
    s.x_in_var.row(n).setConstant(clamp_variance(init.sx0(n)));
  }
  s.theta_out = ArrayXXcd::Zero(N, M);
  s.x_out_mean = ArrayXXcd::Zero(N, M);
  s.x_out_var = ArrayXXd::Constant(N, M, kVarMax);
  s.theta_post = s.theta_in.col(0);
  s.anchor = init.mu0;
  s.r = init.x0.array();
  s.sigma2 = init.sx0;
  s.x_post.resize(static_cast<std::size_t>(N));
  for (Index n = 0; n < N; ++n) {
    auto& p = s.x_post[static_cast<std::size_t>(n)];
    p.lambda = prior_.pi(n);
    p.m = init.x0(n);
    p.V = init.sx0(n);
    p.mhat = init.x0(n);
    p.vhat = init.sx0(n);
  }
  s.moment_in.resize(N, M);
  s.rho_in.resize(N, M);
  for (Index n = 0; n < N; ++n) refresh_moments(n);
  s.zA_mean = VectorXcd::Zero(M);
  s.zA_var = VectorXd::Constant(M, kVarMax);
  s.zB_mean = VectorXcd::Zero(M);
  s.zB_var = VectorXd::Constant(M, kVarMax);
  update_delta_to_z();
}

void Engine::refresh_moments(Index n) {
  auto& s = state_;
  for (Index m = 0; m < s.rows(); ++m) {
    const VonMisesMsg msg{s.theta_in(n, m)};
    const int p = row_order(m);
    const double rho = bessel_ratio(p, msg.kappa());
    s.rho_in(n, m) = rho;
    s.moment_in(n, m) = rho == 0.0 ? Complex(0.0, 0.0) : std::polar(rho, p * std::arg(msg.eta));
  }
}

void Engine::update_z_to_delta() {
  auto& s = state_;
  const Index M = s.rows();
  VectorXcd z_post(M);
  VectorXd v_post(M);
  for (Index m = 0; m < M; ++m) {
    const double vA = clamp_variance(s.zA_var(m));
    const PosteriorMoments post = posterior_moments(channel_, y_, m, s.zA_mean(m), vA);
    z_post(m) = post.mean;
    v_post(m) = post.var;
    const double ext_precision = 1.0 / post.var - 1.0 / vA;
    // an extrinsic variance past the cap carries no information, and scaling
    // the mean by it overflows
    if (!(ext_precision > 1.0 / kVarMax) || !std::isfinite(ext_precision)) {
      s.zB_var(m) = kVarMax;
      s.zB_mean(m) = post.mean;
      continue;
    }
    const double vB = 1.0 / ext_precision;
    s.zB_mean(m) = vB * (post.mean / post.var - s.zA_mean(m) / vA);
    s.zB_var(m) = clamp_variance(vB);
  }
  if (channel_.learn_noise) {
    const VectorXcd& y_tilde = channel_.kind == ChannelKind::kAwgn ? y_.y : s.zB_mean;
    channel_.sigma_w2 = em_noise_variance(y_tilde, z_post, v_post);
  }
}

Engine::Interference Engine::leave_one_out(Index n, Index m) const {
  const auto& s = state_;
  Interference out{Complex(0.0, 0.0), 0.0, 0.0};
  for (Index l = 0; l < s.components(); ++l) {
    if (l == n) continue;
    const Complex x = s.x_in_mean(l, m);
    const double rho = s.rho_in(l, m);
    out.mean += s.moment_in(l, m) * x;
    out.var_x += s.x_in_var(l, m);
    out.spread += std::norm(x) * (1.0 - rho * rho);
  }
  return out;
}

VonMisesMsg Engine::compute_theta_out(Index n, Index m) const {
  return compute_theta_out(n, m, leave_one_out(n, m));
}

VonMisesMsg Engine::compute_theta_out(Index n, Index m, const Interference& rest) const {
  const auto& s = state_;
  const int p = row_order(m);
  const Complex x = s.x_in_mean(n, m);
  if (p == 0 || x == Complex(0.0, 0.0)) return VonMisesMsg::uniform();

  const double var_z = rest.var_x + s.x_in_var(n, m) + rest.spread;
  const Complex residual = s.zB_mean(m) - rest.mean;
  const double x_abs = std::sqrt(std::norm(x));
  const double r_abs = std::sqrt(std::norm(residual));
  const double beta = 2.0 * r_abs * x_abs / (s.zB_var(m) + var_z);
  if (!(beta > 0.0)) return VonMisesMsg::uniform();

  // f(theta) = beta cos(p theta + phase) + kappa cos(theta - mu) with
  // e^{j phase} = x conj(residual) / |x residual|; g = -f. The Laplace
  // projection below is vm_project_laplace started at mu, carried out on unit
  // phasors so the Newton iterates need no trigonometric evaluations of
  // absolute angles.
  const Complex phase = x * std::conj(residual) / (x_abs * r_abs);
  const Complex eta_in = s.theta_in(n, m);
  const double kappa = std::sqrt(std::norm(eta_in));
  Complex e_mu;     // e^{j mu}
  Complex e_p_mu;   // e^{j p mu}
  if (kappa > 0.0) {
    e_mu = eta_in / kappa;
    const double rho = s.rho_in(n, m);
    e_p_mu = rho > 0.0 ? s.moment_in(n, m) / rho : std::polar(1.0, p * std::arg(eta_in));
  } else {
    e_mu = std::polar(1.0, s.anchor(n));
    e_p_mu = std::polar(1.0, p * s.anchor(n));
  }
  const double order = p;
  Complex c = e_p_mu * phase;  // e^{j (p theta + phase)} at the current iterate
  double delta = 0.0;          // iterate minus mu
  Complex e_delta(1.0, 0.0);
  for (int step = 0; step < config_.projection_newton_steps; ++step) {
    const double d1 = beta * order * c.imag() + kappa * e_delta.imag();
    const double d2 = beta * order * order * c.real() + kappa * e_delta.real();
    if (!std::isfinite(d1) || !std::isfinite(d2))
      throw NumericError("compute_theta_out: non-finite derivative");
    if (!(d2 > 0.0)) return VonMisesMsg::uniform();
    const double move = -d1 / d2;
    delta += move;
    c *= std::polar(1.0, order * move);
    e_delta = std::polar(1.0, delta);
  }
  const double curvature = beta * order * order * c.real() + kappa * e_delta.real();
  if (!std::isfinite(curvature)) throw NumericError("compute_theta_out: non-finite curvature");
  if (!(curvature > 0.0)) return VonMisesMsg::uniform();
  const Complex projected = kappa_from_curvature_unbounded(curvature) * e_mu * e_delta;
  return VonMisesMsg{projected - eta_in};
}

void Engine::combine_theta_in(Index n, const std::vector<Interference>* rest) {
  auto& s = state_;
  const Index M = s.rows();
  for (Index m = 0; m < M; ++m) {
    const VonMisesMsg out = rest ? compute_theta_out(n, m, (*rest)[static_cast<std::size_t>(m)])
                                 : compute_theta_out(n, m);
    const VonMisesMsg capped = cap_concentration(out);
    if (capped.eta != out.eta) clamped_ = true;
    s.theta_out(n, m) = capped.eta;
  }
  const Complex total = s.theta_out.row(n).sum();
  s.theta_post(n) = cap_concentration(VonMisesMsg{total}).eta;
  if (std::abs(s.theta_post(n)) > 0.0) s.anchor(n) = wrap_angle(std::arg(s.theta_post(n)));
  for (Index m = 0; m < M; ++m) {
    const VonMisesMsg leave_out{total - s.theta_out(n, m)};
    const VonMisesMsg capped = cap_concentration(leave_out);
    if (capped.eta != leave_out.eta) clamped_ = true;
    s.theta_in(n, m) = capped.eta;
  }
  refresh_moments(n);
}

GaussianMsg Engine::compute_x_out(Index n, Index m) const {
  return compute_x_out(n, m, leave_one_out(n, m));
}

GaussianMsg Engine::compute_x_out(Index n, Index m, const Interference& rest) const {
  const auto& s = state_;
  const Complex lambda = s.moment_in(n, m);
  const double lambda_abs = std::abs(lambda);
  if (lambda_abs < config_.lambda_floor) return GaussianMsg{Complex(0.0, 0.0), kVarMax};
  const double rho = s.rho_in(n, m);
  const double delta2 = 1.0 - rho * rho;
  const double nu = rest.var_x + rest.spread;
  GaussianMsg out;
  out.mean = (s.zB_mean(m) - rest.mean) / lambda;
  out.var = clamp_variance((delta2 * std::norm(out.mean) + nu + s.zB_var(m)) /
                           (lambda_abs * lambda_abs));
  return out;
}

void Engine::combine_x_in(Index n, const std::vector<Interference>* rest) {
  auto& s = state_;
  const Index M = s.rows();
  double precision = 0.0;
  Complex weighted(0.0, 0.0);
  for (Index m = 0; m < M; ++m) {
    const GaussianMsg msg = rest ? compute_x_out(n, m, (*rest)[static_cast<std::size_t>(m)])
                                 : compute_x_out(n, m);
    s.x_out_mean(n, m) = msg.mean;
    s.x_out_var(n, m) = msg.var;
    precision += 1.0 / msg.var;
    weighted += msg.mean / msg.var;
  }
  const double sigma2 = 1.0 / precision;
  const Complex r = weighted * sigma2;
  s.r(n) = r;
  s.sigma2(n) = sigma2;
  const BgPosterior post = bg_posterior(r, sigma2, prior_, n);
  s.x_post[static_cast<std::size_t>(n)] = post;

  const double vhat = std::max(post.vhat, kVarMin);
  for (Index m = 0; m < M; ++m) {
    const double ext_precision = 1.0 / vhat - 1.0 / s.x_out_var(n, m);
    if (!(ext_precision > 1.0 / kVarMax) || !std::isfinite(ext_precision)) {
      s.x_in_mean(n, m) = post.mhat;
      s.x_in_var(n, m) = kVarMax;
      clamped_ = true;
      continue;
    }
    const double var = 1.0 / ext_precision;
    s.x_in_mean(n, m) = var * (post.mhat / vhat - s.x_out_mean(n, m) / s.x_out_var(n, m));
    const double clamped = clamp_variance(var);
    if (clamped != var) clamped_ = true;
    s.x_in_var(n, m) = clamped;
  }
}

void Engine::update_prior() {
  if (!config_.learn_prior) {
    for (Index n = 0; n < prior_.size(); ++n)
      prior_.pi(n) = std::clamp(prior_.pi(n), config_.pi_min, 1.0 - config_.pi_min);
    return;
  }
  // signs carry no amplitude scale; a learned slab follows the amplitudes
  // upward without bound until the quantized update breaks down
  const double tau0 = prior_.tau0;
  prior_ = em_update_prior(state_.x_post, prior_, config_.pi_min).prior;
  if (channel_.kind == ChannelKind::kQuantized && channel_.quantizer.bits == 1) prior_.tau0 = tau0;
}

void Engine::update_delta_to_z() {
  auto& s = state_;
  for (Index m = 0; m < s.rows(); ++m) {
    Complex mean(0.0, 0.0);
    double var = 0.0;
    for (Index l = 0; l < s.components(); ++l) {
      const Complex x = s.x_in_mean(l, m);
      const double rho = s.rho_in(l, m);
      mean += s.moment_in(l, m) * x;
      var += s.x_in_var(l, m) + std::norm(x) * (1.0 - rho * rho);
    }
    s.zA_mean(m) = mean;
    s.zA_var(m) = clamp_variance(var);
  }
}

std::vector<Index> Engine::sweep_order() const {
  std::vector<Index> order(static_cast<std::size_t>(state_.components()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return state_.x_post[static_cast<std::size_t>(a)].lambda >
           state_.x_post[static_cast<std::size_t>(b)].lambda;
  });
  return order;
}

void Engine::sweep() {
  clamped_ = false;
  // The messages of component n never enter its own leave-one-out sums, so
  // one evaluation per row serves both the theta and the x update.
  std::vector<Interference> rest(static_cast<std::size_t>(state_.rows()));
  for (const Index n : sweep_order()) {
    for (Index m = 0; m < state_.rows(); ++m)
      rest[static_cast<std::size_t>(m)] = leave_one_out(n, m);
    combine_theta_in(n, &rest);
    combine_x_in(n, &rest);
  }
  update_prior();
}

VectorXcd Engine::reconstruct_all() const {
  const auto& s = state_;
  const int length = y_.full_length > 0 ? y_.full_length : y_.indices.back() + 1;
  VectorXcd z = VectorXcd::Zero(length);
  for (Index n = 0; n < s.components(); ++n) {
    const Complex x = s.x_post[static_cast<std::size_t>(n)].mhat;
    if (x == Complex(0.0, 0.0)) continue;
    z += steering(std::arg(s.theta_post(n)), length) * x;
  }
  return z;
}

Estimate Engine::estimate() const {
  const auto& s = state_;
  const Index N = s.components();
  Estimate e;
  e.theta_hat.resize(N);
  e.x_hat.resize(N);
  e.lambda.resize(N);
  e.pi = prior_.pi;
  for (Index n = 0; n < N; ++n) {
    const auto& post = s.x_post[static_cast<std::size_t>(n)];
    e.theta_hat(n) = VonMisesMsg{s.theta_post(n)}.mu();
    e.x_hat(n) = post.mhat;
    e.lambda(n) = post.lambda;
    if (prior_.pi(n) > config_.gamma) e.active_set.push_back(static_cast<int>(n));
  }
  e.K_hat = static_cast<int>(e.active_set.size());
  const int length = y_.full_length > 0 ? y_.full_length : y_.indices.back() + 1;
  e.z_hat = synthesize(e.active_theta(), e.active_x(), length);
  e.sigma_w2_hat = channel_.sigma_w2;
  return e;
}

RunResult Engine::run(const VectorXcd* z_true) {
  RunResult result;
  const int inner_cap = config_.resolved_inner_iters(channel_.kind);
  VectorXcd previous = reconstruct_all();
  for (int t = 1; t <= config_.max_outer_iters; ++t) {
    update_z_to_delta();
    int sweeps = 0;
    for (int inner = 0; inner < inner_cap; ++inner) {
      ArrayXd lambda_old(state_.components());
      for (Index n = 0; n < state_.components(); ++n)
        lambda_old(n) = state_.x_post[static_cast<std::size_t>(n)].lambda;
      sweep();
      ++sweeps;
      if (inner_cap > 1) {
        double diff = 0.0;
        for (Index n = 0; n < state_.components(); ++n)
          diff += std::pow(state_.x_post[static_cast<std::size_t>(n)].lambda - lambda_old(n), 2);
        const double base = lambda_old.matrix().norm();
        if (std::sqrt(diff) <= config_.inner_stop_tol * std::max(base, 1e-300)) break;
      }
    }
    update_delta_to_z();

    const VectorXcd current = reconstruct_all();
    const double norm = current.norm();
    const double change = (current - previous).norm();
    const double rel = norm > 0.0 ? change / norm : (change > 0.0 ? 1.0 : 0.0);
    previous = current;

    TraceRecord rec;
    rec.iteration = t;
    rec.rel_change = rel;
    rec.sigma_w2 = channel_.sigma_w2;
    rec.inner_sweeps = sweeps;
    int k_hat = 0;
    for (Index n = 0; n < prior_.size(); ++n) k_hat += prior_.pi(n) > config_.gamma ? 1 : 0;
    rec.K_hat = k_hat;
    if (z_true && z_true->norm() > 0.0) rec.nmse_db = nmse_db(estimate().z_hat, *z_true);
    if (config_.record_signals) {
      rec.z_hat = current;
      rec.lambda.resize(state_.components());
      for (Index n = 0; n < state_.components(); ++n)
        rec.lambda(n) = state_.x_post[static_cast<std::size_t>(n)].lambda;
    }
    result.trace.push_back(std::move(rec));
    result.iterations = t;
    if (t > 1 && rel < config_.conv_tol) {
      result.converged = true;
      break;
    }
  }
  result.estimate = estimate();
  return result;
}

RunResult run_eplse(const ObservedRows& y, const Channel& channel, const EngineConfig& config,
                    const InitResult& init, const VectorXcd* z_true) {
  Engine engine(y, channel, config, init);
  return engine.run(z_true);
}

}  // namespace eplse
