// Acceptance checks for the library and CLI. Prints one PASS/FAIL line per
// criterion and exits nonzero if any criterion fails.
//
//   eplse_acceptance            run all criteria
//   eplse_acceptance 3 6        run only the listed criteria

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "eplse/bgprior.hpp"
#include "eplse/channels.hpp"
#include "eplse/circular.hpp"
#include "eplse/cli.hpp"
#include "eplse/engine.hpp"
#include "eplse/init.hpp"
#include "eplse/metrics.hpp"
#include "eplse/scene.hpp"
#include "../tests/support/oracles.hpp"

using namespace eplse;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* pattern, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, pattern, a);
  return buf;
}

int jobs() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (const double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// 1. Bessel ratios and a_inverse against the power series.
Outcome bessel_kernels() {
  std::vector<double> kappas{0.0, 1e-8, 1e-6, 1e-3, 0.01, 0.1, 0.5};
  for (double k = 1.0; k <= 500.0; k *= 1.17) kappas.push_back(k);
  for (double k : {2.0, 5.0, 10.0, 20.0, 35.0, 49.99, 50.0, 50.01, 120.0, 499.0, 500.0}) kappas.push_back(k);

  std::vector<double> expected;
  for (const double k : kappas)
    for (int p = 0; p <= 64; ++p) expected.push_back(oracle::bessel_ratio(p, k));
  std::vector<double> round_trip_r, round_trip_k;
  for (double k = 1e-6; k <= 500.0; k *= 1.21) {
    round_trip_k.push_back(k);
    round_trip_r.push_back(oracle::bessel_ratio(1, k));
  }

  const auto start = Clock::now();
  double worst = 0.0, worst_inverse = 0.0;
  std::size_t i = 0;
  bool zero_mismatch = false;
  for (const double k : kappas) {
    for (int p = 0; p <= 64; ++p, ++i) {
      const double got = bessel_ratio(p, k);
      if (expected[i] == 0.0) {
        zero_mismatch = zero_mismatch || got != 0.0;
        continue;
      }
      worst = std::max(worst, std::abs(got - expected[i]) / expected[i]);
    }
  }
  for (std::size_t j = 0; j < round_trip_k.size(); ++j)
    worst_inverse =
        std::max(worst_inverse, std::abs(a_inverse(round_trip_r[j]) - round_trip_k[j]) / round_trip_k[j]);
  const double elapsed = seconds_since(start);

  Outcome out;
  out.pass = worst < 1e-10 && worst_inverse < 1e-8 && !zero_mismatch && elapsed < 1.0;
  out.detail = fmt("max rel err %.2e", worst) + fmt(", a_inverse %.2e", worst_inverse) +
               fmt(", %.3f s", elapsed);
  return out;
}

// 2. Laplace projection against a dense grid with finite differences.
Outcome projection_oracle() {
  const auto start = Clock::now();
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_mode = 0.0, worst_kappa = 0.0;
  for (int i = 0; i < 50; ++i) {
    const int p = 1 + static_cast<int>(u(rng) * 8);
    const double b1 = 0.5 + 10.0 * u(rng), b2 = 0.5 + 10.0 * u(rng);
    const double phi = kPi * (2 * u(rng) - 1), mu = kPi * (2 * u(rng) - 1);
    auto f = [&](auto t) {
      using T = decltype(t);
      return static_cast<long double>(T(b1) * std::cos(T(p) * t + T(phi)) + T(b2) * std::cos(t - T(mu)));
    };
    auto grad = [&](double t) { return b1 * p * std::sin(p * t + phi) + b2 * std::sin(t - mu); };
    auto hess = [&](double t) { return b1 * p * p * std::cos(p * t + phi) + b2 * std::cos(t - mu); };
    // start inside the dominant basin: the global maximum of f on a coarse grid
    double theta0 = 0.0, best = -1e300;
    for (int g = 0; g < 4096; ++g) {
      const double t = -kPi + kTwoPi * g / 4096;
      const double v = static_cast<double>(f(t));
      if (v > best) {
        best = v;
        theta0 = t;
      }
    }
    const auto got = vm_project_laplace(grad, hess, theta0, 50, 0.0);
    const auto ref = oracle::grid_projection(f, theta0);
    worst_mode = std::max(worst_mode, std::abs(wrap_angle(got.mu() - ref.mode)));
    worst_kappa = std::max(worst_kappa, std::abs(got.kappa() - ref.kappa) / ref.kappa);
  }
  const double elapsed = seconds_since(start);
  Outcome out;
  out.pass = worst_mode < 1e-3 && worst_kappa < 1e-3 && elapsed < 10.0;
  out.detail = fmt("max mode err %.2e", worst_mode) + fmt(", max rel kappa err %.2e", worst_kappa) +
               fmt(", %.1f s", elapsed);
  return out;
}

// 3. Quantized channel posterior against per-dimension quadrature.
Outcome channel_oracle() {
  const auto start = Clock::now();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const int bits = 1 + i % 3;
    const double limit = 0.5 + 2.0 * u(rng);
    const double noise = 0.01 + u(rng);
    const double vA = 0.05 + 2.0 * u(rng);
    const Complex zA(g(rng), g(rng));
    const Channel ch = Channel::quantized(bits, limit, noise, true);
    const int levels = 1 << bits;
    const int cr = static_cast<int>(u(rng) * levels), ci = static_cast<int>(u(rng) * levels);
    ObservedRows y;
    y.indices = {0};
    y.full_length = 1;
    y.codes.re = Eigen::ArrayXi::Constant(1, cr);
    y.codes.im = Eigen::ArrayXi::Constant(1, ci);
    const auto post = posterior_moments(ch, y, 0, zA, vA);
    const auto [rl, rh] = ch.quantizer.cell_bounds(cr);
    const auto [il, ih] = ch.quantizer.cell_bounds(ci);
    const auto qr = oracle::interval_posterior_quadrature(zA.real(), vA / 2, noise / 2, rl, rh);
    const auto qi = oracle::interval_posterior_quadrature(zA.imag(), vA / 2, noise / 2, il, ih);
    worst = std::max({worst, std::abs(post.mean.real() - qr.mean), std::abs(post.mean.imag() - qi.mean),
                      std::abs(post.var - (qr.var + qi.var))});
  }
  const double elapsed = seconds_since(start);
  Outcome out;
  out.pass = worst < 1e-6 && elapsed < 10.0;
  out.detail = fmt("max abs err %.2e", worst) + fmt(", %.1f s", elapsed);
  return out;
}

// 4. Bernoulli-Gaussian posterior and EM update.
Outcome bg_oracle() {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  double worst_post = 0.0;
  for (int i = 0; i < 50; ++i) {
    const double pi = 0.02 + 0.96 * u(rng);
    const Complex mu0(0.5 * g(rng), 0.5 * g(rng));
    const double tau0 = 0.1 + 3.0 * u(rng);
    const double sigma2 = 0.05 + 2.0 * u(rng);
    const Complex r(1.5 * g(rng), 1.5 * g(rng));
    const auto prior = BgPrior::constant(1, pi, mu0, tau0);
    const auto post = bg_posterior(r, sigma2, prior, 0);
    const auto q = oracle::bg_posterior_quadrature(r, sigma2, pi, mu0, tau0);
    worst_post = std::max({worst_post, std::abs(post.lambda - q.lambda), std::abs(post.mhat - q.mean),
                           std::abs(post.vhat - q.var)});
  }

  double worst_em = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + trial % 5;
    std::vector<BgPosterior> posts(static_cast<std::size_t>(n));
    for (auto& p : posts) {
      p.lambda = u(rng);
      p.m = Complex(g(rng), g(rng));
      p.V = 0.5 * u(rng);
    }
    const Complex mu_old(0.3 * g(rng), 0.3 * g(rng));
    const auto prior = BgPrior::constant(n, 0.5, mu_old, 1.0);
    const auto updated = em_update_prior(posts, prior).prior;
    auto q = [&](Complex mu0, double tau0) {
      double s = 0.0;
      for (const auto& p : posts) s += p.lambda * (-std::log(kPi * tau0) - (std::norm(p.m - mu0) + p.V) / tau0);
      return s;
    };
    const auto best = oracle::nelder_mead<3>(
        [&](const std::array<double, 3>& v) { return -q(Complex(v[0], v[1]), std::exp(v[2])); }, {0.0, 0.0, 0.0},
        0.5);
    const double tau = oracle::golden_min([&](double t) { return -q(mu_old, t); }, 1e-6, 50.0);
    worst_em = std::max({worst_em, std::abs(updated.mu0 - Complex(best[0], best[1])), std::abs(updated.tau0 - tau)});
  }
  Outcome out;
  out.pass = worst_post < 1e-6 && worst_em < 1e-6;
  out.detail = fmt("posterior max err %.2e", worst_post) + fmt(", EM max err %.2e", worst_em);
  return out;
}

// 5. Leave-one-out identities of the message algebra.
Outcome ep_algebra() {
  double worst = 0.0;
  int checked = 0;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);

  auto check_engine = [&](const Engine& e) {
    if (e.last_update_clamped()) return;
    ++checked;
    const auto& s = e.state();
    for (Index n = 0; n < s.components(); ++n) {
      const auto& post = s.x_post[static_cast<std::size_t>(n)];
      for (Index m = 0; m < s.rows(); ++m) {
        worst = std::max(worst, std::abs(s.theta_post(n) - s.theta_in(n, m) - s.theta_out(n, m)) /
                                    (1.0 + std::abs(s.theta_post(n))));
        const double precision = 1.0 / s.x_in_var(n, m) + 1.0 / s.x_out_var(n, m);
        worst = std::max(worst, std::abs(precision * post.vhat - 1.0));
      }
    }
  };

  // states reached by running on scenes
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SceneConfig cfg;
    cfg.seed = seed;
    cfg.subset_size = 18;
    const Scene scene = generate_scene(cfg);
    const Channel ch = receiver_channel(scene);
    Engine e(scene.y, ch, {}, init_periodogram(scene.y, cfg.M_full, ch));
    for (int it = 0; it < 3; ++it) {
      e.update_z_to_delta();
      e.sweep();
      e.update_delta_to_z();
      check_engine(e);
    }
  }
  // random message states followed by one sweep
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SceneConfig cfg;
    cfg.seed = 100 + seed;
    cfg.M_full = 15;
    cfg.K = 2;
    const Scene scene = generate_scene(cfg);
    const Channel ch = receiver_channel(scene);
    Engine e(scene.y, ch, {}, init_periodogram(scene.y, 6, ch));
    auto& s = e.mutable_state();
    for (Index n = 0; n < s.components(); ++n) {
      for (Index m = 0; m < s.rows(); ++m) {
        s.theta_in(n, m) = std::polar(0.2 + 5.0 * u(rng), kPi * (2 * u(rng) - 1));
        s.x_in_mean(n, m) = Complex(g(rng), g(rng));
        s.x_in_var(n, m) = 0.05 + u(rng);
      }
      e.refresh_moments(n);
    }
    e.update_z_to_delta();
    e.sweep();
    check_engine(e);
  }

  // Gaussian channel: extrinsic and prior precisions add to the posterior precision
  double worst_awgn = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double noise = 0.01 + 5.0 * u(rng), vA = 0.01 + 5.0 * u(rng);
    ObservedRows y;
    y.indices = {0};
    y.full_length = 1;
    y.y = VectorXcd::Constant(1, Complex(g(rng), g(rng)));
    const auto post = posterior_moments(Channel::awgn(noise), y, 0, Complex(g(rng), g(rng)), vA);
    const double v_ext = 1.0 / (1.0 / post.var - 1.0 / vA);
    worst_awgn = std::max(worst_awgn, std::abs(v_ext - noise) / noise);
  }

  Outcome out;
  out.pass = checked > 0 && worst < 1e-10 && worst_awgn < 1e-10;
  out.detail = fmt("max identity err %.2e", std::max(worst, worst_awgn)) + fmt(" over %.0f states", checked);
  return out;
}

// 6. Worked example: M=21, |M|=18, K=3, 10 dB.
Outcome fig7() {
  const auto start = Clock::now();
  cli::SweepSpec spec;
  spec.name = "fig7";
  spec.variable = cli::SweepVariable::kSnr;
  spec.values = {10.0};
  spec.trials = 100;
  spec.fixed.M_full = 21;
  spec.fixed.subset_size = 18;
  spec.fixed.K = 3;
  spec.seed_base = 7000;
  const auto rows = cli::run_sweep(spec, jobs());
  const double elapsed = seconds_since(start);
  int correct = 0, below = 0;
  std::vector<double> nmse;
  for (const auto& r : rows) {
    if (!r.report.order_correct) continue;
    ++correct;
    nmse.push_back(r.report.nmse_db);
    below += r.report.nmse_db <= -15.0 ? 1 : 0;
  }
  const double rate = correct / 100.0;
  const double mean_nmse = mean(nmse);
  Outcome out;
  out.pass = rate >= 0.7 && mean_nmse <= -15.0 && elapsed < 120.0;
  out.detail = fmt("K_hat=3 in %.0f%%", 100 * rate) + fmt(", mean NMSE %.2f dB in those", mean_nmse) +
               fmt(" (%.0f individually <= -15 dB)", below) + fmt(", %.1f s", elapsed);
  return out;
}

// 7. NMSE and model-order trend over SNR: M=21, K=5.
Outcome fig8() {
  const auto start = Clock::now();
  cli::SweepSpec spec;
  spec.name = "fig8";
  spec.variable = cli::SweepVariable::kSnr;
  spec.values = {5, 10, 15, 20, 25, 30};
  spec.trials = 100;
  spec.fixed.M_full = 21;
  spec.fixed.K = 5;
  spec.seed_base = 8000;
  const auto summary = cli::summarize(cli::run_sweep(spec, jobs()));
  bool decreasing = true;
  std::string curve;
  for (std::size_t i = 0; i < summary.size(); ++i) {
    if (i > 0 && !(summary[i].mean_nmse_db < summary[i - 1].mean_nmse_db)) decreasing = false;
    curve += fmt(i == 0 ? "%.1f" : "/%.1f", summary[i].mean_nmse_db);
  }
  const double gain = summary[4].success_rate - summary[0].success_rate;
  Outcome out;
  out.pass = decreasing && gain >= 0.2;
  out.detail = "mean NMSE " + curve + " dB" + fmt(", success 5 dB %.2f", summary[0].success_rate) +
               fmt(" -> 25 dB %.2f", summary[4].success_rate) + fmt(", %.0f s", seconds_since(start));
  return out;
}

// 8. Quantized measurements: N=M=41, K=3, 20 trials per cell.
Outcome fig11() {
  const auto start = Clock::now();
  const std::vector<double> snrs{10, 20, 30};
  const std::vector<int> depths{1, 2, 3};
  std::vector<std::vector<double>> dnmse(snrs.size(), std::vector<double>(depths.size()));
  int plateaued = 0, runs = 0;
  for (std::size_t si = 0; si < snrs.size(); ++si) {
    for (std::size_t bi = 0; bi < depths.size(); ++bi) {
      std::vector<double> values;
      for (int trial = 0; trial < 20; ++trial) {
        SceneConfig cfg;
        cfg.M_full = 41;
        cfg.K = 3;
        cfg.snr_db = snrs[si];
        cfg.channel = ChannelKind::kQuantized;
        cfg.bits = depths[bi];
        cfg.seed = 11000 + static_cast<std::uint64_t>(trial);
        const auto outcome = cli::run_trial(cfg, 41, {});
        values.push_back(outcome.report.dnmse_db);
        // plateau: the NMSE trace varies by at most 1 dB over its last quarter
        const auto& trace = outcome.run.trace;
        const std::size_t tail = std::max<std::size_t>(trace.size() / 4, std::min<std::size_t>(trace.size(), 3));
        double lo = 1e300, hi = -1e300;
        for (std::size_t i = trace.size() - tail; i < trace.size(); ++i) {
          const double v = trace[i].nmse_db.value_or(0.0);
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
        plateaued += hi - lo <= 1.0 ? 1 : 0;
        ++runs;
      }
      dnmse[si][bi] = mean(values);
    }
  }
  const double elapsed = seconds_since(start);
  const double bit_gain = dnmse[1][0] - dnmse[1][2];
  bool snr_helps = true;
  for (std::size_t bi = 0; bi < depths.size(); ++bi) snr_helps = snr_helps && dnmse[2][bi] < dnmse[0][bi];
  const double plateau_rate = static_cast<double>(plateaued) / runs;
  Outcome out;
  out.pass = bit_gain >= 3.0 && snr_helps && plateau_rate >= 0.9 && elapsed < 600.0;
  std::string table;
  for (std::size_t si = 0; si < snrs.size(); ++si) {
    table += fmt(" %.0fdB:", snrs[si]);
    for (std::size_t bi = 0; bi < depths.size(); ++bi) table += fmt(bi == 0 ? "%.1f" : "/%.1f", dnmse[si][bi]);
  }
  out.detail = "dNMSE 1/2/3-bit" + table + fmt("; 3-bit gain at 20 dB %.1f dB", bit_gain) +
               fmt(", plateau in %.0f%% of runs", 100 * plateau_rate) + fmt(", %.0f s", elapsed);
  return out;
}

// 9. Per-iteration cost against M with N = M.
Outcome complexity() {
  const std::vector<int> sizes{21, 41, 81};
  std::vector<double> per_iteration;
  for (const int M : sizes) {
    SceneConfig cfg;
    cfg.M_full = M;
    cfg.K = 3;
    cfg.seed = 9;
    const Scene scene = generate_scene(cfg);
    const Channel ch = receiver_channel(scene);
    const InitResult init = init_periodogram(scene.y, M, ch);
    const int iterations = M <= 41 ? 20 : 5;
    double best = 1e300;
    for (int rep = 0; rep < 5; ++rep) {
      Engine e(scene.y, ch, {}, init);
      const auto start = Clock::now();
      for (int it = 0; it < iterations; ++it) {
        e.update_z_to_delta();
        e.sweep();
        e.update_delta_to_z();
      }
      best = std::min(best, seconds_since(start) / iterations);
    }
    per_iteration.push_back(best);
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(sizes.size());
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const double x = std::log(static_cast<double>(sizes[i])), y = std::log(per_iteration[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  Outcome out;
  out.pass = slope >= 2.5 && slope <= 3.5;
  out.detail = fmt("fitted exponent %.2f", slope) + fmt(" (%.2f", 1e3 * per_iteration[0]) +
               fmt("/%.2f", 1e3 * per_iteration[1]) + fmt("/%.2f ms per iteration)", 1e3 * per_iteration[2]);
  return out;
}

// 10. Repeated runs produce identical bytes.
Outcome determinism() {
  cli::SweepSpec spec;
  spec.variable = cli::SweepVariable::kSnr;
  spec.values = {5.0, 20.0};
  spec.trials = 4;
  spec.fixed.M_full = 15;
  spec.fixed.K = 2;
  spec.seed_base = 10;
  auto csv = [&](int workers) {
    std::ostringstream raw, summary;
    const auto rows = cli::run_sweep(spec, workers);
    cli::write_sweep_csv(raw, rows);
    cli::write_summary_csv(summary, cli::summarize(rows));
    return raw.str() + summary.str();
  };
  const std::string first = csv(1);
  const bool csv_same = first == csv(1) && first == csv(3);

  SceneConfig cfg;
  cfg.channel = ChannelKind::kQuantized;
  cfg.bits = 2;
  cfg.seed = 99;
  auto record = [&] {
    const auto outcome = cli::run_trial(cfg, 0, {});
    return cli::run_record(outcome, {}, cfg).dump(2);
  };
  const bool json_same = record() == record();
  Outcome out;
  out.pass = csv_same && json_same;
  out.detail = std::string("CSV ") + (csv_same ? "identical" : "differs") + ", JSON " +
               (json_same ? "identical" : "differs");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"circular kernels", bessel_kernels}, {"projection oracle", projection_oracle},
      {"channel oracle", channel_oracle},   {"Bernoulli-Gaussian oracle", bg_oracle},
      {"message algebra", ep_algebra},      {"worked example", fig7},
      {"SNR trend", fig8},                  {"quantized trend", fig11},
      {"complexity", complexity},           {"determinism", determinism}};
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(number)) continue;
    Outcome result;
    try {
      result = criteria[i].second();
    } catch (const std::exception& e) {
      result.detail = std::string("exception: ") + e.what();
    }
    failures += result.pass ? 0 : 1;
    std::printf("criterion %2d %-26s %s  %s\n", number, criteria[i].first, result.pass ? "PASS" : "FAIL",
                result.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
