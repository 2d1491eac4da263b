#include "eplse/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "eplse/json_util.hpp"

namespace eplse {

VectorXcd steering(double theta, const std::vector<int>& rows) {
  VectorXcd a(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    a(static_cast<Index>(i)) = std::polar(1.0, rows[i] * theta);
  return a;
}

VectorXcd steering(double theta, int length) {
  VectorXcd a(length);
  for (int i = 0; i < length; ++i) a(i) = std::polar(1.0, i * theta);
  return a;
}

VectorXcd synthesize(const ArrayXd& theta, const VectorXcd& x, int length) {
  VectorXcd z = VectorXcd::Zero(length);
  for (Index k = 0; k < theta.size(); ++k) z += steering(theta(k), length) * x(k);
  return z;
}

double min_wrap_distance(const ArrayXd& theta) {
  double best = std::numeric_limits<double>::infinity();
  for (Index k = 0; k < theta.size(); ++k)
    for (Index l = k + 1; l < theta.size(); ++l)
      best = std::min(best, std::abs(wrap_angle(theta(k) - theta(l))));
  return best;
}

namespace {

void check_config(const SceneConfig& cfg) {
  if (cfg.M_full < 1) throw InputError("scene: M must be >= 1");
  if (cfg.K < 0 || cfg.K > cfg.effective_N() || cfg.effective_N() > cfg.M_full)
    throw InputError("scene: require 0 <= K <= N <= M");
  if (cfg.effective_subset() > cfg.M_full) throw InputError("scene: subset larger than M");
  if (std::isnan(cfg.snr_db)) throw InputError("scene: SNR is NaN");
  if (cfg.channel == ChannelKind::kQuantized && (cfg.bits < 1 || cfg.bits > 16))
    throw InputError("scene: bits must be in [1, 16]");
}

// Noise, subset and channel output. Shared by both scene constructors so that
// a fixed truth sees exactly the same randomness stream layout.
void finish_scene(Scene& s, const SceneConfig& cfg, std::mt19937_64& rng) {
  const int M = cfg.M_full;
  s.z = synthesize(s.theta_true, s.x_true, M);
  s.snr_db = cfg.snr_db;
  s.seed = cfg.seed;
  s.channel = cfg.channel;
  const double energy = s.z.squaredNorm();
  s.sigma_w2 = std::isinf(cfg.snr_db) && cfg.snr_db > 0
                   ? 0.0
                   : energy / (M * std::pow(10.0, cfg.snr_db / 10.0));

  std::normal_distribution<double> gauss(0.0, 1.0);
  VectorXcd noisy = s.z;
  const double sd = std::sqrt(s.sigma_w2 / 2.0);
  for (int i = 0; i < M; ++i) {
    const double re = gauss(rng);
    const double im = gauss(rng);
    noisy(i) += Complex(sd * re, sd * im);
  }

  std::vector<int> rows(M);
  std::iota(rows.begin(), rows.end(), 0);
  const int subset = cfg.effective_subset();
  if (subset < M) {
    // partial Fisher-Yates
    for (int i = 0; i < subset; ++i) {
      std::uniform_int_distribution<int> pick(i, M - 1);
      std::swap(rows[i], rows[pick(rng)]);
    }
    rows.resize(subset);
    std::sort(rows.begin(), rows.end());
  }
  s.y.indices = rows;
  s.y.full_length = M;
  VectorXcd observed(subset);
  for (int i = 0; i < subset; ++i) observed(i) = noisy(rows[i]);

  const double sigma_z = std::sqrt(energy / M);
  s.quantizer_limit = 3.0 * sigma_z / std::numbers::sqrt2;
  if (cfg.channel == ChannelKind::kQuantized) {
    s.bits = cfg.bits;
    const double limit = s.quantizer_limit > 0.0 ? s.quantizer_limit : 1.0;
    s.quantizer_limit = limit;
    s.y.codes = quantize(observed, cfg.bits, limit);
  } else {
    s.y.y = observed;
  }
}

}  // namespace

Scene generate_scene(const SceneConfig& cfg) {
  check_config(cfg);
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> angle(-kPi, kPi);
  std::normal_distribution<double> magnitude(1.0, 0.2);

  Scene s;
  const double separation = kTwoPi / cfg.effective_N();
  s.theta_true.resize(cfg.K);
  constexpr int kMaxDraws = 100000;
  bool placed = cfg.K <= 1;
  if (cfg.K == 1) s.theta_true(0) = angle(rng);
  for (int attempt = 0; !placed && attempt < kMaxDraws; ++attempt) {
    for (int k = 0; k < cfg.K; ++k) s.theta_true(k) = angle(rng);
    placed = min_wrap_distance(s.theta_true) >= separation;
  }
  if (!placed) throw InputError("scene: could not place frequencies with the required separation");

  s.x_true.resize(cfg.K);
  for (int k = 0; k < cfg.K; ++k) {
    double mag = magnitude(rng);
    while (mag < 0.0) mag = magnitude(rng);
    s.x_true(k) = std::polar(mag, angle(rng));
  }
  finish_scene(s, cfg, rng);
  return s;
}

Scene make_scene(const ArrayXd& theta, const VectorXcd& x, const SceneConfig& cfg) {
  if (theta.size() != x.size()) throw InputError("scene: theta and x lengths differ");
  SceneConfig local = cfg;
  local.K = static_cast<int>(theta.size());
  check_config(local);
  std::mt19937_64 rng(cfg.seed);
  Scene s;
  s.theta_true = theta.unaryExpr([](double t) { return wrap_angle(t); });
  s.x_true = x;
  s.amplitude_model = "fixed";
  finish_scene(s, local, rng);
  return s;
}

Channel receiver_channel(const Scene& scene, double one_bit_noise) {
  if (scene.channel == ChannelKind::kAwgn) return Channel::awgn(std::max(scene.sigma_w2, kVarMin), true);
  if (scene.bits == 1) return Channel::quantized(1, scene.quantizer_limit, one_bit_noise, false);
  return Channel::quantized(scene.bits, scene.quantizer_limit, 1.0, true);
}

nlohmann::json scene_to_json(const Scene& s) {
  nlohmann::json j;
  j["theta_true"] = to_json_array(s.theta_true);
  j["x_true"] = to_json_array(s.x_true);
  j["z"] = to_json_array(s.z);
  j["indices"] = s.y.indices;
  j["full_length"] = s.y.full_length;
  j["sigma_w2"] = s.sigma_w2;
  j["snr_db"] = json_number(s.snr_db);
  j["seed"] = s.seed;
  j["channel"] = s.channel == ChannelKind::kAwgn ? "awgn" : "quantized";
  j["amplitude_model"] = s.amplitude_model;
  if (s.channel == ChannelKind::kAwgn) {
    j["y"] = to_json_array(s.y.y);
  } else {
    j["bits"] = s.bits;
    j["quantizer_limit"] = s.quantizer_limit;
    j["codes_re"] = std::vector<int>(s.y.codes.re.begin(), s.y.codes.re.end());
    j["codes_im"] = std::vector<int>(s.y.codes.im.begin(), s.y.codes.im.end());
  }
  return j;
}

Scene scene_from_json(const nlohmann::json& j) {
  Scene s;
  try {
    s.theta_true = real_array_from_json(j.at("theta_true"));
    s.x_true = complex_vector_from_json(j.at("x_true"));
    s.z = complex_vector_from_json(j.at("z"));
    s.y.indices = j.at("indices").get<std::vector<int>>();
    s.y.full_length = j.at("full_length").get<int>();
    s.sigma_w2 = j.at("sigma_w2").get<double>();
    s.snr_db = number_from_json(j.at("snr_db"));
    s.seed = j.value("seed", std::uint64_t{0});
    s.amplitude_model = j.value("amplitude_model", std::string{});
    const std::string kind = j.at("channel").get<std::string>();
    if (kind == "awgn") {
      s.channel = ChannelKind::kAwgn;
      s.y.y = complex_vector_from_json(j.at("y"));
    } else if (kind == "quantized") {
      s.channel = ChannelKind::kQuantized;
      s.bits = j.at("bits").get<int>();
      s.quantizer_limit = j.at("quantizer_limit").get<double>();
      const auto re = j.at("codes_re").get<std::vector<int>>();
      const auto im = j.at("codes_im").get<std::vector<int>>();
      s.y.codes.re = Eigen::Map<const Eigen::ArrayXi>(re.data(), static_cast<Index>(re.size()));
      s.y.codes.im = Eigen::Map<const Eigen::ArrayXi>(im.data(), static_cast<Index>(im.size()));
    } else {
      throw InputError("scene: unknown channel '" + kind + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("scene: malformed record: ") + e.what());
  }
  s.y.validate(s.channel);
  return s;
}

}  // namespace eplse
