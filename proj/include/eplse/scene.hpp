#pragma once

// Synthetic line-spectrum scenes: frequencies with a minimum wrap-around
// separation, random complex amplitudes, noise at a prescribed SNR, an
// observed row subset, and optional uniform quantization.

#include <cstdint>
#include <limits>
#include <string>

#include "json.hpp"

#include "eplse/channels.hpp"
#include "eplse/types.hpp"

namespace eplse {

struct SceneConfig {
  int M_full = 21;
  int K = 3;
  int N = 0;                // separation reference; 0 means N = M_full
  double snr_db = 20.0;     // +inf gives a noiseless scene
  int subset_size = 0;      // 0 means all rows observed
  ChannelKind channel = ChannelKind::kAwgn;
  int bits = 1;             // quantized channel only
  std::uint64_t seed = 0;

  int effective_N() const { return N > 0 ? N : M_full; }
  int effective_subset() const { return subset_size > 0 ? subset_size : M_full; }
};

struct Scene {
  ArrayXd theta_true;
  VectorXcd x_true;
  VectorXcd z;           // clean signal on the full grid
  ObservedRows y;
  double sigma_w2 = 0.0;
  double snr_db = 0.0;
  std::uint64_t seed = 0;
  ChannelKind channel = ChannelKind::kAwgn;
  int bits = 0;
  double quantizer_limit = 0.0;
  // Magnitudes are drawn from N(1, 0.2) with 0.2 read as the standard deviation.
  std::string amplitude_model = "magnitude~N(mean=1,sd=0.2) truncated at 0; phase~U(-pi,pi)";
};

/// Steering vector a(theta) restricted to the given absolute rows.
VectorXcd steering(double theta, const std::vector<int>& rows);
VectorXcd steering(double theta, int length);

/// Sum of a(theta_k) x_k over the full grid of the given length.
VectorXcd synthesize(const ArrayXd& theta, const VectorXcd& x, int length);

/// min_{k != l} |wrap(theta_k - theta_l)|; +inf for fewer than two entries.
double min_wrap_distance(const ArrayXd& theta);

Scene generate_scene(const SceneConfig& cfg);

/// Scene with a prescribed ground truth; noise, subset and quantization are
/// drawn from the seed exactly as in generate_scene.
Scene make_scene(const ArrayXd& theta, const VectorXcd& x, const SceneConfig& cfg);

/// Channel the estimator should use for a scene. One-bit scenes run with a
/// fixed unit noise variance; multi-bit and AWGN scenes learn it.
Channel receiver_channel(const Scene& scene, double one_bit_noise = 1.0);

nlohmann::json scene_to_json(const Scene& scene);
Scene scene_from_json(const nlohmann::json& j);

}  // namespace eplse
