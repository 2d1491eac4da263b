#include "doctest.h"

#include "eplse/scene.hpp"

using namespace eplse;

TEST_CASE("single frequency scenes always place") {
  SceneConfig cfg;
  cfg.K = 1;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    cfg.seed = seed;
    const Scene s = generate_scene(cfg);
    CHECK(s.theta_true.size() == 1);
    CHECK(s.x_true.size() == 1);
  }
}

TEST_CASE("noiseless scene observes the clean signal") {
  SceneConfig cfg;
  cfg.snr_db = INFINITY;
  cfg.subset_size = 15;
  const Scene s = generate_scene(cfg);
  CHECK(s.sigma_w2 == 0.0);
  REQUIRE(s.y.size() == 15);
  for (Index i = 0; i < s.y.size(); ++i) CHECK(s.y.y(i) == s.z(s.y.indices[static_cast<std::size_t>(i)]));
}

TEST_CASE("noise variance follows the SNR definition") {
  SceneConfig cfg;
  cfg.snr_db = 10.0;
  const Scene s = generate_scene(cfg);
  CHECK(s.sigma_w2 == doctest::Approx(s.z.squaredNorm() / (21 * 10.0)));
}

TEST_CASE("same seed reproduces the scene bit for bit") {
  SceneConfig cfg;
  cfg.K = 4;
  cfg.subset_size = 17;
  cfg.seed = 99;
  const Scene a = generate_scene(cfg), b = generate_scene(cfg);
  CHECK(a.theta_true.isApprox(b.theta_true, 0.0));
  CHECK((a.y.y.array() == b.y.y.array()).all());
  CHECK(a.y.indices == b.y.indices);
  CHECK(scene_to_json(a).dump() == scene_to_json(b).dump());
  cfg.seed = 100;
  CHECK(scene_to_json(generate_scene(cfg)).dump() != scene_to_json(a).dump());
}

TEST_CASE("frequencies keep the minimum wrap distance") {
  SceneConfig cfg;
  cfg.K = 7;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    cfg.seed = seed;
    const Scene s = generate_scene(cfg);
    CHECK(min_wrap_distance(s.theta_true) >= kTwoPi / 21);
    CHECK(s.theta_true.minCoeff() >= -kPi);
    CHECK(s.theta_true.maxCoeff() < kPi);
  }
}

TEST_CASE("observed rows are a sorted subset") {
  SceneConfig cfg;
  cfg.subset_size = 18;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    cfg.seed = seed;
    const Scene s = generate_scene(cfg);
    CHECK(s.y.size() == 18);
    CHECK_NOTHROW(s.y.validate(ChannelKind::kAwgn));
  }
}

TEST_CASE("signal power is close to the number of sinusoids") {
  SceneConfig cfg;
  cfg.K = 3;
  cfg.snr_db = INFINITY;
  double acc = 0.0;
  const int seeds = 10000;
  for (int seed = 0; seed < seeds; ++seed) {
    cfg.seed = static_cast<std::uint64_t>(seed);
    acc += generate_scene(cfg).z.squaredNorm() / 21.0;
  }
  const double power = acc / seeds;
  CHECK(power == doctest::Approx(3.0).epsilon(0.1));
}

TEST_CASE("quantized scenes") {
  SceneConfig cfg;
  cfg.M_full = 41;
  cfg.channel = ChannelKind::kQuantized;
  cfg.bits = 3;
  const Scene s = generate_scene(cfg);
  CHECK(s.y.y.size() == 0);
  CHECK(s.y.codes.re.size() == 41);
  CHECK(s.y.codes.re.maxCoeff() <= 7);
  CHECK(s.quantizer_limit == doctest::Approx(3.0 * std::sqrt(s.z.squaredNorm() / 41) / std::sqrt(2.0)));
  const Channel ch = receiver_channel(s);
  CHECK(ch.learn_noise);
  cfg.bits = 1;
  const Channel one = receiver_channel(generate_scene(cfg));
  CHECK_FALSE(one.learn_noise);
  CHECK(one.sigma_w2 == 1.0);
}

TEST_CASE("scene JSON round trip") {
  for (auto kind : {ChannelKind::kAwgn, ChannelKind::kQuantized}) {
    SceneConfig cfg;
    cfg.channel = kind;
    cfg.bits = 2;
    cfg.subset_size = 12;
    const Scene s = generate_scene(cfg);
    const Scene back = scene_from_json(nlohmann::json::parse(scene_to_json(s).dump()));
    CHECK(scene_to_json(back).dump() == scene_to_json(s).dump());
  }
  CHECK_THROWS_AS(scene_from_json(nlohmann::json::parse("{\"theta_true\": []}")), InputError);
}

TEST_CASE("fixed truth scenes") {
  ArrayXd theta(3);
  theta << -2.1050, 1.4278, 2.4550;
  VectorXcd x(3);
  x << Complex(1.3154, 0.1524), Complex(0.6064, -0.2788), Complex(0.6544, -0.5616);
  SceneConfig cfg;
  cfg.subset_size = 18;
  cfg.snr_db = 10.0;
  const Scene s = make_scene(theta, x, cfg);
  CHECK(s.y.size() == 18);
  CHECK(s.z.isApprox(synthesize(theta, x, 21)));
  CHECK(std::abs(s.z(0) - x.sum()) < 1e-12);
}

TEST_CASE("scene input checks") {
  SceneConfig cfg;
  cfg.K = 22;
  CHECK_THROWS_AS(generate_scene(cfg), InputError);
  cfg.K = 2;
  cfg.subset_size = 30;
  CHECK_THROWS_AS(generate_scene(cfg), InputError);
}
