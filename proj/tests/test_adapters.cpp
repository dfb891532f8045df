// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "cers/errors.hpp"
#include "cers/lora.hpp"
#include "cers/probe.hpp"
#include "cers/roi_preprocess.hpp"
#include "cers/seg_head.hpp"

using namespace cers;

namespace {

Eigen::MatrixXd random_matrix(int rows, int cols, std::mt19937_64& rng,
                              double stddev = 1.0) {
  std::normal_distribution<double> normal(0.0, stddev);
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = normal(rng);
  return m;
}

}  // namespace

TEST_CASE("lora merge equals the base exactly at init") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const int d2 = 3 + static_cast<int>(rng() % 6);
    const int d1 = 3 + static_cast<int>(rng() % 6);
    const Eigen::MatrixXd base = random_matrix(d2, d1, rng);
    const int rank = 1 + static_cast<int>(rng() % (std::min(d1, d2) - 1));
    const LoraLayer layer = lora_init(base, rank, 64.0, trial);
    const Eigen::MatrixXd merged = lora_merge(layer);
    for (int r = 0; r < d2; ++r)
      for (int c = 0; c < d1; ++c) CHECK(merged(r, c) == base(r, c));
  }
}

TEST_CASE("rank must stay strictly below min(d1, d2)") {
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd base = random_matrix(4, 6, rng);
  CHECK_THROWS_AS(lora_init(base, 4, 64.0, 0), ConfigError);
  CHECK_THROWS_AS(lora_init(base, 0, 64.0, 0), ConfigError);
  CHECK_NOTHROW(lora_init(base, 3, 64.0, 0));
}

TEST_CASE("gaussian init of V is centered with variance near 1/r") {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd base = random_matrix(64, 256, rng);
  const int rank = 16;
  const LoraLayer layer = lora_init(base, rank, 64.0, 9);
  const double n = static_cast<double>(layer.down.size());
  const double mean = layer.down.sum() / n;
  // sigma = 1/sqrt(r); the mean of n draws stays within 4 sigma/sqrt(n).
  CHECK(std::abs(mean) <= 4.0 / std::sqrt(static_cast<double>(rank) * n));
  const double var = (layer.down.array() - mean).square().sum() / n;
  CHECK(var == doctest::Approx(1.0 / rank).epsilon(0.15));
}

TEST_CASE("alpha = 0 makes the adapter path inert") {
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd base = random_matrix(5, 7, rng);
  LoraLayer layer = lora_init(base, 2, 0.0, 1);
  layer.up = random_matrix(5, 2, rng);  // non-trivial factors
  const Eigen::VectorXd x = random_matrix(7, 1, rng);
  const Eigen::VectorXd out = lora_forward(x, layer);
  CHECK((out - base * x).cwiseAbs().maxCoeff() < 1e-14);

  // Even in train mode with dropout, the base path is untouched.
  Rng dropout_rng(5);
  const Eigen::VectorXd trained = lora_forward(x, layer, RunMode::train, &dropout_rng);
  CHECK((trained - base * x).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("eval forward equals the merged-matrix product") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd base = random_matrix(8, 6, rng);
    LoraLayer layer = lora_init(base, 3, 1.7, trial);
    layer.up = random_matrix(8, 3, rng, 0.5);
    const Eigen::MatrixXd merged = lora_merge(layer);
    for (int k = 0; k < 5; ++k) {
      const Eigen::VectorXd x = random_matrix(6, 1, rng);
      const Eigen::VectorXd direct = lora_forward(x, layer);
      CHECK((direct - merged * x).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("hand-multiplied 2x2 rank-1 update") {
  LoraLayer layer;
  layer.base = Eigen::MatrixXd::Identity(2, 2);
  layer.up.resize(2, 1);
  layer.up << 1.0, 0.0;
  layer.down.resize(1, 2);
  layer.down << 0.0, 1.0;
  layer.scale = 2.0;
  const Eigen::MatrixXd merged = lora_merge(layer);
  CHECK(merged(0, 0) == 1.0);
  CHECK(merged(0, 1) == 2.0);
  CHECK(merged(1, 0) == 0.0);
  CHECK(merged(1, 1) == 1.0);
}

TEST_CASE("probe lambda follows 100/(M*C) exactly") {
  CHECK(probe_lambda(1024, 2) == 0.048828125);
  CHECK(probe_lambda(512, 4) == 0.048828125);
  CHECK(probe_lambda(384, 28) == 100.0 / 10752.0);
  // The formula reacts exactly to each argument.
  CHECK(probe_lambda(384, 14) == 2.0 * probe_lambda(384, 28));
  CHECK(probe_lambda(192, 28) == 2.0 * probe_lambda(384, 28));
}

TEST_CASE("probe separates linearly separable data") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal(0.0, 0.3);
  const int n = 100;
  Eigen::MatrixXd x(2 * n, 2);
  std::vector<int> y(2 * n);
  for (int i = 0; i < 2 * n; ++i) {
    x(i, 0) = normal(rng) + (i < n ? -2.0 : 2.0);
    x(i, 1) = normal(rng);
    y[static_cast<std::size_t>(i)] = i < n ? 0 : 1;
  }
  ProbeConfig config;
  config.lr = 0.05;
  config.seed = 1;
  const ProbeResult result = train_linear_probe(x, y, 2, config);
  CHECK(result.epochs_run <= 80);
  CHECK(result.loss_history.back() < result.loss_history.front());

  int correct = 0;
  for (int i = 0; i < 2 * n; ++i)
    correct += probe_predict(result.probe, x.row(i)) == y[static_cast<std::size_t>(i)];
  CHECK(static_cast<double>(correct) / (2.0 * n) >= 0.99);
}

TEST_CASE("probe epoch counter never exceeds 80 and the cap is enforced") {
  std::mt19937_64 rng(8);
  Eigen::MatrixXd x = random_matrix(40, 3, rng);
  std::vector<int> y(40);
  for (int i = 0; i < 40; ++i) y[static_cast<std::size_t>(i)] = i % 2;

  ProbeConfig config;
  config.seed = 2;
  const ProbeResult result = train_linear_probe(x, y, 2, config);
  CHECK(result.epochs_run <= 80);

  config.max_epochs = 81;
  CHECK_THROWS_AS(train_linear_probe(x, y, 2, config), ConfigError);
}

TEST_CASE("probe plateau schedule halves the rate and stops at the floor") {
  // Constant features make the loss bottom out at the class-prior entropy;
  // Adam then oscillates, the monitor stalls, and the schedule must walk the
  // rate down to the floor and stop before the epoch cap.
  const Eigen::MatrixXd x = Eigen::MatrixXd::Zero(30, 2);
  std::vector<int> y(30);
  for (int i = 0; i < 30; ++i) y[static_cast<std::size_t>(i)] = i % 2;
  ProbeConfig config;
  config.lr = 0.1;
  config.lr_floor = 0.01;  // short ladder: 0.1 -> 0.05 -> 0.025 -> 0.0125 -> stop
  config.plateau_patience = 2;
  config.seed = 3;
  const ProbeResult result = train_linear_probe(x, y, 2, config);
  CHECK(result.epochs_run <= 80);
  bool halved = false;
  for (std::size_t i = 1; i < result.lr_history.size(); ++i)
    if (result.lr_history[i] < result.lr_history[i - 1]) halved = true;
  CHECK(halved);
  for (double lr : result.lr_history) CHECK(lr >= config.lr_floor);
  CHECK(result.epochs_run < 80);  // stopped by the floor, not the cap
}

TEST_CASE("probe rejects single-class training data") {
  std::mt19937_64 rng(10);
  Eigen::MatrixXd x = random_matrix(10, 2, rng);
  std::vector<int> y(10, 0);
  CHECK_THROWS_AS(train_linear_probe(x, y, 2, ProbeConfig{}), DataError);
}

TEST_CASE("probe training is seed-deterministic") {
  std::mt19937_64 rng(11);
  Eigen::MatrixXd x = random_matrix(24, 3, rng);
  std::vector<int> y(24);
  for (int i = 0; i < 24; ++i) y[static_cast<std::size_t>(i)] = i % 2;
  ProbeConfig config;
  config.seed = 12;
  const ProbeResult a = train_linear_probe(x, y, 2, config);
  const ProbeResult b = train_linear_probe(x, y, 2, config);
  CHECK(a.loss_history == b.loss_history);
  CHECK((a.probe.weights - b.probe.weights).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("dice loss matches its defining cases") {
  SUBCASE("perfect prediction") {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(10, 10);
    m.block(2, 2, 5, 5).setOnes();
    CHECK(dice_loss(m, m) <= 1e-6);
  }
  SUBCASE("complement prediction") {
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(10, 10);
    t.block(0, 0, 5, 10).setOnes();
    const Eigen::MatrixXd p = Eigen::MatrixXd::Ones(10, 10) - t;
    CHECK(dice_loss(p, t) >= 1.0 - 1e-3);
  }
  SUBCASE("half overlap counts to 0.5") {
    // |pred| = |target| = 100 px with 50 px overlap.
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(20, 20);
    t.block(0, 0, 10, 10).setOnes();
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(20, 20);
    p.block(5, 0, 10, 10).setOnes();
    CHECK(dice_loss(p, t) == doctest::Approx(0.5).epsilon(1e-6));
  }
  SUBCASE("shape mismatch is rejected") {
    CHECK_THROWS_AS(dice_loss(Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(3, 2)),
                    DataError);
  }
  SUBCASE("out-of-range predictions are rejected") {
    Eigen::MatrixXd p = Eigen::MatrixXd::Constant(2, 2, 1.5);
    CHECK_THROWS_AS(dice_loss(p, Eigen::MatrixXd::Zero(2, 2)), DataError);
  }
}

TEST_CASE("dice loss stays in [0,1] and is symmetric on binary inputs") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(8, 8);
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(8, 8);
    for (int r = 0; r < 8; ++r)
      for (int c = 0; c < 8; ++c) {
        a(r, c) = static_cast<double>(rng() % 2);
        b(r, c) = static_cast<double>(rng() % 2);
      }
    const double ab = dice_loss(a, b);
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0 + 1e-6);
    CHECK(ab == doctest::Approx(dice_loss(b, a)).epsilon(1e-12));
  }
}

TEST_CASE("iou convention: empty against empty is 1") {
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(4, 4);
  CHECK(iou_score(zero, zero) == 1.0);
}

TEST_CASE("segmentation head decodes a linearly separable mask") {
  // Token feature coordinate 0 equals the token's label; everything else is
  // noise, so a linear head should reach near-perfect IoU.
  std::mt19937_64 rng(14);
  std::normal_distribution<double> noise(0.0, 0.3);
  const int g = 4, up = 2, d = 4;
  auto make_sample = [&](Eigen::MatrixXd& tokens, Eigen::MatrixXd& mask) {
    tokens.resize(g * g, d);
    mask = Eigen::MatrixXd::Zero(g * up, g * up);
    for (int t = 0; t < g * g; ++t) {
      const int label = static_cast<int>(rng() % 2);
      tokens(t, 0) = label + noise(rng) * 0.1;
      for (int c = 1; c < d; ++c) tokens(t, c) = noise(rng);
      if (label == 1) {
        const int ty = t / g, tx = t % g;
        mask.block(ty * up, tx * up, up, up).setOnes();
      }
    }
  };
  std::vector<Eigen::MatrixXd> features(12), masks(12), vf(4), vm(4);
  for (int i = 0; i < 12; ++i) make_sample(features[static_cast<std::size_t>(i)], masks[static_cast<std::size_t>(i)]);
  for (int i = 0; i < 4; ++i) make_sample(vf[static_cast<std::size_t>(i)], vm[static_cast<std::size_t>(i)]);

  SegHeadConfig config;
  config.token_grid = g;
  config.upsample = up;
  config.optimizer.lr = 0.5;
  config.optimizer.seed = 15;
  const SegTrainResult result = train_seg_head(features, masks, config, &vf, &vm);
  CHECK(result.epochs_run <= 80);
  CHECK(result.val_iou >= 0.95);

  const SegTrainResult again = train_seg_head(features, masks, config, &vf, &vm);
  CHECK(again.loss_history == result.loss_history);  // seeded rerun identical
}

TEST_CASE("segmentation training rejects an all-empty mask set") {
  std::mt19937_64 rng(16);
  std::vector<Eigen::MatrixXd> features = {random_matrix(16, 3, rng)};
  std::vector<Eigen::MatrixXd> masks = {Eigen::MatrixXd::Zero(8, 8)};
  SegHeadConfig config;
  config.token_grid = 4;
  config.upsample = 2;
  CHECK_THROWS_AS(train_seg_head(features, masks, config), DataError);
}

TEST_CASE("roi preprocessing pins the normalization constants") {
  // A constant gray image resizes to itself, so each output channel must be
  // exactly (128/255 - mean) / std.
  Thumbnail t;
  t.width = 17;
  t.height = 13;
  t.pixels.assign(static_cast<std::size_t>(17) * 13 * 3, 128);
  const FloatImage out = roi_preprocess(t, 224);
  REQUIRE(out.width == 224);
  REQUIRE(out.height == 224);
  for (int c = 0; c < 3; ++c) {
    const double expected =
        (128.0 / 255.0 - kImagenetMean[static_cast<std::size_t>(c)]) /
        kImagenetStd[static_cast<std::size_t>(c)];
    CHECK(out.at(c, 0, 0) == doctest::Approx(expected).epsilon(1e-6));
    CHECK(out.at(c, 223, 223) == doctest::Approx(expected).epsilon(1e-6));
    CHECK(out.at(c, 100, 57) == doctest::Approx(expected).epsilon(1e-6));
  }
}

TEST_CASE("projection mlp has the documented default width") {
  CHECK(ProjectionMlp::kDefaultHidden == 3584);
  const ProjectionMlp mlp = make_projection_mlp(8, 4, 16, 3);
  std::mt19937_64 rng(17);
  const Eigen::VectorXd x = random_matrix(8, 1, rng);
  const Eigen::VectorXd out = projection_forward(mlp, x);
  CHECK(out.size() == 4);
  CHECK_THROWS_AS(projection_forward(mlp, Eigen::VectorXd::Zero(5)), DataError);
}
