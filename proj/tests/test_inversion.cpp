// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "msgan/errors.hpp"
#include "msgan/inversion.hpp"
#include "msgan/random.hpp"
#include "support/test_support.hpp"

using namespace msgan;
using msgan::testing::micro_base;
using msgan::testing::random_image;
using msgan::testing::toy_base;

TEST(MeanCode, SingleSampleIsOneDraw) {
  const auto base = micro_base(3);
  const auto z0 = gaussian_vector(derive_seed({7, 0x4d45414e, 0}), base.z_dim());
  EXPECT_EQ(mean_code(base, 1, 7), base.random_style(z0));
  EXPECT_THROW(mean_code(base, 0, 7), ArgumentError);
}

TEST(MeanCode, MeanOfCodeWithItself) {
  const auto base = micro_base(3);
  const SCode c = mean_code(base, 16, 2);
  EXPECT_LT(distance(0.5 * (c + c), c), 1e-15);
}

TEST(MeanCode, EstimatorVarianceShrinksWithSamples) {
  const auto base = micro_base(3);
  auto spread = [&](int n) {
    double sum = 0.0, sum2 = 0.0;
    const int reps = 40;
    for (int r = 0; r < reps; ++r) {
      const double v = mean_code(base, n, 1000 + r).row(0)(0);
      sum += v;
      sum2 += v * v;
    }
    return sum2 / reps - (sum / reps) * (sum / reps);
  };
  const double v4 = spread(4);
  const double v64 = spread(64);
  // 1/n scaling predicts a 16x drop; allow slack for the 40-draw estimate.
  EXPECT_LT(v64, v4 / 4.0);
}

TEST(Invert, ZeroStepsReturnsInitialisation) {
  const auto base = micro_base(3);
  const Image target = random_image(3, 8, 1);
  InversionConfig cfg;
  cfg.steps = 0;
  cfg.mean_samples = 8;
  cfg.target_space = InversionSpace::S;
  EXPECT_EQ(invert(base, target, cfg, 5), mean_code(base, 8, 5));
  cfg.target_space = InversionSpace::WPlus;
  EXPECT_EQ(invert(base, target, cfg, 5), to_style(base.styler, mean_wplus(base, 8, 5)));
  const auto r = invert_detailed(base, target, cfg, 5);
  EXPECT_EQ(r.best_step, 0);
  EXPECT_EQ(r.initial_loss, r.final_loss);
}

TEST(Invert, DeterministicAndScheduleConsistent) {
  const auto base = micro_base(3);
  const Image target = random_image(3, 8, 2);
  for (auto space : {InversionSpace::S, InversionSpace::WPlus}) {
    InversionConfig cfg;
    cfg.steps = 25;
    cfg.target_space = space;
    cfg.init = InversionInit::SeededRandom;
    const auto a = invert_detailed(base, target, cfg, 9);
    const auto b = invert_detailed(base, target, cfg, 9);
    EXPECT_EQ(a.code, b.code);
    EXPECT_EQ(a.code.schedule(), base.schedule());
    EXPECT_LE(a.final_loss, a.initial_loss);
  }
}

TEST(Invert, BatchMatchesPerTargetBestIterates) {
  const auto base = micro_base(3);
  const std::vector<Image> targets{random_image(3, 8, 1), random_image(3, 8, 2), random_image(3, 8, 3)};
  InversionConfig cfg;
  cfg.steps = 30;
  const auto rs = invert_batch(base, targets, cfg, 4);
  ASSERT_EQ(rs.size(), 3u);
  for (const auto& r : rs) {
    EXPECT_LE(r.final_loss, r.initial_loss);
    EXPECT_GE(r.best_step, 0);
    EXPECT_LE(r.best_step, cfg.steps);
  }
  // The reported mse belongs to the returned code.
  EXPECT_NEAR(mean_squared_error(base.generator.synthesize(rs[1].code), targets[1]), rs[1].final_mse, 1e-9);
}

TEST(Invert, Errors) {
  const auto base = micro_base(3);
  InversionConfig cfg;
  cfg.steps = 3;
  EXPECT_THROW(invert(base, random_image(3, 16, 1), cfg, 1), ShapeError);
  Image bad = random_image(3, 8, 1);
  bad.at(0, 0, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    invert(base, bad, cfg, 1);
    ADD_FAILURE() << "expected a numeric error";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("step"), std::string::npos) << e.what();
  }
  InversionConfig neg;
  neg.steps = -1;
  EXPECT_THROW(neg.validate(), ConfigError);
}

TEST(Invert, JsonRoundTrip) {
  InversionConfig c;
  c.steps = 17;
  c.init = InversionInit::SeededRandom;
  c.target_space = InversionSpace::S;
  const nlohmann::json j = c;
  EXPECT_EQ(j["init"], "seeded_random");
  EXPECT_EQ(j["target_space"], "S");
  const auto d = j.get<InversionConfig>();
  EXPECT_EQ(d.steps, 17);
  EXPECT_EQ(d.init, InversionInit::SeededRandom);
  EXPECT_EQ(d.target_space, InversionSpace::S);
}

// Self-inversion on the pretrained toy prior: targets drawn from the
// generator itself must be reconstructed to at most 10% of the starting MSE.
// Ten seeds, worst case reported.
TEST(Invert, SelfInversionOracleToy) {
  const BaseModel& base = toy_base();
  std::vector<Image> targets;
  for (std::uint64_t k = 0; k < 10; ++k)
    targets.push_back(base.generator.synthesize(base.random_style(gaussian_vector(derive_seed({77, k}), base.z_dim()))));
  const auto rs = invert_batch(base, targets, InversionConfig{}, 123);
  double worst = 0.0;
  for (const auto& r : rs) {
    ASSERT_GT(r.initial_mse, 0.0);
    worst = std::max(worst, r.final_mse / r.initial_mse);
  }
  RecordProperty("worst_mse_ratio", std::to_string(worst));
  std::cout << "worst final/initial mse ratio: " << worst << '\n';
  EXPECT_LE(worst, 0.10);
}
