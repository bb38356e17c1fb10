// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "msgan/errors.hpp"
#include "msgan/pretrain.hpp"
#include "msgan/random.hpp"
#include "msgan/synthetic.hpp"
#include "support/test_support.hpp"

using namespace msgan;
using msgan::testing::micro_base;

namespace {

SyntheticDatasetSpec micro_dataset(int count = 64) {
  SyntheticDatasetSpec spec;
  spec.count = count;
  spec.resolution = 8;
  spec.seed = 3;
  return spec;
}

PretrainConfig micro_config(int steps) {
  PretrainConfig cfg;
  cfg.steps = steps;
  cfg.batch = 4;
  cfg.log_every = std::max(1, steps / 4);
  cfg.probe_count = 16;
  cfg.seed = 9;
  return cfg;
}

}  // namespace

TEST(Dataset, DeterministicAndSpanning) {
  SyntheticDatasetSpec spec;
  spec.count = 32;
  const auto a = render_dataset(spec);
  const auto b = render_dataset(spec);
  ASSERT_EQ(a.size(), 32u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
  double lo = 0.0, hi = 0.0;
  for (const Image& im : a) {
    EXPECT_EQ(im.height(), 32);
    EXPECT_EQ(im.channels(), 3);
    for (double v : im.pixels()) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      EXPECT_LE(std::abs(v), 1.0);
    }
  }
  EXPECT_LT(lo, -0.5);
  EXPECT_GT(hi, 0.5);

  spec.count = 1;
  EXPECT_EQ(render_dataset(spec).size(), 1u);
  spec.seed = 1;
  EXPECT_NE(render_dataset(spec)[0], a[0]);
  spec.count = 0;
  EXPECT_THROW(render_dataset(spec), ArgumentError);
}

TEST(StyleFilters, DeterministicDistinctAndNamed) {
  const auto base = micro_base(2);
  const auto refs = synthetic_references(base, 8, 4);
  ASSERT_EQ(refs.size(), 8u);
  EXPECT_TRUE(std::is_sorted(refs.begin(), refs.end(), [](const auto& x, const auto& y) { return x.name < y.name; }));
  for (std::size_t i = 0; i < refs.size(); ++i)
    for (std::size_t j = i + 1; j < refs.size(); ++j) EXPECT_NE(refs[i].image, refs[j].image);
  const auto again = synthetic_references(base, 8, 4);
  for (std::size_t i = 0; i < refs.size(); ++i) EXPECT_EQ(refs[i].image, again[i].image);

  const Image x = msgan::testing::random_image(3, 8, 1);
  for (auto f : {StyleFilter::HueShift, StyleFilter::EdgeSketch, StyleFilter::Posterize, StyleFilter::InvertPalette}) {
    EXPECT_EQ(apply_style_filter(x, f, 0), apply_style_filter(x, f, 0));
    EXPECT_NE(apply_style_filter(x, f, 0), x) << filter_name(f);
  }
  EXPECT_THROW(apply_style_filter(msgan::testing::random_image(1, 8, 1), StyleFilter::HueShift, 0), ShapeError);
}

TEST(Pretrain, ZeroBudgetReturnsInitialisation) {
  const auto init = micro_base(4);
  const auto data = render_dataset(micro_dataset());
  const auto r = pretrain_gan(init, data, micro_config(0));
  EXPECT_EQ(base_model_hash(r.model), base_model_hash(init));
  EXPECT_TRUE(r.log.empty());
}

TEST(Pretrain, FixedSeedReplay) {
  const auto init = micro_base(4);
  const auto data = render_dataset(micro_dataset());
  const auto a = pretrain_gan(init, data, micro_config(12));
  const auto b = pretrain_gan(init, data, micro_config(12));
  EXPECT_EQ(base_model_hash(a.model), base_model_hash(b.model));
  EXPECT_NE(base_model_hash(a.model), base_model_hash(init));
  ASSERT_EQ(a.log.size(), b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) EXPECT_EQ(a.log[i].d_loss, b.log[i].d_loss);
  auto other = micro_config(12);
  other.seed = 10;
  EXPECT_NE(base_model_hash(pretrain_gan(init, data, other).model), base_model_hash(a.model));
}

TEST(Pretrain, Errors) {
  const auto init = micro_base(4);
  EXPECT_THROW(pretrain_gan(init, std::vector<Image>{}, micro_config(2)), ArgumentError);
  SyntheticDatasetSpec wrong = micro_dataset(4);
  wrong.resolution = 16;
  EXPECT_THROW(pretrain_gan(init, render_dataset(wrong), micro_config(2)), ShapeError);
  auto bad = micro_config(2);
  bad.batch = 0;
  EXPECT_THROW(pretrain_gan(init, render_dataset(micro_dataset(4)), bad), ConfigError);
}

TEST(Pretrain, FeatureGapShrinksOnMicro) {
  const auto init = micro_base(4);
  const auto data = render_dataset(micro_dataset(256));
  auto cfg = micro_config(300);
  cfg.batch = 8;
  cfg.probe_count = 64;
  const auto r = pretrain_gan(init, data, cfg);
  std::cout << "feature gap: " << r.initial_gap << " -> " << r.final_gap << '\n';
  EXPECT_LT(r.final_gap, r.initial_gap);
}

// Interpolating between two W+ codes of the pretrained prior moves the image
// steadily away from the first endpoint for most pairs.
TEST(Pretrain, InterpolationSmoothnessToy) {
  const BaseModel& base = msgan::testing::toy_base();
  int monotone = 0;
  for (std::uint64_t p = 0; p < 10; ++p) {
    const WCode a = base.random_wplus(gaussian_vector(derive_seed({500, p, 0}), base.z_dim()));
    const WCode b = base.random_wplus(gaussian_vector(derive_seed({500, p, 1}), base.z_dim()));
    const Image x0 = base.generator.synthesize(to_style(base.styler, a));
    double prev = -1.0;
    bool ok = true;
    for (double t : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      const WCode w = a + t * (b - a);
      const double d = std::sqrt(mean_squared_error(base.generator.synthesize(to_style(base.styler, w)), x0));
      ok = ok && d > prev;
      prev = d;
    }
    monotone += ok ? 1 : 0;
  }
  EXPECT_GE(monotone, 6);
}
