// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "msgan/errors.hpp"
#include "msgan/losses.hpp"
#include "msgan/random.hpp"
#include "support/test_support.hpp"

using namespace msgan;
using msgan::testing::random_image;

namespace {

const Discriminator& toy_disc() {
  static const Discriminator d(DiscriminatorConfig::toy(), 21);
  return d;
}

Eigen::MatrixXd random_features(int channels, int count, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n;
  Eigen::MatrixXd m(channels, count);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

}  // namespace

TEST(FeatureL1, HandSizedProbe) {
  Tensor a({2, 1, 1, 1});
  Tensor b({2, 1, 1, 1});
  a.data = {1.0, 2.0};
  b.data = {1.0, 4.0};
  EXPECT_DOUBLE_EQ(feature_l1(FeatureList{a}, FeatureList{b}), 1.0);
  EXPECT_DOUBLE_EQ(feature_l1(FeatureList{b}, FeatureList{a}), 1.0);
  const std::vector<double> w{0.5};
  EXPECT_DOUBLE_EQ(feature_l1(FeatureList{a}, FeatureList{b}, w), 0.5);
}

TEST(FeatureL1, MeanReductionAcrossTaps) {
  Tensor a({1, 1, 2, 2}, 0.0);
  Tensor b({1, 1, 2, 2}, 0.0);
  b.data = {4.0, 0.0, 0.0, 0.0};
  Tensor c({3, 1, 1, 1}, 1.0);
  Tensor d({3, 1, 1, 1}, -1.0);
  // tap0: 4/4 = 1, tap1: 6/3 = 2
  EXPECT_DOUBLE_EQ(feature_l1(FeatureList{a, c}, FeatureList{b, d}), 3.0);
}

TEST(DiscPerceptual, ZeroSymmetricNonNegative) {
  const auto& d = toy_disc();
  const Image x = random_image(3, 32, 1);
  const Image y = random_image(3, 32, 2);
  EXPECT_EQ(disc_perceptual_loss(d, x, x), 0.0);
  EXPECT_GT(disc_perceptual_loss(d, x, y), 0.0);
  EXPECT_DOUBLE_EQ(disc_perceptual_loss(d, x, y), disc_perceptual_loss(d, y, x));
  EXPECT_THROW(disc_perceptual_loss(d, x, random_image(3, 16, 1)), ShapeError);
}

TEST(Contextual, SingleIdenticalPairIsZero) {
  const Eigen::MatrixXd v = random_features(8, 1, 3);
  EXPECT_NEAR(contextual_loss(v, v, 0.5), 0.0, 1e-12);
}

TEST(Contextual, PermutationOfReferenceFeatures) {
  const Eigen::MatrixXd f = random_features(16, 30, 4);
  const double self = contextual_loss(f, f, 0.5);
  std::vector<int> perm(30);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::shuffle(perm.begin(), perm.end(), Rng(seed));
    Eigen::MatrixXd p(16, 30);
    for (int j = 0; j < 30; ++j) p.col(j) = f.col(perm[j]);
    EXPECT_NEAR(contextual_loss(f, p, 0.5), self, 1e-6);
    EXPECT_NEAR(contextual_loss(p, f, 0.5), self, 1e-6);
  }
  // Matching is the minimum against unrelated sets.
  for (std::uint64_t seed = 10; seed < 15; ++seed) EXPECT_GT(contextual_loss(random_features(16, 30, seed), f, 0.5), self);
}

TEST(Contextual, OrthogonalOneHotsScoreWorse) {
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(8, 8);
  const Eigen::MatrixXd gen = eye.leftCols(4);
  const Eigen::MatrixXd matched = eye.leftCols(4);
  const Eigen::MatrixXd orth = eye.rightCols(4);
  const double m = contextual_loss(gen, matched, 0.5);
  const double o = contextual_loss(gen, orth, 0.5);
  EXPECT_GE(m, 0.0);
  EXPECT_GT(o, m);
}

TEST(Contextual, NonNegativeAndRejectsEmpty) {
  for (std::uint64_t s = 0; s < 10; ++s)
    EXPECT_GE(contextual_loss(random_features(6, 12, s), random_features(6, 9, s + 100), 0.5), 0.0);
  EXPECT_THROW(contextual_loss(Eigen::MatrixXd(4, 0), random_features(4, 3, 1), 0.5), ArgumentError);
  EXPECT_THROW(contextual_loss(random_features(4, 3, 1), random_features(5, 3, 1), 0.5), ShapeError);
}

TEST(TotalLoss, IdenticalPairIsZero) {
  const Image x = random_image(3, 32, 5);
  const std::vector<Image> v{x};
  EXPECT_NEAR(total_loss(toy_disc(), v, v, LossConfig{}), 0.0, 1e-9);
}

TEST(TotalLoss, DecomposesOverStyles) {
  const auto& d = toy_disc();
  const std::vector<Image> outs{random_image(3, 32, 1), random_image(3, 32, 2)};
  const std::vector<Image> refs{random_image(3, 32, 3), random_image(3, 32, 4)};
  const LossConfig cfg;
  double sum = 0.0;
  for (int k = 0; k < 2; ++k) {
    const std::vector<Image> o{outs[k]};
    const std::vector<Image> r{refs[k]};
    sum += total_loss(d, o, r, cfg);
  }
  EXPECT_NEAR(total_loss(d, outs, refs, cfg), sum, 1e-12);
  EXPECT_THROW(total_loss(d, outs, std::span(refs).first(1), cfg), ArgumentError);
}

TEST(TotalLoss, ZeroContextualWeightIsFeatureL1Only) {
  const auto& d = toy_disc();
  LossConfig cfg;
  cfg.contextual_weight = 0.0;
  const std::vector<Image> outs{random_image(3, 32, 1)};
  const std::vector<Image> refs{random_image(3, 32, 3)};
  EXPECT_DOUBLE_EQ(total_loss(d, outs, refs, cfg), disc_perceptual_loss(d, outs[0], refs[0], cfg));
}

TEST(TotalLoss, ContextualTermMatchesDirectCall) {
  const auto& d = toy_disc();
  LossConfig cfg;
  cfg.contextual_weight = 0.7;
  const Image a = random_image(3, 32, 1);
  const Image b = random_image(3, 32, 3);
  const auto fa = d.features(a);
  const auto fb = d.features(b);
  const double cx = contextual_loss(feature_vectors(fa[1]), feature_vectors(fb[1]), cfg.contextual_bandwidth);
  const LossTerms t = style_loss(fa, 0, fb, cfg, nullptr);
  EXPECT_NEAR(t.contextual, cx, 1e-12);
  EXPECT_NEAR(t.total, t.perceptual + 0.7 * cx, 1e-12);
}

TEST(IdentityLoss, LastTapL1) {
  const auto& d = toy_disc();
  const Image a = random_image(3, 32, 1);
  const Image b = random_image(3, 32, 2);
  EXPECT_EQ(identity_loss(d, a, a), 0.0);
  EXPECT_DOUBLE_EQ(identity_loss(d, a, b), identity_loss(d, b, a));
  const auto fa = d.features(a);
  const auto fb = d.features(b);
  EXPECT_DOUBLE_EQ(identity_loss(d, a, b), feature_l1(FeatureList{fa.back()}, FeatureList{fb.back()}));
}

TEST(LossConfig, ValidationAndJson) {
  LossConfig c;
  c.contextual_bandwidth = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  LossConfig d;
  d.tap_weights = {1, 0.5, 0.25, 0.125};
  d.identity_weight = 0.2;
  nlohmann::json j = d;
  const LossConfig e = j.get<LossConfig>();
  EXPECT_EQ(e.tap_weights, d.tap_weights);
  EXPECT_EQ(e.identity_weight, 0.2);
}
