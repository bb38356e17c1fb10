// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "msgan/errors.hpp"
#include "msgan/metrics.hpp"
#include "msgan/random.hpp"
#include "msgan/synthetic.hpp"
#include "support/test_support.hpp"

using namespace msgan;
using msgan::testing::random_code;
using msgan::testing::random_image;

namespace {

// Four points around mu along the axes: sample mean mu and unbiased
// covariance diag(2a^2/3, 2b^2/3).
Eigen::MatrixXd cross(double mx, double my, double a, double b) {
  Eigen::MatrixXd m(2, 4);
  m << mx + a, mx - a, mx, mx, my, my, my + b, my - b;
  return m;
}

Image add_noise(const Image& x, double sigma, std::uint64_t seed) {
  Image y = x;
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, sigma);
  for (double& v : y.pixels()) v += n(rng);
  return y;
}

FeatureExtractor toy_fx() { return FeatureExtractor{&msgan::testing::toy_base().discriminator, 0}; }

}  // namespace

TEST(Frechet, AnalyticDiagonalProbe) {
  const double eps = 1e-6;
  const Eigen::MatrixXd a = cross(0.5, -1.0, 1.0, 2.0);
  const Eigen::MatrixXd b = cross(2.0, 0.25, 3.0, 0.5);
  auto var = [](double s) { return 2.0 * s * s / 3.0; };
  const double mean_term = 1.5 * 1.5 + 1.25 * 1.25;
  double cov_term = 0.0;
  for (auto [s1, s2] : {std::pair{1.0, 3.0}, std::pair{2.0, 0.5}}) {
    const double v1 = var(s1) + eps, v2 = var(s2) + eps;
    cov_term += v1 + v2 - 2.0 * std::sqrt(v1 * v2);
  }
  EXPECT_NEAR(frechet_distance(a, b, eps), mean_term + cov_term, 1e-6);

  Eigen::Vector2d mu1(0.5, -1.0), mu2(2.0, 0.25);
  Eigen::Matrix2d s1 = Eigen::Vector2d(var(1.0), var(2.0)).asDiagonal();
  Eigen::Matrix2d s2 = Eigen::Vector2d(var(3.0), var(0.5)).asDiagonal();
  const double hand = mean_term + std::pow(std::sqrt(var(1.0)) - std::sqrt(var(3.0)), 2) +
                      std::pow(std::sqrt(var(2.0)) - std::sqrt(var(0.5)), 2);
  EXPECT_NEAR(frechet_gaussian(mu1, s1, mu2, s2), hand, 1e-9);
}

TEST(Frechet, ScaleCovarianceOfMeanTerm) {
  // Same covariance, shifted mean: the distance is the mean term alone.
  const Eigen::MatrixXd a = cross(0.0, 0.0, 1.0, 0.5);
  const Eigen::MatrixXd b = cross(1.0, -2.0, 1.0, 0.5);
  const double d = frechet_distance(a, b, 0.0);
  EXPECT_NEAR(d, 5.0, 1e-9);
  for (double c : {0.5, 2.0, 7.0}) {
    EXPECT_NEAR(frechet_distance(c * a, c * b, 0.0), c * c * d, 1e-9 * c * c);
  }
}

TEST(Frechet, SymmetryAndNonNegativity) {
  Rng rng(5);
  std::normal_distribution<double> n;
  for (int t = 0; t < 10; ++t) {
    Eigen::MatrixXd a(6, 40), b(6, 30);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = n(rng);
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = 1.5 * n(rng) + 0.2;
    const double ab = frechet_distance(a, b);
    EXPECT_GE(ab, 0.0);
    EXPECT_NEAR(ab, frechet_distance(b, a), 1e-8);
    EXPECT_NEAR(frechet_distance(a, a), 0.0, 1e-9);
  }
}

TEST(Frechet, RegularisedRankDeficientCovariances) {
  // Three samples in 16 dimensions: singular covariances, finite with eps.
  Eigen::MatrixXd a = Eigen::MatrixXd::Random(16, 3);
  Eigen::MatrixXd b = Eigen::MatrixXd::Random(16, 3);
  const double d = frechet_distance(a, b);
  EXPECT_TRUE(std::isfinite(d));
  EXPECT_GE(d, 0.0);
}

TEST(Sifid, SelfZeroAndSymmetryOnToyExtractor) {
  const auto fx = toy_fx();
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Image x = random_image(3, 32, s);
    const Image y = random_image(3, 32, s + 50, 0.4);
    EXPECT_LT(sifid(x, x, fx).value, 1e-6);
    EXPECT_NEAR(sifid(x, y, fx).value, sifid(y, x, fx).value, 1e-8);
    const SifidScore sc = sifid(x, y, fx);
    EXPECT_EQ(sc.feature_dim, 16);
    EXPECT_EQ(sc.samples_a, 256);
    EXPECT_EQ(sc.samples_b, 256);
  }
}

TEST(Sifid, NoiseMonotonicityMajority) {
  const auto fx = toy_fx();
  const auto images = base_samples(msgan::testing::toy_base(), 10, 2024);
  int monotone = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    double prev = 0.0;
    bool ok = true;
    for (double sigma : {0.05, 0.1, 0.2}) {
      const double v = sifid(add_noise(images[i], sigma, 300 + i), images[i], fx).value;
      ok = ok && v >= prev;
      prev = v;
    }
    monotone += ok ? 1 : 0;
  }
  EXPECT_GE(monotone, 8);
}

TEST(EvalCodes, SingleInputMatchesDirectCall) {
  const auto& base = msgan::testing::toy_base();
  const auto fx = toy_fx();
  auto model = MultiStyleModel::untrained(base, {"p", "q"});
  model.bank = STNBank({STN::random(base.schedule(), 3), STN::random(base.schedule(), 4)}, {"p", "q"});
  const std::vector<SCode> codes{base.random_style(gaussian_vector(1, 64))};
  const std::vector<NamedImage> refs{{"p", random_image(3, 32, 1)}, {"q", random_image(3, 32, 2)}};
  const auto r = eval_codes(model, fx, codes, refs);
  ASSERT_EQ(r.per_style.size(), 2u);
  for (std::size_t k = 0; k < 2; ++k)
    EXPECT_DOUBLE_EQ(r.per_style[k], sifid(model.render(codes[0], k), refs[k].image, fx).value);
  EXPECT_DOUBLE_EQ(r.mean, 0.5 * (r.per_style[0] + r.per_style[1]));

  // Reference as its own stylization target scores zero.
  const std::vector<NamedImage> self{{"p", model.render(codes[0], 0)}, {"q", model.render(codes[0], 1)}};
  const auto z = eval_codes(model, fx, codes, self);
  EXPECT_LT(z.mean, 1e-6);
}

TEST(EvalCodes, InputPermutationInvariant) {
  const auto& base = msgan::testing::toy_base();
  const auto fx = toy_fx();
  const auto model = MultiStyleModel::untrained(base, {"p"});
  std::vector<SCode> codes;
  for (std::uint64_t s = 0; s < 4; ++s) codes.push_back(base.random_style(gaussian_vector(10 + s, 64)));
  const std::vector<NamedImage> refs{{"p", random_image(3, 32, 5)}};
  const auto a = eval_codes(model, fx, codes, refs);
  std::reverse(codes.begin(), codes.end());
  const auto b = eval_codes(model, fx, codes, refs);
  EXPECT_NEAR(a.mean, b.mean, 1e-12);
  EXPECT_THROW(eval_codes(model, fx, std::vector<SCode>{}, refs), ArgumentError);
  const auto text = format_eval(a);
  EXPECT_NE(text.find("p"), std::string::npos);
  EXPECT_NE(text.find("mean"), std::string::npos);
}

TEST(Storage, IdentityRelationshipAndStnBytes) {
  const auto base = msgan::testing::micro_base(3);
  const auto dir = msgan::testing::scratch_dir("storage");
  for (std::size_t n : {1u, 2u, 4u}) {
    std::vector<std::string> names;
    for (std::size_t k = 0; k < n; ++k) names.push_back("s" + std::to_string(k));
    auto model = MultiStyleModel::untrained(base, names);
    model.golden_code = random_code(base.schedule(), 1);
    const auto path = dir / ("m" + std::to_string(n) + ".msgan");
    save_model(model, path);
    const StorageReport r = storage_report(path);
    EXPECT_EQ(r.style_count, n);
    EXPECT_EQ(r.file_bytes, std::filesystem::file_size(path));
    std::uintmax_t stn = 0;
    for (const auto& [name, bytes] : r.stn_bytes) {
      EXPECT_EQ(bytes, 4u * stn_param_count(base.schedule()));
      stn += bytes;
    }
    EXPECT_EQ(r.total(), r.generator_bytes + stn);
    EXPECT_EQ(r.total(), r.file_bytes);
    EXPECT_EQ(r.counterfactual_bytes, n * r.generator_bytes);
    if (n >= 2) EXPECT_LT(r.total(), r.counterfactual_bytes);
  }
}

TEST(Timing, RatioAndNotApplicable) {
  const auto dir = msgan::testing::scratch_dir("timing");
  auto write = [&](const std::string& name, std::vector<double> elapsed) {
    std::ofstream f(dir / name);
    write_metrics_header(f);
    for (std::size_t i = 0; i < elapsed.size(); ++i) {
      StepRecord r;
      r.step = static_cast<int>(i);
      r.elapsed_seconds = elapsed[i];
      write_metrics_line(f, r);
    }
  };
  write("multi.tsv", {0.5, 1.0, 2.0});
  write("s0.tsv", {1.0, 1.5});
  write("s1.tsv", {2.0});
  write("empty.tsv", {});
  const std::vector<std::filesystem::path> singles{dir / "s0.tsv", dir / "s1.tsv"};
  const auto t = timing_report(dir / "multi.tsv", singles);
  EXPECT_DOUBLE_EQ(t.multistyle_seconds, 2.0);
  EXPECT_DOUBLE_EQ(t.single_total(), 3.5);
  ASSERT_TRUE(t.ratio().has_value());
  EXPECT_DOUBLE_EQ(*t.ratio(), 1.75);

  const std::vector<std::filesystem::path> empties{dir / "empty.tsv"};
  const auto e = timing_report(dir / "empty.tsv", empties);
  EXPECT_FALSE(e.ratio().has_value());
  EXPECT_NE(format_timing(e).find("n/a"), std::string::npos);
  EXPECT_THROW(timing_report(dir / "missing.tsv", singles), IoError);
}
