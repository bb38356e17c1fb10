// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "msgan/inversion.hpp"
#include "msgan/trainer.hpp"

namespace msgan {

inline constexpr double kSifidEps = 1e-6;

/// Per-position feature vectors from one tap of a frozen discriminator.
struct FeatureExtractor {
  const Discriminator* disc = nullptr;
  int tap = 0;

  /// Columns are positions, rows are channels.
  Eigen::MatrixXd features(const Image& image) const;
};

struct SifidScore {
  double value = 0.0;
  int feature_dim = 0;
  int samples_a = 0;
  int samples_b = 0;
};

/// ||mu1 - mu2||^2 + tr(S1 + S2 - 2 (S1 S2)^{1/2}) for Gaussians given by
/// their moments. The square-root trace is taken as the sum of square roots
/// of the eigenvalues of S1^{1/2} S2 S1^{1/2}, negatives clamped to zero.
double frechet_gaussian(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& s1, const Eigen::VectorXd& mu2,
                        const Eigen::MatrixXd& s2);

/// Fits a Gaussian (unbiased covariance plus eps*I) to each feature set.
double frechet_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double eps = kSifidEps);

SifidScore sifid(const Image& generated, const Image& reference, const FeatureExtractor& fx, double eps = kSifidEps);

struct EvalResult {
  std::vector<std::string> styles;
  /// inputs x styles
  Eigen::MatrixXd scores;
  std::vector<double> per_style;
  double mean = 0.0;
};

/// SIFID of each stylized code against the reference image of each style.
EvalResult eval_codes(const MultiStyleModel& model, const FeatureExtractor& fx, std::span<const SCode> codes,
                      std::span<const NamedImage> references, const std::vector<std::string>& styles = {});

/// Inverts the inputs against the base prior, then as eval_codes.
EvalResult eval_model(const MultiStyleModel& model, const BaseModel& base, std::span<const Image> inputs,
                      std::span<const NamedImage> references, const InversionConfig& inversion, std::uint64_t seed,
                      const std::vector<std::string>& styles = {});

std::string format_eval(const EvalResult& r);

struct StorageReport {
  std::size_t style_count = 0;
  std::uintmax_t file_bytes = 0;
  std::uintmax_t generator_bytes = 0;
  std::vector<std::pair<std::string, std::uintmax_t>> stn_bytes;
  /// What N separately fine-tuned generators would take.
  std::uintmax_t counterfactual_bytes = 0;
  std::uintmax_t total() const;
};

StorageReport storage_report(const std::filesystem::path& checkpoint);
std::string format_storage(const StorageReport& r);

struct TimingReport {
  double multistyle_seconds = 0.0;
  std::vector<double> single_seconds;
  double single_total() const;
  /// single_total / multistyle, absent when either side is ~0.
  std::optional<double> ratio() const;
};

/// Wall-clock of a run: the elapsed column of its last line (0 if empty).
double run_seconds(const std::filesystem::path& metrics_log);
TimingReport timing_report(const std::filesystem::path& multistyle_log,
                           std::span<const std::filesystem::path> single_logs);
std::string format_timing(const TimingReport& r);

struct ScalingResult {
  std::size_t styles = 0;
  int iterations = 0;
  TimingReport timing;
  StorageReport storage;
  /// Size of the first single-style checkpoint.
  std::uintmax_t single_checkpoint_bytes = 0;
  std::vector<double> final_losses;
};

/// One N-style fine-tune and N single-style fine-tunes at equal iterations,
/// all starting from the same inverted codes. Logs and checkpoints go to
/// `dir`; timing covers the optimisation loops only.
ScalingResult bench_scaling(const BaseModel& base, std::span<const NamedImage> references,
                            std::span<const SCode> codes, const TrainConfig& cfg, const std::filesystem::path& dir);
std::string format_scaling(const ScalingResult& r);

}  // namespace msgan
