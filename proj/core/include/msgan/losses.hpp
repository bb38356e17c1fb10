// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "msgan/nets.hpp"

namespace msgan {

struct LossConfig {
  /// Weight of the contextual term next to the feature-L1 term.
  double contextual_weight = 0.005;
  double contextual_bandwidth = 0.5;
  /// Per-tap weights of the feature-L1 term; empty means 1 for every tap.
  std::vector<double> tap_weights;
  /// Discriminator tap whose spatial features feed the contextual term.
  int contextual_tap = 1;
  /// Optional identity term (last-tap L1 against the unstylized image).
  double identity_weight = 0.0;

  void validate() const;
  double tap_weight(std::size_t tap) const { return tap_weights.empty() ? 1.0 : tap_weights.at(tap); }
};

void to_json(nlohmann::json& j, const LossConfig& c);
void from_json(const nlohmann::json& j, LossConfig& c);

struct LossTerms {
  double perceptual = 0.0;
  double contextual = 0.0;
  double identity = 0.0;
  double total = 0.0;
};

/// sum over taps of w_t * mean |a_t - b_t| for sample `b` of `a` against the
/// single-sample features `ref`. Adds d/da into sample `b` of `grad_a`.
double feature_l1(const FeatureList& a, int b, const FeatureList& ref, std::span<const double> tap_weights,
                  FeatureList* grad_a);

/// Single-sample convenience form; `tap_weights` may be empty.
double feature_l1(const FeatureList& a, const FeatureList& b, std::span<const double> tap_weights = {});

/// Discriminator perceptual loss between two images.
double disc_perceptual_loss(const Discriminator& disc, const Image& generated, const Image& reference,
                            const LossConfig& cfg = {});

/// Columns are the per-position feature vectors of sample `b` of a tap.
Eigen::MatrixXd feature_vectors(const Tensor& tap, int b = 0);

/// Contextual loss between two sets of feature vectors (one per column).
/// Affinities are a softmax over reference vectors of the bandwidth-scaled
/// relative cosine distance; the loss is -log of the mean, over reference
/// vectors, of the best affinity any generated vector achieves. Fills
/// d/dgen when `grad_gen` is set.
double contextual_loss(const Eigen::MatrixXd& gen, const Eigen::MatrixXd& ref, double bandwidth,
                       Eigen::MatrixXd* grad_gen = nullptr);

/// Last-tap feature L1 between a stylized image and its source.
double identity_loss(const Discriminator& disc, const Image& generated, const Image& input);

/// Loss for sample `b` of a batch of generated features against one
/// reference. Gradients go to sample `b` of `grad`.
LossTerms style_loss(const FeatureList& gen, int b, const FeatureList& ref, const LossConfig& cfg, FeatureList* grad,
                     const FeatureList* identity_ref = nullptr, int identity_b = 0);

/// Sum over styles of the per-style loss of outputs[k] against references[k].
double total_loss(const Discriminator& disc, std::span<const Image> outputs, std::span<const Image> references,
                  const LossConfig& cfg);

/// Zero tensors shaped like `features`.
FeatureList zeros_like(const FeatureList& features);

}  // namespace msgan
