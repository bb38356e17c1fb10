// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "msgan/nets.hpp"
#include "msgan/synthetic.hpp"

namespace msgan {

struct PretrainConfig {
  int steps = 4000;
  int batch = 16;
  double generator_lr = 0.002;
  double discriminator_lr = 0.002;
  /// Multiplier on generator_lr for the mapping network and style mapper.
  double mapping_lr_scale = 0.1;
  double beta1 = 0.0;
  double beta2 = 0.99;
  /// Weight of the directional gradient penalty on real images.
  double gp_gamma = 1.0;
  /// Finite-difference step of the penalty probe.
  double gp_step = 0.01;
  std::uint64_t seed = 0;
  int log_every = 100;
  /// Samples per side when measuring the feature gap.
  int probe_count = 64;

  void validate() const;
};

void to_json(nlohmann::json& j, const PretrainConfig& c);
void from_json(const nlohmann::json& j, PretrainConfig& c);

struct PretrainRecord {
  int step = 0;
  double d_loss = 0.0;
  double g_loss = 0.0;
  double penalty = 0.0;
  /// Feature gap under the initial discriminator; only set on log steps.
  double feature_gap = -1.0;
};

struct PretrainResult {
  BaseModel model;
  std::vector<PretrainRecord> log;
  double initial_gap = 0.0;
  double final_gap = 0.0;
};

/// Distance between the mean tap activations of `count` generated samples
/// and `count` dataset images, measured with `probe`.
double feature_gap(const BaseModel& model, const Discriminator& probe, std::span<const Image> dataset, int count,
                   std::uint64_t seed);

/// Non-saturating adversarial training of mapping, style mapper, generator
/// and discriminator. The real-image penalty is gamma/2 * ((D(x + h u) -
/// D(x)) / h)^2 with u ~ N(0, I), a finite-difference stand-in for the
/// squared input-gradient norm.
PretrainResult pretrain_gan(const BaseModel& init, std::span<const Image> dataset, const PretrainConfig& cfg,
                            const std::function<void(const PretrainRecord&)>& on_log = {});

}  // namespace msgan
