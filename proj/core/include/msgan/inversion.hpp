// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "msgan/latent.hpp"
#include "msgan/nets.hpp"

namespace msgan {

enum class InversionSpace { S, WPlus };
enum class InversionInit { MeanCode, SeededRandom };

struct InversionConfig {
  int steps = 300;
  /// Peak Adam step size; decays to zero on a cosine schedule.
  double step_size = 0.05;
  double pixel_weight = 1.0;
  double feature_weight = 0.1;
  InversionInit init = InversionInit::MeanCode;
  InversionSpace target_space = InversionSpace::WPlus;
  /// Draws averaged for the mean-code initialiser.
  int mean_samples = 256;

  void validate() const;

  /// Short budget for style references. The code stays close to the mean
  /// code, so its rows look like the random rows it is mixed with.
  static InversionConfig reference();
};

void to_json(nlohmann::json& j, const InversionConfig& c);
void from_json(const nlohmann::json& j, InversionConfig& c);

struct InversionResult {
  SCode code;
  /// Loss of the starting code and of the returned (best visited) code.
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double initial_mse = 0.0;
  double final_mse = 0.0;
  int best_step = 0;
};

/// Arithmetic mean of S(P(z_j)) over `sample_count` seeded draws.
SCode mean_code(const BaseModel& base, int sample_count, std::uint64_t seed);
/// Mean of P(z_j), broadcast over the schedule rows.
WCode mean_wplus(const BaseModel& base, int sample_count, std::uint64_t seed);

/// Latent optimisation against the base generator. Targets are optimised
/// jointly as one batch; each keeps its own best iterate.
std::vector<InversionResult> invert_batch(const BaseModel& base, std::span<const Image> targets,
                                          const InversionConfig& cfg, std::uint64_t seed);

InversionResult invert_detailed(const BaseModel& base, const Image& target, const InversionConfig& cfg,
                                std::uint64_t seed);

SCode invert(const BaseModel& base, const Image& target, const InversionConfig& cfg, std::uint64_t seed);

}  // namespace msgan
