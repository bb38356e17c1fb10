// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "msgan/nets.hpp"
#include "msgan/pretrain.hpp"
#include "msgan/synthetic.hpp"
#include "msgan/trainer.hpp"

namespace msgan {

struct EvalConfig {
  /// Held-out base-generator samples used as stylization inputs.
  int inputs = 5;
  std::uint64_t input_seed = 11;
};

struct BenchConfig {
  int iterations = 100;
  std::vector<int> styles{4, 8};
};

/// Everything a command needs, read from one JSON document.
///
///   {
///     "seed": 0, "preset": "toy", "output_dir": "runs",
///     "mask": {"start": 5} | {"bits": "0000011111"},
///     "train": {...}, "loss": {...},
///     "inversion": {...}, "reference_inversion": {...},
///     "pretrain": {...}, "dataset": {...}, "eval": {...}, "bench": {...}
///   }
///
/// Unknown keys are rejected at every level; absent keys keep defaults.
struct RunConfig {
  std::uint64_t seed = 0;
  /// "toy" or "micro".
  std::string preset = "toy";
  std::string output_dir;
  TrainConfig train;
  /// Inversion of inputs (invert, stylize, explore, eval). References use
  /// train.inversion.
  InversionConfig inversion;
  PretrainConfig pretrain;
  SyntheticDatasetSpec dataset;
  EvalConfig eval;
  BenchConfig bench;

  BaseModelConfig base_config() const;
  /// Pushes the top-level seed into every sub-config.
  void apply_seed(std::uint64_t s);
  void validate() const;
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
/// Fully resolved form, including defaults.
nlohmann::json resolved_json(const RunConfig& c);

}  // namespace msgan
