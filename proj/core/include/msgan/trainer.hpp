// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "msgan/archive.hpp"
#include "msgan/inversion.hpp"
#include "msgan/latent.hpp"
#include "msgan/losses.hpp"
#include "msgan/nets.hpp"
#include "msgan/optim.hpp"
#include "msgan/stn.hpp"

namespace msgan {

struct TrainConfig {
  int iterations = 500;
  double generator_lr = 0.002;
  double stn_lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  /// Explicit mask bits ("0001111..."); empty means a tail mask.
  std::string mask_bits;
  /// First row of the tail mask; negative means ceil(0.45 * rows).
  int mask_start = -1;
  std::uint64_t seed = 0;
  LossConfig loss;
  /// Inversion of the references into reference codes.
  InversionConfig inversion = InversionConfig::reference();
  StnInit stn_init = StnInit::Identity;
  /// Write a snapshot every this many steps (0 disables); the final model is
  /// always written by the caller.
  int snapshot_every = 100;
  /// Styles per forward/backward batch inside one step.
  int style_chunk = 4;

  void validate() const;
  StyleMixMask resolve_mask(const RowSchedule& schedule) const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
/// sha256 of the canonical JSON form.
std::string config_hash(const TrainConfig& c);

struct NamedImage {
  std::string name;
  Image image;
};

/// Mutable fine-tuning state. `base` is the frozen prior (P, S, D, theta_0)
/// and must outlive the state.
struct TrainingState {
  const BaseModel* base = nullptr;
  TrainConfig config;
  Generator generator;
  STNBank bank;
  std::vector<std::string> names;
  std::vector<Image> references;
  std::vector<SCode> reference_codes;
  std::vector<FeatureList> reference_features;
  StyleMixMask mask;
  MixingStream stream;
  std::vector<AdamState> generator_moments;
  /// Indexed [style][width index].
  std::vector<std::vector<AdamState>> stn_moments;
  int step = 0;

  std::size_t styles() const { return names.size(); }
  /// sha256 over the trainable arrays, the codes and the step counter.
  std::string hash() const;
};

struct StepRecord {
  int step = 0;
  LossTerms terms;
  double elapsed_seconds = 0.0;
};

/// Inverts every reference against theta_0 and builds an identity bank.
TrainingState prepare(std::span<const NamedImage> references, const TrainConfig& cfg, const BaseModel& base);

/// As `prepare`, with reference codes supplied instead of inverted.
TrainingState prepare_from_codes(std::span<const NamedImage> references, std::span<const SCode> codes,
                                 const TrainConfig& cfg, const BaseModel& base);

/// Gradients of the summed per-style loss at the current state, without an
/// update. `noise` overrides the mixing draw per style when non-empty.
struct StepGradients {
  LossTerms terms;
  GradList generator;
  std::vector<std::vector<Eigen::MatrixXd>> stn;
};
StepGradients compute_gradients(const TrainingState& state, std::span<const Eigen::VectorXd> noise = {});

/// One optimiser step over all styles.
StepRecord train_step(TrainingState& state);

/// Fine-tuned generator plus its STN bank. The base prior is kept separately
/// and identified by `base_hash`.
struct MultiStyleModel {
  BaseModelConfig base_config;
  Generator generator;
  STNBank bank;
  std::string base_hash;
  nlohmann::json train_config = nlohmann::json::object();
  std::string config_hash;
  /// Code whose stylization under style 0 is cached in the checkpoint.
  std::optional<SCode> golden_code;

  const RowSchedule& schedule() const { return bank.schedule(); }
  const std::vector<std::string>& names() const { return bank.names(); }
  SCode to_multistyle(const SCode& s, std::size_t style) const { return bank.stn(style).apply(s); }
  Image render(const SCode& s, std::size_t style) const { return generator.synthesize(to_multistyle(s, style)); }

  /// Identity bank over theta_0: the untrained model.
  static MultiStyleModel untrained(const BaseModel& base, std::vector<std::string> names);
};

MultiStyleModel to_model(const TrainingState& state);

struct FinetuneOptions {
  /// Tab-separated per-step log; empty disables.
  std::filesystem::path metrics_log;
  /// Snapshot directory; empty disables.
  std::filesystem::path snapshot_dir;
  std::function<void(const StepRecord&)> on_step;
};

struct FinetuneResult {
  MultiStyleModel model;
  std::vector<StepRecord> log;
  std::vector<SCode> reference_codes;
  /// Wall-clock of the optimisation loop (inversion excluded).
  double train_seconds = 0.0;
  double prepare_seconds = 0.0;
};

FinetuneResult finetune_detailed(std::span<const NamedImage> references, const TrainConfig& cfg,
                                 const BaseModel& base, const FinetuneOptions& options = {});
FinetuneResult finetune_from_state(TrainingState state, const FinetuneOptions& options = {});
MultiStyleModel finetune(std::span<const NamedImage> references, const TrainConfig& cfg, const BaseModel& base);

/// Metrics log: a header line starting with '#', then
/// step, total, perceptual, contextual, identity, elapsed seconds.
void write_metrics_header(std::ostream& out);
void write_metrics_line(std::ostream& out, const StepRecord& r);
std::vector<StepRecord> read_metrics_log(const std::filesystem::path& path);

// --- persistence ------------------------------------------------------------

Archive base_to_archive(const BaseModel& base);
BaseModel base_from_archive(const Archive& ar);
void save_base(const BaseModel& base, const std::filesystem::path& path);
BaseModel load_base(const std::filesystem::path& path);
/// sha256 of the serialized base checkpoint; equals the file hash.
std::string base_model_hash(const BaseModel& base);

Archive model_to_archive(const MultiStyleModel& model);
MultiStyleModel model_from_archive(const Archive& ar, bool verify_golden = true);
void save_model(const MultiStyleModel& model, const std::filesystem::path& path);
/// Verifies digests, the config hash, shapes and, when present, that the
/// cached golden image is reproduced within 1e-6.
MultiStyleModel load_model(const std::filesystem::path& path, bool verify_golden = true);

/// Max pixel delta between the cached golden image and a fresh render.
double golden_delta(const MultiStyleModel& model, const Archive& ar);

}  // namespace msgan
