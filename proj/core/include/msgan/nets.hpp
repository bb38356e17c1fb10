// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "msgan/latent.hpp"
#include "msgan/tensor.hpp"

namespace msgan {

/// Named trainable array. Weights are stored unscaled; layers apply a
/// 1/sqrt(fan_in) factor at runtime so that Adam step sizes mean the same
/// thing in every layer.
struct Param {
  std::string name;
  std::vector<int> shape;
  std::vector<double> value;
};

using ParamList = std::vector<Param>;
using GradList = std::vector<std::vector<double>>;

GradList zero_grads(const ParamList& params);
std::size_t param_count(const ParamList& params);
bool all_finite(const ParamList& params);

/// Rows of a batch of codes: rows[i] is width(i) x batch, one column per sample.
struct RowBatch {
  std::vector<Eigen::MatrixXd> rows;

  std::size_t batch() const { return rows.empty() ? 0 : static_cast<std::size_t>(rows.front().cols()); }

  template <class Space>
  static RowBatch pack(std::span<const Code<Space>> codes);
  static RowBatch zeros(const RowSchedule& schedule, std::size_t batch);

  template <class Space>
  Code<Space> unpack(std::size_t b, const RowSchedule& schedule) const;
};

struct MappingConfig {
  int z_dim = 64;
  int w_dim = 64;
  int layers = 4;
  bool operator==(const MappingConfig&) const = default;
};

/// z -> w. Pixel-normalises z, then a stack of dense layers with leaky ReLU.
class MappingNetwork {
 public:
  struct Trace {
    std::vector<Eigen::MatrixXd> inputs;
    std::vector<Eigen::MatrixXd> pre;
  };

  MappingNetwork() = default;
  MappingNetwork(const MappingConfig& config, std::uint64_t seed);

  const MappingConfig& config() const { return config_; }
  Eigen::VectorXd forward(const Eigen::VectorXd& z) const;
  /// z is z_dim x B; returns w_dim x B.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& z, Trace* trace) const;
  /// Parameter gradients only; gradients with respect to z are never needed.
  void backward(const Trace& trace, const Eigen::MatrixXd& grad_w, GradList& grads) const;

  ParamList& params() { return params_; }
  const ParamList& params() const { return params_; }

 private:
  MappingConfig config_;
  ParamList params_;
};

/// map_noise: the broadcast of P(z) over `rows` rows.
WCode map_noise(const MappingNetwork& mapper, const Eigen::VectorXd& z, std::size_t rows);

/// W+ -> S: one affine map per schedule row.
class StyleMapper {
 public:
  StyleMapper() = default;
  StyleMapper(const RowSchedule& schedule, int w_dim, std::uint64_t seed);
  /// Affine maps that truncate w to each row width (for tests).
  static StyleMapper identity(const RowSchedule& schedule, int w_dim);

  const RowSchedule& schedule() const { return schedule_; }
  int w_dim() const { return w_dim_; }

  SCode to_style(const WCode& w) const;
  RowBatch forward(const RowBatch& w_rows) const;
  /// Returns d/dw rows; accumulates parameter gradients when `grads` is set.
  RowBatch backward(const RowBatch& w_rows, const RowBatch& grad_s, GradList* grads) const;

  ParamList& params() { return params_; }
  const ParamList& params() const { return params_; }

 private:
  RowSchedule schedule_;
  int w_dim_ = 0;
  ParamList params_;
};

SCode to_style(const StyleMapper& styler, const WCode& w);

struct GeneratorConfig {
  RowSchedule schedule;
  int image_channels = 3;
  int base_resolution = 4;
  /// Rows preceded by a 2x nearest-neighbour upsample.
  std::vector<std::size_t> upsample_before;

  int resolution() const;
  static GeneratorConfig toy();
  static GeneratorConfig micro();
  bool operator==(const GeneratorConfig&) const = default;
};

/// Synthesis network. Row i of the S-code modulates block i: a demodulated
/// 3x3 convolution for all but the last row, and a 1x1 to-RGB head for the
/// last. The output passes through tanh.
class Generator {
 public:
  struct LayerTrace {
    Tensor input;
    Tensor conv;
    Eigen::MatrixXd demod;
    Tensor pre;
  };
  struct Trace {
    RowBatch styles;
    std::vector<LayerTrace> layers;
    Tensor output;
  };

  Generator() = default;
  Generator(const GeneratorConfig& config, std::uint64_t seed);

  const GeneratorConfig& config() const { return config_; }
  const RowSchedule& schedule() const { return config_.schedule; }

  /// Output is [channels, B, res, res] in (-1, 1).
  Tensor forward(const RowBatch& styles, Trace* trace) const;
  void backward(const Trace& trace, const Tensor& grad_out, GradList* param_grads, RowBatch* style_grads) const;

  Image synthesize(const SCode& s) const;
  std::vector<Image> synthesize(std::span<const SCode> codes) const;

  ParamList& params() { return params_; }
  const ParamList& params() const { return params_; }

 private:
  struct Layer {
    std::size_t weight = 0;
    std::size_t bias = 0;
    int cin = 0;
    int cout = 0;
    int kernel = 3;
    bool demodulate = true;
    bool activate = true;
    bool upsample = false;
  };

  GeneratorConfig config_;
  ParamList params_;
  std::vector<Layer> layers_;
};

Image synthesize(const Generator& generator, const SCode& s);

struct DiscriminatorConfig {
  int image_channels = 3;
  int resolution = 32;
  std::vector<int> block_channels{16, 32, 64, 64};

  static DiscriminatorConfig toy();
  static DiscriminatorConfig micro();
  bool operator==(const DiscriminatorConfig&) const = default;
};

/// One [C, B, H, W] tensor per tap, coarse to fine in depth order.
using FeatureList = std::vector<Tensor>;

/// Conv + leaky ReLU + 2x average-pool blocks; each block output is a tap.
/// A dense head on the last tap gives the real/fake logit.
class Discriminator {
 public:
  struct Trace {
    std::vector<Tensor> inputs;
    std::vector<Tensor> pre;
    Tensor last_tap;
  };
  struct Output {
    FeatureList taps;
    Eigen::VectorXd logits;
  };

  Discriminator() = default;
  Discriminator(const DiscriminatorConfig& config, std::uint64_t seed);

  const DiscriminatorConfig& config() const { return config_; }
  std::size_t tap_count() const { return config_.block_channels.size(); }

  Output forward(const Tensor& images, Trace* trace, bool with_head = true) const;
  /// Either gradient source may be null. Parameter gradients are accumulated
  /// when `param_grads` is set, input gradients when `input_grad` is set.
  void backward(const Trace& trace, const FeatureList* tap_grads, const Eigen::VectorXd* logit_grads,
                GradList* param_grads, Tensor* input_grad) const;

  FeatureList features(const Image& image) const;

  ParamList& params() { return params_; }
  const ParamList& params() const { return params_; }

 private:
  DiscriminatorConfig config_;
  ParamList params_;
  std::size_t head_weight_ = 0;
  std::size_t head_bias_ = 0;
};

FeatureList disc_features(const Discriminator& disc, const Image& image);

struct BaseModelConfig {
  MappingConfig mapping;
  GeneratorConfig generator;
  DiscriminatorConfig discriminator;

  static BaseModelConfig toy();
  static BaseModelConfig micro();
  bool operator==(const BaseModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const BaseModelConfig& c);
void from_json(const nlohmann::json& j, BaseModelConfig& c);

/// The frozen prior: mapping network, style mapper, synthesis network and
/// discriminator.
struct BaseModel {
  BaseModelConfig config;
  MappingNetwork mapping;
  StyleMapper styler;
  Generator generator;
  Discriminator discriminator;

  static BaseModel create(const BaseModelConfig& config, std::uint64_t seed);

  const RowSchedule& schedule() const { return config.generator.schedule; }
  int z_dim() const { return config.mapping.z_dim; }
  /// S(P(z))
  SCode random_style(const Eigen::VectorXd& z) const;
  WCode random_wplus(const Eigen::VectorXd& z) const;

  /// Every parameter list in archive order: map, style, gen, disc.
  std::vector<ParamList*> param_lists();
  std::vector<const ParamList*> param_lists() const;
};

}  // namespace msgan
