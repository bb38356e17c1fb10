// SPDX-License-Identifier: Apache-2.0
#include "msgan/inversion.hpp"

#include <cmath>
#include <numbers>

#include "msgan/errors.hpp"
#include "msgan/losses.hpp"
#include "msgan/optim.hpp"
#include "msgan/random.hpp"

namespace msgan {
namespace {

const char* space_name(InversionSpace s) { return s == InversionSpace::S ? "S" : "W+"; }
const char* init_name(InversionInit i) { return i == InversionInit::MeanCode ? "mean_code" : "seeded_random"; }

// The free variable: W+ rows (then mapped through S) or raw S rows.
struct Variable {
  RowBatch rows;

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& r : rows.rows) n += static_cast<std::size_t>(r.size());
    return n;
  }
};

std::vector<double> flatten_column(const RowBatch& rb, std::size_t b) {
  std::vector<double> out;
  for (const auto& r : rb.rows)
    for (Eigen::Index i = 0; i < r.rows(); ++i) out.push_back(r(i, static_cast<Eigen::Index>(b)));
  return out;
}

void assign_column(RowBatch& rb, std::size_t b, std::span<const double> flat) {
  std::size_t k = 0;
  for (auto& r : rb.rows)
    for (Eigen::Index i = 0; i < r.rows(); ++i) r(i, static_cast<Eigen::Index>(b)) = flat[k++];
}

}  // namespace

void InversionConfig::validate() const {
  if (steps < 0) throw ConfigError("inversion steps must be >= 0");
  if (!(step_size > 0.0) || !std::isfinite(step_size)) throw ConfigError("inversion step_size must be > 0");
  if (pixel_weight < 0.0 || feature_weight < 0.0 || !std::isfinite(pixel_weight) || !std::isfinite(feature_weight))
    throw ConfigError("inversion loss weights must be finite and >= 0");
  if (pixel_weight == 0.0 && feature_weight == 0.0) throw ConfigError("inversion loss weights are all zero");
  if (mean_samples < 1) throw ConfigError("inversion mean_samples must be >= 1");
}

InversionConfig InversionConfig::reference() {
  InversionConfig c;
  c.steps = 30;
  return c;
}

void to_json(nlohmann::json& j, const InversionConfig& c) {
  j = nlohmann::json{{"steps", c.steps},
                     {"step_size", c.step_size},
                     {"pixel_weight", c.pixel_weight},
                     {"feature_weight", c.feature_weight},
                     {"init", init_name(c.init)},
                     {"target_space", space_name(c.target_space)},
                     {"mean_samples", c.mean_samples}};
}

void from_json(const nlohmann::json& j, InversionConfig& c) {
  c.steps = j.value("steps", c.steps);
  c.step_size = j.value("step_size", c.step_size);
  c.pixel_weight = j.value("pixel_weight", c.pixel_weight);
  c.feature_weight = j.value("feature_weight", c.feature_weight);
  if (j.contains("init")) {
    const auto s = j.at("init").get<std::string>();
    if (s == "mean_code") c.init = InversionInit::MeanCode;
    else if (s == "seeded_random") c.init = InversionInit::SeededRandom;
    else throw ConfigError("inversion init must be mean_code or seeded_random, got " + s);
  }
  if (j.contains("target_space")) {
    const auto s = j.at("target_space").get<std::string>();
    if (s == "S") c.target_space = InversionSpace::S;
    else if (s == "W+") c.target_space = InversionSpace::WPlus;
    else throw ConfigError("inversion target_space must be S or W+, got " + s);
  }
  c.mean_samples = j.value("mean_samples", c.mean_samples);
}

WCode mean_wplus(const BaseModel& base, int sample_count, std::uint64_t seed) {
  if (sample_count < 1) throw ArgumentError("mean code needs at least one sample");
  Eigen::MatrixXd z(base.z_dim(), sample_count);
  for (int j = 0; j < sample_count; ++j) z.col(j) = gaussian_vector(derive_seed({seed, 0x4d45414e, std::uint64_t(j)}), base.z_dim());
  const Eigen::VectorXd w = base.mapping.forward(z, nullptr).rowwise().mean();
  const std::size_t rows = base.schedule().rows();
  return WCode(RowSchedule::uniform(rows, static_cast<int>(w.size())), std::vector<Eigen::VectorXd>(rows, w));
}

SCode mean_code(const BaseModel& base, int sample_count, std::uint64_t seed) {
  if (sample_count < 1) throw ArgumentError("mean code needs at least one sample");
  SCode acc = SCode::zeros(base.schedule());
  for (int j = 0; j < sample_count; ++j)
    acc += base.random_style(gaussian_vector(derive_seed({seed, 0x4d45414e, std::uint64_t(j)}), base.z_dim()));
  if (sample_count > 1) acc *= 1.0 / sample_count;
  return acc;
}

std::vector<InversionResult> invert_batch(const BaseModel& base, std::span<const Image> targets,
                                          const InversionConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (targets.empty()) return {};
  const RowSchedule& sch = base.schedule();
  const int res = base.config.generator.resolution();
  for (const Image& t : targets)
    if (t.channels() != base.config.generator.image_channels || t.height() != res || t.width() != res)
      throw ShapeError("invert: target shape does not match the generator output");
  const std::size_t batch = targets.size();
  const bool wplus = cfg.target_space == InversionSpace::WPlus;
  const int w_dim = base.config.mapping.w_dim;

  // Initial iterate, one column per target.
  Variable var;
  if (wplus) {
    var.rows = RowBatch::zeros(RowSchedule::uniform(sch.rows(), w_dim), batch);
    for (std::size_t b = 0; b < batch; ++b) {
      WCode init = cfg.init == InversionInit::MeanCode
                       ? mean_wplus(base, cfg.mean_samples, seed)
                       : base.random_wplus(gaussian_vector(derive_seed({seed, 0x494e56, b}), base.z_dim()));
      for (std::size_t i = 0; i < sch.rows(); ++i) var.rows.rows[i].col(static_cast<Eigen::Index>(b)) = init.row(i);
    }
  } else {
    var.rows = RowBatch::zeros(sch, batch);
    for (std::size_t b = 0; b < batch; ++b) {
      SCode init = cfg.init == InversionInit::MeanCode
                       ? mean_code(base, cfg.mean_samples, seed)
                       : base.random_style(gaussian_vector(derive_seed({seed, 0x494e56, b}), base.z_dim()));
      for (std::size_t i = 0; i < sch.rows(); ++i) var.rows.rows[i].col(static_cast<Eigen::Index>(b)) = init.row(i);
    }
  }

  const Tensor target_batch = images_to_batch(targets);
  const Discriminator::Output target_out = base.discriminator.forward(target_batch, nullptr, false);
  std::vector<FeatureList> target_feats(batch);
  for (std::size_t b = 0; b < batch; ++b)
    for (const Tensor& t : target_out.taps) target_feats[b].push_back(slice_batch(t, static_cast<int>(b)));

  std::vector<AdamState> adam(batch, AdamState(var.size() / batch));
  std::vector<InversionResult> results(batch);
  std::vector<RowBatch> best(batch);
  std::vector<double> best_loss(batch, std::numeric_limits<double>::infinity());
  const double npix = static_cast<double>(target_batch.size() / batch);

  for (int step = 0; step <= cfg.steps; ++step) {
    const RowBatch s_rows = wplus ? base.styler.forward(var.rows) : var.rows;
    Generator::Trace gtrace;
    const Tensor img = base.generator.forward(s_rows, &gtrace);
    Discriminator::Trace dtrace;
    const Discriminator::Output out = base.discriminator.forward(img, &dtrace, false);

    Tensor grad_img(img.shape);
    FeatureList tap_grads = zeros_like(out.taps);
    std::vector<double> loss(batch, 0.0), mse(batch, 0.0);
    const std::size_t plane = img.plane();
    for (std::size_t b = 0; b < batch; ++b) {
      double acc = 0.0;
      for (int c = 0; c < img.channels(); ++c) {
        const std::size_t off = (static_cast<std::size_t>(c) * batch + b) * plane;
        const std::size_t toff = (static_cast<std::size_t>(c) * batch + b) * plane;
        for (std::size_t k = 0; k < plane; ++k) {
          const double d = img.data[off + k] - target_batch.data[toff + k];
          acc += d * d;
          grad_img.data[off + k] = cfg.pixel_weight * 2.0 * d / npix;
        }
      }
      mse[b] = acc / npix;
      FeatureList scaled_grads = zeros_like(out.taps);
      const double fl = cfg.feature_weight > 0.0
                            ? feature_l1(out.taps, static_cast<int>(b), target_feats[b], {}, &scaled_grads)
                            : 0.0;
      for (std::size_t t = 0; t < tap_grads.size(); ++t)
        for (std::size_t k = 0; k < tap_grads[t].size(); ++k)
          tap_grads[t].data[k] += cfg.feature_weight * scaled_grads[t].data[k];
      loss[b] = cfg.pixel_weight * mse[b] + cfg.feature_weight * fl;
      if (!std::isfinite(loss[b]))
        throw NumericError("invert: non-finite loss at step " + std::to_string(step) + " for target " +
                           std::to_string(b));
      if (step == 0) {
        results[b].initial_loss = loss[b];
        results[b].initial_mse = mse[b];
      }
      if (loss[b] < best_loss[b]) {
        best_loss[b] = loss[b];
        best[b] = s_rows;
        results[b].final_loss = loss[b];
        results[b].final_mse = mse[b];
        results[b].best_step = step;
      }
    }
    if (step == cfg.steps) break;

    if (cfg.feature_weight > 0.0) base.discriminator.backward(dtrace, &tap_grads, nullptr, nullptr, &grad_img);
    RowBatch grad_s;
    base.generator.backward(gtrace, grad_img, nullptr, &grad_s);
    const RowBatch grad_var = wplus ? base.styler.backward(var.rows, grad_s, nullptr) : grad_s;

    const double lr = 0.5 * cfg.step_size * (1.0 + std::cos(std::numbers::pi * step / cfg.steps));
    const AdamConfig acfg{lr};
    for (std::size_t b = 0; b < batch; ++b) {
      std::vector<double> p = flatten_column(var.rows, b);
      const std::vector<double> g = flatten_column(grad_var, b);
      adam[b].step(p, g, acfg);
      assign_column(var.rows, b, p);
    }
  }

  for (std::size_t b = 0; b < batch; ++b) results[b].code = best[b].unpack<StyleSpace>(b, sch);
  return results;
}

InversionResult invert_detailed(const BaseModel& base, const Image& target, const InversionConfig& cfg,
                                std::uint64_t seed) {
  return invert_batch(base, std::span<const Image>(&target, 1), cfg, seed).front();
}

SCode invert(const BaseModel& base, const Image& target, const InversionConfig& cfg, std::uint64_t seed) {
  return invert_detailed(base, target, cfg, seed).code;
}

}  // namespace msgan
