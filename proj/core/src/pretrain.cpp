// SPDX-License-Identifier: Apache-2.0
#include "msgan/pretrain.hpp"

#include <cmath>

#include "msgan/errors.hpp"
#include "msgan/optim.hpp"
#include "msgan/random.hpp"

namespace msgan {
namespace {

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct Optimizer {
  std::vector<AdamState> states;
  explicit Optimizer(const ParamList& params) {
    for (const Param& p : params) states.emplace_back(p.value.size());
  }
  void step(ParamList& params, const GradList& grads, const AdamConfig& cfg) {
    for (std::size_t j = 0; j < params.size(); ++j) states[j].step(params[j].value, grads[j], cfg);
  }
};

Eigen::MatrixXd noise_batch(Rng& rng, int z_dim, int batch) {
  Eigen::MatrixXd z(z_dim, batch);
  for (int b = 0; b < batch; ++b) z.col(b) = gaussian_vector(rng, z_dim);
  return z;
}

RowBatch broadcast(const Eigen::MatrixXd& w, std::size_t rows) {
  RowBatch rb;
  rb.rows.assign(rows, w);
  return rb;
}

Tensor real_batch(std::span<const Image> dataset, Rng& rng, int batch) {
  std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);
  std::vector<Image> imgs;
  for (int b = 0; b < batch; ++b) imgs.push_back(dataset[pick(rng)]);
  return images_to_batch(imgs);
}

Tensor concat_batches(const std::vector<const Tensor*>& parts) {
  int total = 0;
  for (const Tensor* t : parts) total += t->batch();
  const Tensor& f = *parts.front();
  Tensor out({f.channels(), total, f.height(), f.width()});
  const std::size_t plane = f.plane();
  for (int c = 0; c < f.channels(); ++c) {
    int b0 = 0;
    for (const Tensor* t : parts) {
      const double* src = t->data.data() + static_cast<std::size_t>(c) * t->batch() * plane;
      std::copy_n(src, t->batch() * plane, out.data.data() + (static_cast<std::size_t>(c) * total + b0) * plane);
      b0 += t->batch();
    }
  }
  return out;
}

}  // namespace

void PretrainConfig::validate() const {
  if (steps < 0) throw ConfigError("pretrain steps must be >= 0");
  if (batch < 1) throw ConfigError("pretrain batch must be >= 1");
  if (!(generator_lr > 0.0) || !(discriminator_lr > 0.0)) throw ConfigError("pretrain learning rates must be > 0");
  if (!(mapping_lr_scale >= 0.0)) throw ConfigError("mapping_lr_scale must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("betas must lie in [0, 1)");
  if (!(gp_gamma >= 0.0) || !(gp_step > 0.0)) throw ConfigError("gp_gamma must be >= 0 and gp_step > 0");
  if (log_every < 1 || probe_count < 2) throw ConfigError("log_every must be >= 1 and probe_count >= 2");
}

void to_json(nlohmann::json& j, const PretrainConfig& c) {
  j = nlohmann::json{{"steps", c.steps},
                     {"batch", c.batch},
                     {"generator_lr", c.generator_lr},
                     {"discriminator_lr", c.discriminator_lr},
                     {"mapping_lr_scale", c.mapping_lr_scale},
                     {"beta1", c.beta1},
                     {"beta2", c.beta2},
                     {"gp_gamma", c.gp_gamma},
                     {"gp_step", c.gp_step},
                     {"seed", c.seed},
                     {"log_every", c.log_every},
                     {"probe_count", c.probe_count}};
}

void from_json(const nlohmann::json& j, PretrainConfig& c) {
  c.steps = j.value("steps", c.steps);
  c.batch = j.value("batch", c.batch);
  c.generator_lr = j.value("generator_lr", c.generator_lr);
  c.discriminator_lr = j.value("discriminator_lr", c.discriminator_lr);
  c.mapping_lr_scale = j.value("mapping_lr_scale", c.mapping_lr_scale);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.gp_gamma = j.value("gp_gamma", c.gp_gamma);
  c.gp_step = j.value("gp_step", c.gp_step);
  c.seed = j.value("seed", c.seed);
  c.log_every = j.value("log_every", c.log_every);
  c.probe_count = j.value("probe_count", c.probe_count);
}

double feature_gap(const BaseModel& model, const Discriminator& probe, std::span<const Image> dataset, int count,
                   std::uint64_t seed) {
  if (dataset.empty() || count < 1) throw ArgumentError("feature_gap: empty input");
  Rng rng(derive_seed({seed, 0x9a9}));
  const Eigen::MatrixXd z = noise_batch(rng, model.z_dim(), count);
  const RowBatch s = model.styler.forward(broadcast(model.mapping.forward(z, nullptr), model.schedule().rows()));
  const Tensor fake = model.generator.forward(s, nullptr);
  const Tensor real = real_batch(dataset, rng, count);
  const FeatureList ff = probe.forward(fake, nullptr, false).taps;
  const FeatureList fr = probe.forward(real, nullptr, false).taps;
  double gap = 0.0;
  for (std::size_t t = 0; t < ff.size(); ++t) {
    const std::size_t plane = ff[t].plane();
    double acc = 0.0;
    for (int c = 0; c < ff[t].channels(); ++c)
      for (std::size_t k = 0; k < plane; ++k) {
        double mf = 0.0, mr = 0.0;
        for (int b = 0; b < count; ++b) {
          mf += ff[t].data[(static_cast<std::size_t>(c) * count + b) * plane + k];
          mr += fr[t].data[(static_cast<std::size_t>(c) * count + b) * plane + k];
        }
        acc += std::abs(mf - mr) / count;
      }
    gap += acc / static_cast<double>(ff[t].channels() * plane);
  }
  return gap;
}

PretrainResult pretrain_gan(const BaseModel& init, std::span<const Image> dataset, const PretrainConfig& cfg,
                            const std::function<void(const PretrainRecord&)>& on_log) {
  cfg.validate();
  if (dataset.empty()) throw ArgumentError("pretrain: empty dataset");
  const int res = init.config.discriminator.resolution;
  for (const Image& im : dataset)
    if (im.channels() != init.config.discriminator.image_channels || im.height() != res || im.width() != res)
      throw ShapeError("pretrain: dataset image shape does not match the discriminator input");

  PretrainResult result{init, {}, 0.0, 0.0};
  BaseModel& m = result.model;
  const Discriminator probe = init.discriminator;
  const std::uint64_t gap_seed = derive_seed({cfg.seed, 0x9a});
  result.initial_gap = feature_gap(m, probe, dataset, cfg.probe_count, gap_seed);
  result.final_gap = result.initial_gap;
  if (cfg.steps == 0) return result;

  Rng rng(derive_seed({cfg.seed, 0x9e7}));
  Optimizer opt_map(m.mapping.params()), opt_sty(m.styler.params()), opt_gen(m.generator.params()),
      opt_disc(m.discriminator.params());
  const AdamConfig g_cfg{cfg.generator_lr, cfg.beta1, cfg.beta2};
  const AdamConfig map_cfg{cfg.generator_lr * cfg.mapping_lr_scale, cfg.beta1, cfg.beta2};
  const AdamConfig d_cfg{cfg.discriminator_lr, cfg.beta1, cfg.beta2};
  const int B = cfg.batch;
  const std::size_t rows = m.schedule().rows();
  const double h = cfg.gp_step;

  for (int step = 0; step < cfg.steps; ++step) {
    PretrainRecord rec;
    rec.step = step;

    // Discriminator: real, perturbed real and fake in one batch.
    {
      const Tensor real = real_batch(dataset, rng, B);
      Tensor perturbed = real;
      std::normal_distribution<double> normal(0.0, 1.0);
      for (double& v : perturbed.data) v += h * normal(rng);
      const Eigen::MatrixXd z = noise_batch(rng, m.z_dim(), B);
      const Tensor fake = m.generator.forward(m.styler.forward(broadcast(m.mapping.forward(z, nullptr), rows)), nullptr);
      const Tensor all = concat_batches({&real, &perturbed, &fake});
      Discriminator::Trace dt;
      const Eigen::VectorXd l = m.discriminator.forward(all, &dt, true).logits;
      Eigen::VectorXd gl = Eigen::VectorXd::Zero(3 * B);
      double loss = 0.0, pen = 0.0;
      for (int b = 0; b < B; ++b) {
        const double lr = l[b], lp = l[B + b], lf = l[2 * B + b];
        loss += softplus(-lr) + softplus(lf);
        const double delta = lp - lr;
        pen += 0.5 * cfg.gp_gamma * (delta / h) * (delta / h);
        gl[b] += -sigmoid(-lr) / B - cfg.gp_gamma * delta / (h * h) / B;
        gl[B + b] += cfg.gp_gamma * delta / (h * h) / B;
        gl[2 * B + b] += sigmoid(lf) / B;
      }
      rec.d_loss = loss / B;
      rec.penalty = pen / B;
      if (!std::isfinite(rec.d_loss) || !std::isfinite(rec.penalty))
        throw NumericError("pretrain: discriminator loss diverged at step " + std::to_string(step) + " (seed " +
                           std::to_string(cfg.seed) + ")");
      GradList gd = zero_grads(m.discriminator.params());
      m.discriminator.backward(dt, nullptr, &gl, &gd, nullptr);
      opt_disc.step(m.discriminator.params(), gd, d_cfg);
    }

    // Generator side: mapping, style mapper and synthesis.
    {
      const Eigen::MatrixXd z = noise_batch(rng, m.z_dim(), B);
      MappingNetwork::Trace mt;
      const Eigen::MatrixXd w = m.mapping.forward(z, &mt);
      const RowBatch w_rows = broadcast(w, rows);
      const RowBatch s = m.styler.forward(w_rows);
      Generator::Trace gt;
      const Tensor fake = m.generator.forward(s, &gt);
      Discriminator::Trace dt;
      const Eigen::VectorXd l = m.discriminator.forward(fake, &dt, true).logits;
      Eigen::VectorXd gl(B);
      double loss = 0.0;
      for (int b = 0; b < B; ++b) {
        loss += softplus(-l[b]);
        gl[b] = -sigmoid(-l[b]) / B;
      }
      rec.g_loss = loss / B;
      if (!std::isfinite(rec.g_loss))
        throw NumericError("pretrain: generator loss diverged at step " + std::to_string(step) + " (seed " +
                           std::to_string(cfg.seed) + ")");
      Tensor gimg;
      m.discriminator.backward(dt, nullptr, &gl, nullptr, &gimg);
      GradList gg = zero_grads(m.generator.params());
      RowBatch gs;
      m.generator.backward(gt, gimg, &gg, &gs);
      GradList gsty = zero_grads(m.styler.params());
      const RowBatch gw_rows = m.styler.backward(w_rows, gs, &gsty);
      Eigen::MatrixXd gw = Eigen::MatrixXd::Zero(w.rows(), w.cols());
      for (const auto& r : gw_rows.rows) gw += r;
      GradList gmap = zero_grads(m.mapping.params());
      m.mapping.backward(mt, gw, gmap);
      opt_gen.step(m.generator.params(), gg, g_cfg);
      opt_sty.step(m.styler.params(), gsty, map_cfg);
      opt_map.step(m.mapping.params(), gmap, map_cfg);
    }

    const bool last = step + 1 == cfg.steps;
    if ((step + 1) % cfg.log_every == 0 || last) {
      rec.feature_gap = feature_gap(m, probe, dataset, cfg.probe_count, gap_seed);
      if (on_log) on_log(rec);
    }
    result.log.push_back(rec);
  }
  result.final_gap = result.log.back().feature_gap;
  return result;
}

}  // namespace msgan
