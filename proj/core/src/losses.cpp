// SPDX-License-Identifier: Apache-2.0
#include "msgan/losses.hpp"

#include <cmath>
#include <limits>

#include "msgan/errors.hpp"

namespace msgan {
namespace {

constexpr double kRelativeEps = 1e-5;

}  // namespace

void LossConfig::validate() const {
  if (!std::isfinite(contextual_weight) || contextual_weight < 0.0) throw ConfigError("contextual_weight must be >= 0");
  if (!std::isfinite(contextual_bandwidth) || contextual_bandwidth <= 0.0)
    throw ConfigError("contextual_bandwidth must be > 0");
  for (double w : tap_weights)
    if (!std::isfinite(w) || w < 0.0) throw ConfigError("tap weights must be finite and >= 0");
  if (contextual_tap < 0) throw ConfigError("contextual_tap must be >= 0");
  if (!std::isfinite(identity_weight) || identity_weight < 0.0) throw ConfigError("identity_weight must be >= 0");
}

void to_json(nlohmann::json& j, const LossConfig& c) {
  j = nlohmann::json{{"contextual_weight", c.contextual_weight},
                     {"contextual_bandwidth", c.contextual_bandwidth},
                     {"tap_weights", c.tap_weights},
                     {"contextual_tap", c.contextual_tap},
                     {"identity_weight", c.identity_weight}};
}

void from_json(const nlohmann::json& j, LossConfig& c) {
  c.contextual_weight = j.value("contextual_weight", c.contextual_weight);
  c.contextual_bandwidth = j.value("contextual_bandwidth", c.contextual_bandwidth);
  c.tap_weights = j.value("tap_weights", c.tap_weights);
  c.contextual_tap = j.value("contextual_tap", c.contextual_tap);
  c.identity_weight = j.value("identity_weight", c.identity_weight);
}

FeatureList zeros_like(const FeatureList& features) {
  FeatureList out;
  out.reserve(features.size());
  for (const Tensor& t : features) out.emplace_back(t.shape);
  return out;
}

double feature_l1(const FeatureList& a, int b, const FeatureList& ref, std::span<const double> tap_weights,
                  FeatureList* grad_a) {
  if (a.size() != ref.size()) throw ShapeError("feature_l1: tap counts differ");
  if (!tap_weights.empty() && tap_weights.size() != a.size()) throw ShapeError("feature_l1: one weight per tap required");
  double total = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    const Tensor& x = a[t];
    const Tensor& r = ref[t];
    if (x.channels() != r.channels() || x.plane() != r.plane() || r.batch() != 1)
      throw ShapeError("feature_l1: tap " + std::to_string(t) + " shapes differ");
    const double w = tap_weights.empty() ? 1.0 : tap_weights[t];
    const std::size_t plane = x.plane();
    const double n = static_cast<double>(x.channels() * plane);
    double acc = 0.0;
    for (int c = 0; c < x.channels(); ++c) {
      const std::size_t off = (static_cast<std::size_t>(c) * x.batch() + b) * plane;
      const std::size_t roff = static_cast<std::size_t>(c) * plane;
      for (std::size_t k = 0; k < plane; ++k) {
        const double d = x.data[off + k] - r.data[roff + k];
        acc += std::abs(d);
        if (grad_a && w != 0.0 && d != 0.0) (*grad_a)[t].data[off + k] += w * (d > 0 ? 1.0 : -1.0) / n;
      }
    }
    total += w * acc / n;
  }
  return total;
}

double feature_l1(const FeatureList& a, const FeatureList& b, std::span<const double> tap_weights) {
  return feature_l1(a, 0, b, tap_weights, nullptr);
}

double disc_perceptual_loss(const Discriminator& disc, const Image& generated, const Image& reference,
                            const LossConfig& cfg) {
  if (!generated.same_shape(reference)) throw ShapeError("disc_perceptual_loss: image shapes differ");
  return feature_l1(disc.features(generated), disc.features(reference), cfg.tap_weights);
}

Eigen::MatrixXd feature_vectors(const Tensor& tap, int b) {
  const std::size_t plane = tap.plane();
  Eigen::MatrixXd m(tap.channels(), static_cast<Eigen::Index>(plane));
  for (int c = 0; c < tap.channels(); ++c) {
    const double* p = tap.data.data() + (static_cast<std::size_t>(c) * tap.batch() + b) * plane;
    for (std::size_t k = 0; k < plane; ++k) m(c, static_cast<Eigen::Index>(k)) = p[k];
  }
  return m;
}

double contextual_loss(const Eigen::MatrixXd& gen, const Eigen::MatrixXd& ref, double bandwidth,
                       Eigen::MatrixXd* grad_gen) {
  if (gen.cols() == 0 || ref.cols() == 0) throw ArgumentError("contextual_loss: empty feature set");
  if (gen.rows() != ref.rows()) throw ShapeError("contextual_loss: feature widths differ");
  if (!(bandwidth > 0.0)) throw ArgumentError("contextual_loss: bandwidth must be positive");
  const Eigen::Index n = gen.cols(), m = ref.cols();

  // Centre both sets on the reference mean, then L2-normalise each vector.
  const Eigen::VectorXd mu = ref.rowwise().mean();
  const Eigen::MatrixXd a = gen.colwise() - mu;
  const Eigen::MatrixXd rc = ref.colwise() - mu;
  const Eigen::VectorXd a_norm = a.colwise().norm().transpose().array().max(1e-12);
  const Eigen::VectorXd r_norm = rc.colwise().norm().transpose().array().max(1e-12);
  const Eigen::MatrixXd ahat = a * a_norm.cwiseInverse().asDiagonal();
  const Eigen::MatrixXd rhat = rc * r_norm.cwiseInverse().asDiagonal();

  // dist(i, j) = 1 - cos, i over generated, j over reference.
  const Eigen::MatrixXd dist = (1.0 - (ahat.transpose() * rhat).array()).matrix();
  Eigen::VectorXd dmin(n);
  std::vector<Eigen::Index> argmin(n);
  for (Eigen::Index i = 0; i < n; ++i) dmin[i] = dist.row(i).minCoeff(&argmin[i]);
  Eigen::MatrixXd rel = dist;
  for (Eigen::Index i = 0; i < n; ++i) rel.row(i) /= (dmin[i] + kRelativeEps);

  // cx(i, j) = softmax_j((1 - rel) / h)
  Eigen::MatrixXd cx = ((1.0 - rel.array()) / bandwidth).matrix();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mx = cx.row(i).maxCoeff();
    cx.row(i) = (cx.row(i).array() - mx).exp();
    cx.row(i) /= cx.row(i).sum();
  }
  Eigen::VectorXd best(m);
  std::vector<Eigen::Index> argbest(m);
  for (Eigen::Index j = 0; j < m; ++j) best[j] = cx.col(j).maxCoeff(&argbest[j]);
  const double score = best.mean();
  const double loss = -std::log(score);

  if (grad_gen) {
    Eigen::MatrixXd g_cx = Eigen::MatrixXd::Zero(n, m);
    const double g_best = -1.0 / (score * static_cast<double>(m));
    for (Eigen::Index j = 0; j < m; ++j) g_cx(argbest[j], j) += g_best;
    Eigen::MatrixXd g_t(n, m);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double dot = g_cx.row(i).dot(cx.row(i));
      g_t.row(i) = cx.row(i).array() * (g_cx.row(i).array() - dot);
    }
    const Eigen::MatrixXd g_rel = -g_t / bandwidth;
    Eigen::MatrixXd g_dist(n, m);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double denom = dmin[i] + kRelativeEps;
      g_dist.row(i) = g_rel.row(i) / denom;
      const double g_denom = -(g_rel.row(i).dot(dist.row(i))) / (denom * denom);
      g_dist(i, argmin[i]) += g_denom;
    }
    // d cos = -d dist; d ahat_i = sum_j g_cos(i,j) rhat_j
    const Eigen::MatrixXd g_ahat = rhat * (-g_dist).transpose();
    grad_gen->resize(gen.rows(), n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::VectorXd u = ahat.col(i);
      const Eigen::VectorXd gu = g_ahat.col(i);
      grad_gen->col(i) = (gu - u * u.dot(gu)) / a_norm[i];
    }
  }
  return loss;
}

double identity_loss(const Discriminator& disc, const Image& generated, const Image& input) {
  if (!generated.same_shape(input)) throw ShapeError("identity_loss: image shapes differ");
  const FeatureList a = disc.features(generated);
  const FeatureList b = disc.features(input);
  return feature_l1(FeatureList{a.back()}, FeatureList{b.back()});
}

LossTerms style_loss(const FeatureList& gen, int b, const FeatureList& ref, const LossConfig& cfg, FeatureList* grad,
                     const FeatureList* identity_ref, int identity_b) {
  LossTerms terms;
  terms.perceptual = feature_l1(gen, b, ref, cfg.tap_weights, grad);
  if (cfg.contextual_weight > 0.0) {
    const std::size_t tap = static_cast<std::size_t>(cfg.contextual_tap);
    if (tap >= gen.size()) throw ConfigError("contextual_tap exceeds the discriminator tap count");
    Eigen::MatrixXd g;
    terms.contextual = contextual_loss(feature_vectors(gen[tap], b), feature_vectors(ref[tap], 0),
                                       cfg.contextual_bandwidth, grad ? &g : nullptr);
    if (grad) {
      Tensor& gt = (*grad)[tap];
      const std::size_t plane = gt.plane();
      for (int c = 0; c < gt.channels(); ++c) {
        double* p = gt.data.data() + (static_cast<std::size_t>(c) * gt.batch() + b) * plane;
        for (std::size_t k = 0; k < plane; ++k) p[k] += cfg.contextual_weight * g(c, static_cast<Eigen::Index>(k));
      }
    }
  }
  if (cfg.identity_weight > 0.0 && identity_ref) {
    const Tensor& last = identity_ref->back();
    const FeatureList target{slice_batch(last, identity_b)};
    FeatureList last_gen{gen.back()};
    FeatureList last_grad;
    if (grad) last_grad = zeros_like(last_gen);
    terms.identity = feature_l1(last_gen, b, target, {}, grad ? &last_grad : nullptr);
    if (grad)
      for (std::size_t k = 0; k < last_grad[0].size(); ++k)
        grad->back().data[k] += cfg.identity_weight * last_grad[0].data[k];
  }
  terms.total = terms.perceptual + cfg.contextual_weight * terms.contextual + cfg.identity_weight * terms.identity;
  return terms;
}

double total_loss(const Discriminator& disc, std::span<const Image> outputs, std::span<const Image> references,
                  const LossConfig& cfg) {
  if (outputs.size() != references.size())
    throw ArgumentError("total_loss: " + std::to_string(outputs.size()) + " outputs for " +
                        std::to_string(references.size()) + " references");
  double total = 0.0;
  for (std::size_t k = 0; k < outputs.size(); ++k) {
    if (!outputs[k].same_shape(references[k])) throw ShapeError("total_loss: image shapes differ");
    total += style_loss(disc.features(outputs[k]), 0, disc.features(references[k]), cfg, nullptr).total;
  }
  return total;
}

}  // namespace msgan
