// SPDX-License-Identifier: Apache-2.0
#include "msgan/nets.hpp"

#include <algorithm>
#include <cmath>

#include "msgan/errors.hpp"
#include "msgan/ops.hpp"
#include "msgan/random.hpp"

namespace msgan {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMat>;
using RowMap = Eigen::Map<RowMat>;

constexpr double kDemodEps = 1e-8;

Param make_param(std::string name, std::vector<int> shape, Rng& rng, double mean, double stddev) {
  Param p{std::move(name), std::move(shape), {}};
  std::size_t n = 1;
  for (int d : p.shape) n *= static_cast<std::size_t>(d);
  p.value.resize(n);
  if (stddev == 0.0) {
    std::fill(p.value.begin(), p.value.end(), mean);
  } else {
    std::normal_distribution<double> normal(mean, stddev);
    for (double& v : p.value) v = normal(rng);
  }
  return p;
}

Param constant_param(std::string name, std::vector<int> shape, double value) {
  Rng unused(0);
  return make_param(std::move(name), std::move(shape), unused, value, 0.0);
}

std::vector<double> scaled(const std::vector<double>& w, double scale) {
  std::vector<double> out(w.size());
  std::transform(w.begin(), w.end(), out.begin(), [scale](double v) { return v * scale; });
  return out;
}

void add_scaled(std::vector<double>& dst, const std::vector<double>& src, double scale) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
}

// x[c, b, :] *= s(c, b)
Tensor modulate(const Tensor& x, const Eigen::MatrixXd& s) {
  Tensor out = x;
  const std::size_t plane = x.plane();
  for (int c = 0; c < x.channels(); ++c)
    for (int b = 0; b < x.batch(); ++b) {
      double* p = out.data.data() + (static_cast<std::size_t>(c) * x.batch() + b) * plane;
      const double f = s(c, b);
      for (std::size_t i = 0; i < plane; ++i) p[i] *= f;
    }
  return out;
}

}  // namespace

GradList zero_grads(const ParamList& params) {
  GradList g;
  g.reserve(params.size());
  for (const Param& p : params) g.emplace_back(p.value.size(), 0.0);
  return g;
}

std::size_t param_count(const ParamList& params) {
  std::size_t n = 0;
  for (const Param& p : params) n += p.value.size();
  return n;
}

bool all_finite(const ParamList& params) {
  for (const Param& p : params)
    for (double v : p.value)
      if (!std::isfinite(v)) return false;
  return true;
}

// --- RowBatch ---------------------------------------------------------------

template <class Space>
RowBatch RowBatch::pack(std::span<const Code<Space>> codes) {
  if (codes.empty()) throw ArgumentError("RowBatch::pack: no codes");
  const RowSchedule& schedule = codes.front().schedule();
  RowBatch out;
  out.rows.reserve(schedule.rows());
  for (std::size_t i = 0; i < schedule.rows(); ++i) {
    Eigen::MatrixXd m(schedule.width(i), static_cast<Eigen::Index>(codes.size()));
    for (std::size_t b = 0; b < codes.size(); ++b) {
      if (!(codes[b].schedule() == schedule)) throw ShapeError("RowBatch::pack: mixed schedules");
      m.col(static_cast<Eigen::Index>(b)) = codes[b].row(i);
    }
    out.rows.push_back(std::move(m));
  }
  return out;
}

RowBatch RowBatch::zeros(const RowSchedule& schedule, std::size_t batch) {
  RowBatch out;
  for (int w : schedule.widths()) out.rows.push_back(Eigen::MatrixXd::Zero(w, static_cast<Eigen::Index>(batch)));
  return out;
}

template <class Space>
Code<Space> RowBatch::unpack(std::size_t b, const RowSchedule& schedule) const {
  if (rows.size() != schedule.rows()) throw ShapeError("RowBatch::unpack: row count mismatch");
  std::vector<Eigen::VectorXd> out;
  out.reserve(rows.size());
  for (const auto& m : rows) out.emplace_back(m.col(static_cast<Eigen::Index>(b)));
  return Code<Space>(schedule, std::move(out));
}

template RowBatch RowBatch::pack<StyleSpace>(std::span<const SCode>);
template RowBatch RowBatch::pack<WPlusSpace>(std::span<const WCode>);
template SCode RowBatch::unpack<StyleSpace>(std::size_t, const RowSchedule&) const;
template WCode RowBatch::unpack<WPlusSpace>(std::size_t, const RowSchedule&) const;

// --- MappingNetwork ---------------------------------------------------------

MappingNetwork::MappingNetwork(const MappingConfig& config, std::uint64_t seed) : config_(config) {
  if (config.z_dim <= 0 || config.w_dim <= 0 || config.layers <= 0) throw ArgumentError("bad mapping config");
  Rng rng(derive_seed({seed, 0x11}));
  int in = config.z_dim;
  for (int l = 0; l < config.layers; ++l) {
    const std::string prefix = "map/l" + std::to_string(l);
    params_.push_back(make_param(prefix + "/weight", {config.w_dim, in}, rng, 0.0, 1.0));
    params_.push_back(constant_param(prefix + "/bias", {config.w_dim}, 0.0));
    in = config.w_dim;
  }
}

Eigen::VectorXd MappingNetwork::forward(const Eigen::VectorXd& z) const {
  return forward(Eigen::MatrixXd(z), nullptr).col(0);
}

Eigen::MatrixXd MappingNetwork::forward(const Eigen::MatrixXd& z, Trace* trace) const {
  if (z.rows() != config_.z_dim) throw ShapeError("map_noise: z width " + std::to_string(z.rows()) +
                                                  " != " + std::to_string(config_.z_dim));
  Eigen::MatrixXd x = z;
  for (Eigen::Index b = 0; b < x.cols(); ++b) {
    const double ms = x.col(b).squaredNorm() / static_cast<double>(x.rows());
    x.col(b) /= std::sqrt(ms + 1e-8);
  }
  if (trace) {
    trace->inputs.clear();
    trace->pre.clear();
  }
  for (int l = 0; l < config_.layers; ++l) {
    const Param& w = params_[2 * l];
    const Param& bias = params_[2 * l + 1];
    const double scale = 1.0 / std::sqrt(static_cast<double>(w.shape[1]));
    Eigen::MatrixXd pre = scale * (ConstRowMap(w.value.data(), w.shape[0], w.shape[1]) * x);
    pre.colwise() += Eigen::Map<const Eigen::VectorXd>(bias.value.data(), w.shape[0]);
    if (trace) {
      trace->inputs.push_back(x);
      trace->pre.push_back(pre);
    }
    x = pre.unaryExpr([](double v) { return ops::lrelu(v); });
  }
  return x;
}

void MappingNetwork::backward(const Trace& trace, const Eigen::MatrixXd& grad_w, GradList& grads) const {
  Eigen::MatrixXd g = grad_w;
  for (int l = config_.layers - 1; l >= 0; --l) {
    const Param& w = params_[2 * l];
    const double scale = 1.0 / std::sqrt(static_cast<double>(w.shape[1]));
    Eigen::MatrixXd gpre = g.cwiseProduct(trace.pre[l].unaryExpr([](double v) { return ops::lrelu_grad(v); }));
    RowMap(grads[2 * l].data(), w.shape[0], w.shape[1]).noalias() += scale * gpre * trace.inputs[l].transpose();
    Eigen::Map<Eigen::VectorXd>(grads[2 * l + 1].data(), w.shape[0]) += gpre.rowwise().sum();
    if (l > 0) g = scale * (ConstRowMap(w.value.data(), w.shape[0], w.shape[1]).transpose() * gpre);
  }
}

WCode map_noise(const MappingNetwork& mapper, const Eigen::VectorXd& z, std::size_t rows) {
  const Eigen::VectorXd w = mapper.forward(z);
  return WCode(RowSchedule::uniform(rows, static_cast<int>(w.size())), std::vector<Eigen::VectorXd>(rows, w));
}

// --- StyleMapper ------------------------------------------------------------

StyleMapper::StyleMapper(const RowSchedule& schedule, int w_dim, std::uint64_t seed)
    : schedule_(schedule), w_dim_(w_dim) {
  if (schedule.rows() == 0 || w_dim <= 0) throw ArgumentError("bad style mapper config");
  Rng rng(derive_seed({seed, 0x22}));
  for (std::size_t i = 0; i < schedule.rows(); ++i) {
    const std::string prefix = "style/r" + std::to_string(i);
    params_.push_back(make_param(prefix + "/weight", {schedule.width(i), w_dim}, rng, 0.0, 1.0));
    params_.push_back(constant_param(prefix + "/bias", {schedule.width(i)}, 1.0));
  }
}

StyleMapper StyleMapper::identity(const RowSchedule& schedule, int w_dim) {
  StyleMapper s(schedule, w_dim, 0);
  const double inv_scale = std::sqrt(static_cast<double>(w_dim));
  for (std::size_t i = 0; i < schedule.rows(); ++i) {
    Param& w = s.params_[2 * i];
    std::fill(w.value.begin(), w.value.end(), 0.0);
    for (int r = 0; r < std::min(schedule.width(i), w_dim); ++r) w.value[static_cast<std::size_t>(r) * w_dim + r] = inv_scale;
    std::fill(s.params_[2 * i + 1].value.begin(), s.params_[2 * i + 1].value.end(), 0.0);
  }
  return s;
}

RowBatch StyleMapper::forward(const RowBatch& w_rows) const {
  if (w_rows.rows.size() != schedule_.rows())
    throw ShapeError("to_style: W+ code has " + std::to_string(w_rows.rows.size()) + " rows, schedule has " +
                     std::to_string(schedule_.rows()));
  const double scale = 1.0 / std::sqrt(static_cast<double>(w_dim_));
  RowBatch out;
  out.rows.reserve(schedule_.rows());
  for (std::size_t i = 0; i < schedule_.rows(); ++i) {
    if (w_rows.rows[i].rows() != w_dim_) throw ShapeError("to_style: W+ row width mismatch");
    const Param& w = params_[2 * i];
    Eigen::MatrixXd s = scale * (ConstRowMap(w.value.data(), w.shape[0], w.shape[1]) * w_rows.rows[i]);
    s.colwise() += Eigen::Map<const Eigen::VectorXd>(params_[2 * i + 1].value.data(), w.shape[0]);
    out.rows.push_back(std::move(s));
  }
  return out;
}

RowBatch StyleMapper::backward(const RowBatch& w_rows, const RowBatch& grad_s, GradList* grads) const {
  const double scale = 1.0 / std::sqrt(static_cast<double>(w_dim_));
  RowBatch out;
  out.rows.reserve(schedule_.rows());
  for (std::size_t i = 0; i < schedule_.rows(); ++i) {
    const Param& w = params_[2 * i];
    ConstRowMap wm(w.value.data(), w.shape[0], w.shape[1]);
    out.rows.push_back(scale * (wm.transpose() * grad_s.rows[i]));
    if (grads) {
      RowMap((*grads)[2 * i].data(), w.shape[0], w.shape[1]).noalias() +=
          scale * grad_s.rows[i] * w_rows.rows[i].transpose();
      Eigen::Map<Eigen::VectorXd>((*grads)[2 * i + 1].data(), w.shape[0]) += grad_s.rows[i].rowwise().sum();
    }
  }
  return out;
}

SCode StyleMapper::to_style(const WCode& w) const {
  const std::span<const WCode> one(&w, 1);
  return forward(RowBatch::pack(one)).unpack<StyleSpace>(0, schedule_);
}

SCode to_style(const StyleMapper& styler, const WCode& w) { return styler.to_style(w); }

// --- Generator --------------------------------------------------------------

int GeneratorConfig::resolution() const {
  return base_resolution << static_cast<int>(upsample_before.size());
}

GeneratorConfig GeneratorConfig::toy() {
  return GeneratorConfig{RowSchedule::toy(), 3, 4, {2, 6, 8}};
}

GeneratorConfig GeneratorConfig::micro() {
  return GeneratorConfig{RowSchedule::micro(), 3, 4, {1}};
}

Generator::Generator(const GeneratorConfig& config, std::uint64_t seed) : config_(config) {
  const RowSchedule& sch = config.schedule;
  if (sch.rows() < 2) throw ArgumentError("generator needs at least two rows");
  if (config.image_channels <= 0 || config.base_resolution <= 0) throw ArgumentError("bad generator config");
  for (std::size_t u : config.upsample_before)
    if (u >= sch.rows()) throw ArgumentError("upsample row out of range");
  Rng rng(derive_seed({seed, 0x33}));
  params_.push_back(
      make_param("gen/const", {sch.width(0), config.base_resolution, config.base_resolution}, rng, 0.0, 1.0));
  for (std::size_t i = 0; i < sch.rows(); ++i) {
    const bool last = i + 1 == sch.rows();
    Layer layer;
    layer.cin = sch.width(i);
    layer.cout = last ? config.image_channels : sch.width(i + 1);
    layer.kernel = last ? 1 : 3;
    layer.demodulate = !last;
    layer.activate = !last;
    layer.upsample = std::find(config.upsample_before.begin(), config.upsample_before.end(), i) !=
                     config.upsample_before.end();
    const std::string prefix = last ? std::string("gen/torgb") : "gen/b" + std::to_string(i);
    layer.weight = params_.size();
    params_.push_back(make_param(prefix + "/weight", {layer.cout, layer.cin, layer.kernel, layer.kernel}, rng, 0.0, 1.0));
    layer.bias = params_.size();
    params_.push_back(constant_param(prefix + "/bias", {layer.cout}, 0.0));
    layers_.push_back(layer);
  }
}

Tensor Generator::forward(const RowBatch& styles, Trace* trace) const {
  const RowSchedule& sch = config_.schedule;
  if (styles.rows.size() != sch.rows())
    throw ShapeError("synthesize: code has " + std::to_string(styles.rows.size()) + " rows, generator expects " +
                     std::to_string(sch.rows()));
  const int batch = static_cast<int>(styles.batch());
  if (batch == 0) throw ArgumentError("synthesize: empty batch");
  for (std::size_t i = 0; i < sch.rows(); ++i)
    if (styles.rows[i].rows() != sch.width(i) || styles.rows[i].cols() != batch)
      throw ShapeError("synthesize: row " + std::to_string(i) + " width does not match the generator schedule");

  const int res0 = config_.base_resolution;
  const Param& cst = params_[0];
  Tensor x({sch.width(0), batch, res0, res0});
  const std::size_t plane0 = static_cast<std::size_t>(res0) * res0;
  for (int c = 0; c < sch.width(0); ++c)
    for (int b = 0; b < batch; ++b)
      std::copy_n(cst.value.data() + c * plane0, plane0, x.data.data() + (static_cast<std::size_t>(c) * batch + b) * plane0);

  if (trace) {
    trace->styles = styles;
    trace->layers.clear();
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& L = layers_[i];
    if (L.upsample) x = ops::upsample2x(x);
    const Eigen::MatrixXd& s = styles.rows[i];
    const Param& wp = params_[L.weight];
    const double scale = 1.0 / std::sqrt(static_cast<double>(L.cin * L.kernel * L.kernel));
    const std::vector<double> weff = scaled(wp.value, scale);

    Tensor conv = ops::conv2d(modulate(x, s), weff, L.cout, L.kernel);
    Eigen::MatrixXd demod;
    Tensor pre = conv;
    const std::size_t plane = conv.plane();
    if (L.demodulate) {
      const int kk = L.kernel * L.kernel;
      Eigen::MatrixXd a(L.cout, L.cin);
      for (int j = 0; j < L.cout; ++j)
        for (int c = 0; c < L.cin; ++c) {
          double acc = 0.0;
          const double* w = weff.data() + (static_cast<std::size_t>(j) * L.cin + c) * kk;
          for (int k = 0; k < kk; ++k) acc += w[k] * w[k];
          a(j, c) = acc;
        }
      const Eigen::MatrixXd q = a * s.cwiseAbs2();
      demod = (q.array() + kDemodEps).rsqrt().matrix();
      for (int j = 0; j < L.cout; ++j)
        for (int b = 0; b < batch; ++b) {
          double* p = pre.data.data() + (static_cast<std::size_t>(j) * batch + b) * plane;
          const double d = demod(j, b);
          for (std::size_t k = 0; k < plane; ++k) p[k] *= d;
        }
    }
    const Param& bias = params_[L.bias];
    for (int j = 0; j < L.cout; ++j) {
      double* p = pre.data.data() + static_cast<std::size_t>(j) * batch * plane;
      for (std::size_t k = 0; k < batch * plane; ++k) p[k] += bias.value[j];
    }
    Tensor out = pre;
    if (L.activate)
      for (double& v : out.data) v = ops::lrelu(v);
    if (trace) trace->layers.push_back(LayerTrace{std::move(x), std::move(conv), std::move(demod), std::move(pre)});
    x = std::move(out);
  }
  for (double& v : x.data) v = std::tanh(v);
  if (trace) trace->output = x;
  return x;
}

void Generator::backward(const Trace& trace, const Tensor& grad_out, GradList* param_grads,
                         RowBatch* style_grads) const {
  if (!grad_out.same_shape(trace.output)) throw ShapeError("generator backward: gradient shape mismatch");
  const int batch = static_cast<int>(trace.styles.batch());
  if (style_grads && style_grads->rows.size() != layers_.size())
    *style_grads = RowBatch::zeros(config_.schedule, static_cast<std::size_t>(batch));

  Tensor g = grad_out;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double o = trace.output.data[k];
    g.data[k] *= 1.0 - o * o;
  }
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const Layer& L = layers_[li];
    const LayerTrace& T = trace.layers[li];
    const Eigen::MatrixXd& s = trace.styles.rows[li];
    const Param& wp = params_[L.weight];
    const double scale = 1.0 / std::sqrt(static_cast<double>(L.cin * L.kernel * L.kernel));
    const std::vector<double> weff = scaled(wp.value, scale);
    const std::size_t plane = T.pre.plane();

    if (L.activate)
      for (std::size_t k = 0; k < g.size(); ++k) g.data[k] *= ops::lrelu_grad(T.pre.data[k]);
    if (param_grads) {
      std::vector<double>& gb = (*param_grads)[L.bias];
      for (int j = 0; j < L.cout; ++j) {
        const double* p = g.data.data() + static_cast<std::size_t>(j) * batch * plane;
        double acc = 0.0;
        for (std::size_t k = 0; k < batch * plane; ++k) acc += p[k];
        gb[j] += acc;
      }
    }

    Eigen::MatrixXd grad_s = Eigen::MatrixXd::Zero(L.cin, batch);
    std::vector<double> gweff;
    if (param_grads) gweff.assign(weff.size(), 0.0);

    if (L.demodulate) {
      const int kk = L.kernel * L.kernel;
      Eigen::MatrixXd gd(L.cout, batch);
      for (int j = 0; j < L.cout; ++j)
        for (int b = 0; b < batch; ++b) {
          const std::size_t off = (static_cast<std::size_t>(j) * batch + b) * plane;
          double acc = 0.0;
          for (std::size_t k = 0; k < plane; ++k) acc += g.data[off + k] * T.conv.data[off + k];
          gd(j, b) = acc;
          const double d = T.demod(j, b);
          for (std::size_t k = 0; k < plane; ++k) g.data[off + k] *= d;
        }
      // d = (q + eps)^-1/2  =>  dd/dq = -d^3 / 2
      const Eigen::MatrixXd gq = (-0.5 * gd.array() * T.demod.array().cube()).matrix();
      Eigen::MatrixXd a(L.cout, L.cin);
      for (int j = 0; j < L.cout; ++j)
        for (int c = 0; c < L.cin; ++c) {
          double acc = 0.0;
          const double* w = weff.data() + (static_cast<std::size_t>(j) * L.cin + c) * kk;
          for (int k = 0; k < kk; ++k) acc += w[k] * w[k];
          a(j, c) = acc;
        }
      grad_s += (2.0 * s.array() * (a.transpose() * gq).array()).matrix();
      if (param_grads) {
        const Eigen::MatrixXd g2 = gq * s.cwiseAbs2().transpose();
        for (int j = 0; j < L.cout; ++j)
          for (int c = 0; c < L.cin; ++c) {
            const std::size_t off = (static_cast<std::size_t>(j) * L.cin + c) * kk;
            for (int k = 0; k < kk; ++k) gweff[off + k] += 2.0 * weff[off + k] * g2(j, c);
          }
      }
    }

    const Tensor xs = modulate(T.input, s);
    Tensor gxs(xs.shape);
    ops::conv2d_backward(xs, weff, L.cout, L.kernel, g, &gxs, gweff);
    if (param_grads) add_scaled((*param_grads)[L.weight], gweff, scale);

    const std::size_t in_plane = T.input.plane();
    Tensor gx(T.input.shape);
    for (int c = 0; c < L.cin; ++c)
      for (int b = 0; b < batch; ++b) {
        const std::size_t off = (static_cast<std::size_t>(c) * batch + b) * in_plane;
        double acc = 0.0;
        const double f = s(c, b);
        for (std::size_t k = 0; k < in_plane; ++k) {
          acc += gxs.data[off + k] * T.input.data[off + k];
          gx.data[off + k] = gxs.data[off + k] * f;
        }
        grad_s(c, b) += acc;
      }
    if (style_grads) style_grads->rows[li] += grad_s;
    g = L.upsample ? ops::upsample2x_backward(gx) : std::move(gx);
  }
  if (param_grads) {
    std::vector<double>& gc = (*param_grads)[0];
    const std::size_t plane0 = g.plane();
    for (int c = 0; c < g.channels(); ++c)
      for (int b = 0; b < batch; ++b) {
        const double* p = g.data.data() + (static_cast<std::size_t>(c) * batch + b) * plane0;
        for (std::size_t k = 0; k < plane0; ++k) gc[c * plane0 + k] += p[k];
      }
  }
}

Image Generator::synthesize(const SCode& s) const {
  return synthesize(std::span<const SCode>(&s, 1)).front();
}

std::vector<Image> Generator::synthesize(std::span<const SCode> codes) const {
  for (const SCode& c : codes)
    if (!(c.schedule() == config_.schedule)) throw ShapeError("synthesize: code schedule differs from generator");
  const Tensor out = forward(RowBatch::pack(codes), nullptr);
  if (!out.all_finite()) throw NumericError("synthesize: non-finite output (check generator parameters)");
  std::vector<Image> images;
  images.reserve(codes.size());
  for (int b = 0; b < out.batch(); ++b) images.push_back(image_from_batch(out, b));
  return images;
}

Image synthesize(const Generator& generator, const SCode& s) { return generator.synthesize(s); }

// --- Discriminator ----------------------------------------------------------

DiscriminatorConfig DiscriminatorConfig::toy() { return DiscriminatorConfig{3, 32, {16, 32, 64, 64}}; }
DiscriminatorConfig DiscriminatorConfig::micro() { return DiscriminatorConfig{3, 8, {6, 8}}; }

Discriminator::Discriminator(const DiscriminatorConfig& config, std::uint64_t seed) : config_(config) {
  if (config.block_channels.empty()) throw ArgumentError("discriminator needs at least one block");
  if ((config.resolution >> config.block_channels.size()) < 1 ||
      config.resolution % (1 << config.block_channels.size()) != 0)
    throw ArgumentError("discriminator resolution not divisible by its downsampling");
  Rng rng(derive_seed({seed, 0x44}));
  int in = config.image_channels;
  for (std::size_t j = 0; j < config.block_channels.size(); ++j) {
    const std::string prefix = "disc/b" + std::to_string(j);
    const int out = config.block_channels[j];
    params_.push_back(make_param(prefix + "/weight", {out, in, 3, 3}, rng, 0.0, 1.0));
    params_.push_back(constant_param(prefix + "/bias", {out}, 0.0));
    in = out;
  }
  const int last_res = config.resolution >> config.block_channels.size();
  const int flat = in * last_res * last_res;
  head_weight_ = params_.size();
  params_.push_back(make_param("disc/head/weight", {1, flat}, rng, 0.0, 1.0));
  head_bias_ = params_.size();
  params_.push_back(constant_param("disc/head/bias", {1}, 0.0));
}

Discriminator::Output Discriminator::forward(const Tensor& images, Trace* trace, bool with_head) const {
  if (images.shape.size() != 4 || images.channels() != config_.image_channels ||
      images.height() != config_.resolution || images.width() != config_.resolution)
    throw ShapeError("discriminator: expected " + std::to_string(config_.image_channels) + "x" +
                     std::to_string(config_.resolution) + "x" + std::to_string(config_.resolution) + " images");
  Output out;
  if (trace) {
    trace->inputs.clear();
    trace->pre.clear();
  }
  Tensor x = images;
  for (std::size_t j = 0; j < config_.block_channels.size(); ++j) {
    const Param& w = params_[2 * j];
    const Param& b = params_[2 * j + 1];
    const int cout = w.shape[0];
    const double scale = 1.0 / std::sqrt(static_cast<double>(w.shape[1] * 9));
    Tensor pre = ops::conv2d(x, scaled(w.value, scale), cout, 3);
    const std::size_t chunk = static_cast<std::size_t>(pre.batch()) * pre.plane();
    for (int c = 0; c < cout; ++c) {
      double* p = pre.data.data() + c * chunk;
      for (std::size_t k = 0; k < chunk; ++k) p[k] += b.value[c];
    }
    Tensor act = pre;
    for (double& v : act.data) v = ops::lrelu(v);
    if (trace) {
      trace->inputs.push_back(std::move(x));
      trace->pre.push_back(std::move(pre));
    }
    x = ops::avgpool2x(act);
    out.taps.push_back(x);
  }
  if (with_head) {
    const Param& hw = params_[head_weight_];
    const int batch = x.batch();
    const double scale = 1.0 / std::sqrt(static_cast<double>(hw.shape[1]));
    out.logits.resize(batch);
    const std::size_t plane = x.plane();
    for (int b = 0; b < batch; ++b) {
      double acc = params_[head_bias_].value[0];
      for (int c = 0; c < x.channels(); ++c) {
        const double* p = x.data.data() + (static_cast<std::size_t>(c) * batch + b) * plane;
        const double* w = hw.value.data() + c * plane;
        for (std::size_t k = 0; k < plane; ++k) acc += scale * w[k] * p[k];
      }
      out.logits[b] = acc;
    }
  }
  if (trace) trace->last_tap = x;
  return out;
}

void Discriminator::backward(const Trace& trace, const FeatureList* tap_grads, const Eigen::VectorXd* logit_grads,
                             GradList* param_grads, Tensor* input_grad) const {
  const std::size_t blocks = config_.block_channels.size();
  if (tap_grads && tap_grads->size() != blocks) throw ShapeError("discriminator backward: tap count mismatch");
  const Tensor& last = trace.last_tap;
  const int batch = last.batch();
  Tensor g(last.shape);
  if (tap_grads) g = (*tap_grads)[blocks - 1];
  if (logit_grads) {
    const Param& hw = params_[head_weight_];
    const double scale = 1.0 / std::sqrt(static_cast<double>(hw.shape[1]));
    const std::size_t plane = last.plane();
    for (int b = 0; b < batch; ++b) {
      const double gl = (*logit_grads)[b];
      for (int c = 0; c < last.channels(); ++c) {
        const std::size_t off = (static_cast<std::size_t>(c) * batch + b) * plane;
        for (std::size_t k = 0; k < plane; ++k) {
          g.data[off + k] += gl * scale * hw.value[c * plane + k];
          if (param_grads) (*param_grads)[head_weight_][c * plane + k] += gl * scale * last.data[off + k];
        }
      }
      if (param_grads) (*param_grads)[head_bias_][0] += gl;
    }
  }
  for (std::size_t j = blocks; j-- > 0;) {
    Tensor ga = ops::avgpool2x_backward(g);
    const Tensor& pre = trace.pre[j];
    for (std::size_t k = 0; k < ga.size(); ++k) ga.data[k] *= ops::lrelu_grad(pre.data[k]);
    const Param& w = params_[2 * j];
    const int cout = w.shape[0];
    const double scale = 1.0 / std::sqrt(static_cast<double>(w.shape[1] * 9));
    std::vector<double> gweff;
    if (param_grads) {
      gweff.assign(w.value.size(), 0.0);
      const std::size_t chunk = static_cast<std::size_t>(ga.batch()) * ga.plane();
      for (int c = 0; c < cout; ++c) {
        double acc = 0.0;
        const double* p = ga.data.data() + c * chunk;
        for (std::size_t k = 0; k < chunk; ++k) acc += p[k];
        (*param_grads)[2 * j + 1][c] += acc;
      }
    }
    const bool need_input = j > 0 || input_grad != nullptr;
    Tensor gx(trace.inputs[j].shape);
    ops::conv2d_backward(trace.inputs[j], scaled(w.value, scale), cout, 3, ga, need_input ? &gx : nullptr, gweff);
    if (param_grads) add_scaled((*param_grads)[2 * j], gweff, scale);
    if (j > 0) {
      if (tap_grads)
        for (std::size_t k = 0; k < gx.size(); ++k) gx.data[k] += (*tap_grads)[j - 1].data[k];
      g = std::move(gx);
    } else if (input_grad) {
      if (!input_grad->same_shape(gx)) *input_grad = Tensor(gx.shape);
      for (std::size_t k = 0; k < gx.size(); ++k) input_grad->data[k] += gx.data[k];
    }
  }
}

FeatureList Discriminator::features(const Image& image) const {
  const std::span<const Image> one(&image, 1);
  return forward(images_to_batch(one), nullptr, false).taps;
}

FeatureList disc_features(const Discriminator& disc, const Image& image) { return disc.features(image); }

// --- BaseModel --------------------------------------------------------------

BaseModelConfig BaseModelConfig::toy() {
  return BaseModelConfig{MappingConfig{64, 64, 4}, GeneratorConfig::toy(), DiscriminatorConfig::toy()};
}

BaseModelConfig BaseModelConfig::micro() {
  return BaseModelConfig{MappingConfig{8, 8, 2}, GeneratorConfig::micro(), DiscriminatorConfig::micro()};
}

void to_json(nlohmann::json& j, const BaseModelConfig& c) {
  j = nlohmann::json{
      {"mapping", {{"z_dim", c.mapping.z_dim}, {"w_dim", c.mapping.w_dim}, {"layers", c.mapping.layers}}},
      {"generator",
       {{"schedule", c.generator.schedule.widths()},
        {"image_channels", c.generator.image_channels},
        {"base_resolution", c.generator.base_resolution},
        {"upsample_before", c.generator.upsample_before}}},
      {"discriminator",
       {{"image_channels", c.discriminator.image_channels},
        {"resolution", c.discriminator.resolution},
        {"block_channels", c.discriminator.block_channels}}}};
}

void from_json(const nlohmann::json& j, BaseModelConfig& c) {
  const auto& m = j.at("mapping");
  c.mapping = MappingConfig{m.at("z_dim").get<int>(), m.at("w_dim").get<int>(), m.at("layers").get<int>()};
  const auto& g = j.at("generator");
  c.generator = GeneratorConfig{RowSchedule(g.at("schedule").get<std::vector<int>>()),
                                g.at("image_channels").get<int>(), g.at("base_resolution").get<int>(),
                                g.at("upsample_before").get<std::vector<std::size_t>>()};
  const auto& d = j.at("discriminator");
  c.discriminator = DiscriminatorConfig{d.at("image_channels").get<int>(), d.at("resolution").get<int>(),
                                        d.at("block_channels").get<std::vector<int>>()};
}

BaseModel BaseModel::create(const BaseModelConfig& config, std::uint64_t seed) {
  if (config.generator.resolution() != config.discriminator.resolution ||
      config.generator.image_channels != config.discriminator.image_channels)
    throw ArgumentError("generator output does not match discriminator input");
  return BaseModel{config,
                   MappingNetwork(config.mapping, seed),
                   StyleMapper(config.generator.schedule, config.mapping.w_dim, seed),
                   Generator(config.generator, seed),
                   Discriminator(config.discriminator, seed)};
}

SCode BaseModel::random_style(const Eigen::VectorXd& z) const { return styler.to_style(random_wplus(z)); }

WCode BaseModel::random_wplus(const Eigen::VectorXd& z) const { return map_noise(mapping, z, schedule().rows()); }

std::vector<ParamList*> BaseModel::param_lists() {
  return {&mapping.params(), &styler.params(), &generator.params(), &discriminator.params()};
}

std::vector<const ParamList*> BaseModel::param_lists() const {
  return {&mapping.params(), &styler.params(), &generator.params(), &discriminator.params()};
}

}  // namespace msgan
