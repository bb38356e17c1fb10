// SPDX-License-Identifier: Apache-2.0
#include "msgan/trainer.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "msgan/errors.hpp"
#include "msgan/random.hpp"

namespace msgan {
namespace {

constexpr double kGoldenTolerance = 1e-6;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void append_bytes(std::vector<std::uint8_t>& buf, const void* data, std::size_t n) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  buf.insert(buf.end(), p, p + n);
}

std::vector<std::int64_t> to_shape64(const std::vector<int>& shape) { return {shape.begin(), shape.end()}; }

void load_params(ParamList& params, const Archive& ar) {
  for (Param& p : params) {
    const ArrayEntry& e = ar.get(p.name);
    if (e.shape != to_shape64(p.shape)) throw IntegrityError("entry " + p.name + ": shape does not match the model config");
    p.value = e.values;
  }
}

std::string stn_entry(const std::string& style, int width) { return "stn/" + style + "/w" + std::to_string(width); }

// Matrices are stored row-major.
std::vector<double> matrix_values(const Eigen::MatrixXd& m) {
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) v.push_back(m(r, c));
  return v;
}

const char* stn_init_name(StnInit i) { return i == StnInit::Identity ? "identity" : "random"; }

}  // namespace

// --- config -----------------------------------------------------------------

void TrainConfig::validate() const {
  if (iterations < 0) throw ConfigError("iterations must be >= 0");
  if (!std::isfinite(generator_lr) || generator_lr < 0.0) throw ConfigError("generator_lr must be >= 0");
  if (!std::isfinite(stn_lr) || stn_lr < 0.0) throw ConfigError("stn_lr must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("betas must lie in [0, 1)");
  if (snapshot_every < 0) throw ConfigError("snapshot_every must be >= 0");
  if (style_chunk < 1) throw ConfigError("style_chunk must be >= 1");
  loss.validate();
  inversion.validate();
}

StyleMixMask TrainConfig::resolve_mask(const RowSchedule& schedule) const {
  if (!mask_bits.empty()) {
    StyleMixMask m = StyleMixMask::from_string(mask_bits);
    if (m.size() != schedule.rows())
      throw ConfigError("mask has " + std::to_string(m.size()) + " bits for " + std::to_string(schedule.rows()) + " rows");
    return m;
  }
  const std::size_t start = mask_start < 0 ? default_mask_start(schedule.rows()) : static_cast<std::size_t>(mask_start);
  return make_tail_mask(schedule, start);
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"iterations", c.iterations},
                     {"generator_lr", c.generator_lr},
                     {"stn_lr", c.stn_lr},
                     {"beta1", c.beta1},
                     {"beta2", c.beta2},
                     {"mask_bits", c.mask_bits},
                     {"mask_start", c.mask_start},
                     {"seed", c.seed},
                     {"loss", c.loss},
                     {"inversion", c.inversion},
                     {"stn_init", stn_init_name(c.stn_init)},
                     {"snapshot_every", c.snapshot_every},
                     {"style_chunk", c.style_chunk}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.iterations = j.value("iterations", c.iterations);
  c.generator_lr = j.value("generator_lr", c.generator_lr);
  c.stn_lr = j.value("stn_lr", c.stn_lr);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.mask_bits = j.value("mask_bits", c.mask_bits);
  c.mask_start = j.value("mask_start", c.mask_start);
  c.seed = j.value("seed", c.seed);
  if (j.contains("loss")) from_json(j.at("loss"), c.loss);
  if (j.contains("inversion")) from_json(j.at("inversion"), c.inversion);
  if (j.contains("stn_init")) {
    const auto s = j.at("stn_init").get<std::string>();
    if (s == "identity") c.stn_init = StnInit::Identity;
    else if (s == "random") c.stn_init = StnInit::Random;
    else throw ConfigError("stn_init must be identity or random, got " + s);
  }
  c.snapshot_every = j.value("snapshot_every", c.snapshot_every);
  c.style_chunk = j.value("style_chunk", c.style_chunk);
}

std::string config_hash(const TrainConfig& c) { return sha256_hex(nlohmann::json(c).dump()); }

// --- state ------------------------------------------------------------------

std::string TrainingState::hash() const {
  std::vector<std::uint8_t> buf;
  for (const Param& p : generator.params()) append_bytes(buf, p.value.data(), p.value.size() * sizeof(double));
  for (std::size_t k = 0; k < bank.size(); ++k)
    for (const auto& m : bank.stn(k).matrices()) append_bytes(buf, m.data(), static_cast<std::size_t>(m.size()) * sizeof(double));
  for (const SCode& c : reference_codes) {
    const Eigen::VectorXd f = c.flatten();
    append_bytes(buf, f.data(), static_cast<std::size_t>(f.size()) * sizeof(double));
  }
  for (const auto& n : names) append_bytes(buf, n.data(), n.size() + 1);
  append_bytes(buf, &step, sizeof(step));
  return sha256_hex(buf);
}

TrainingState prepare_from_codes(std::span<const NamedImage> references, std::span<const SCode> codes,
                                 const TrainConfig& cfg, const BaseModel& base) {
  cfg.validate();
  if (references.empty()) throw ArgumentError("training needs at least one reference");
  if (codes.size() != references.size()) throw ArgumentError("one code per reference required");
  std::set<std::string> seen;
  for (const auto& r : references)
    if (!seen.insert(r.name).second) throw ArgumentError("duplicate style name: " + r.name);

  TrainingState st;
  st.base = &base;
  st.config = cfg;
  st.generator = base.generator;
  for (std::size_t k = 0; k < references.size(); ++k) {
    if (!(codes[k].schedule() == base.schedule())) throw ShapeError("reference code schedule differs from the generator");
    st.names.push_back(references[k].name);
    st.references.push_back(references[k].image);
    st.reference_codes.push_back(codes[k]);
    st.reference_features.push_back(base.discriminator.features(references[k].image));
  }
  st.bank = STNBank::create(base.schedule(), st.names, cfg.stn_init, derive_seed({cfg.seed, 0x57e}));
  st.mask = cfg.resolve_mask(base.schedule());
  st.stream = MixingStream(derive_seed({cfg.seed, 0x5eed}), base.z_dim());
  for (const Param& p : st.generator.params()) st.generator_moments.emplace_back(p.value.size());
  for (std::size_t k = 0; k < st.bank.size(); ++k) {
    std::vector<AdamState> per;
    for (const auto& m : st.bank.stn(k).matrices()) per.emplace_back(static_cast<std::size_t>(m.size()));
    st.stn_moments.push_back(std::move(per));
  }
  return st;
}

TrainingState prepare(std::span<const NamedImage> references, const TrainConfig& cfg, const BaseModel& base) {
  cfg.validate();
  if (references.empty()) throw ArgumentError("training needs at least one reference");
  std::vector<Image> images;
  for (const auto& r : references) images.push_back(r.image);
  std::vector<SCode> codes;
  for (auto& res : invert_batch(base, images, cfg.inversion, derive_seed({cfg.seed, 0x1a7})))
    codes.push_back(std::move(res.code));
  return prepare_from_codes(references, codes, cfg, base);
}

StepGradients compute_gradients(const TrainingState& st, std::span<const Eigen::VectorXd> noise) {
  const BaseModel& base = *st.base;
  const std::size_t n = st.styles();
  if (!noise.empty() && noise.size() != n) throw ArgumentError("one noise vector per style required");
  const RowSchedule& sch = base.schedule();
  const std::size_t chunk = static_cast<std::size_t>(st.config.style_chunk);
  const LossConfig& lc = st.config.loss;

  StepGradients out;
  out.generator = zero_grads(st.generator.params());
  for (std::size_t k = 0; k < n; ++k) out.stn.push_back(st.bank.stn(k).zero_grads());

  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t end = std::min(n, start + chunk);
    std::vector<SCode> mixed, hat;
    for (std::size_t k = start; k < end; ++k) {
      const Eigen::VectorXd z = noise.empty() ? st.stream.noise(static_cast<std::uint64_t>(st.step), k) : noise[k];
      mixed.push_back(style_mix(st.reference_codes[k], z, st.mask, base.mapping, base.styler));
      hat.push_back(st.bank.stn(k).apply(mixed.back()));
    }
    Generator::Trace gt;
    const Tensor img = st.generator.forward(RowBatch::pack<StyleSpace>(hat), &gt);
    Discriminator::Trace dt;
    const Discriminator::Output dout = base.discriminator.forward(img, &dt, false);

    FeatureList identity_ref;
    if (lc.identity_weight > 0.0) {
      const Tensor base_img = base.generator.forward(RowBatch::pack<StyleSpace>(mixed), nullptr);
      identity_ref = base.discriminator.forward(base_img, nullptr, false).taps;
    }

    FeatureList tap_grads = zeros_like(dout.taps);
    for (std::size_t k = start; k < end; ++k) {
      const int b = static_cast<int>(k - start);
      const LossTerms t = style_loss(dout.taps, b, st.reference_features[k], lc, &tap_grads,
                                     identity_ref.empty() ? nullptr : &identity_ref, b);
      out.terms.perceptual += t.perceptual;
      out.terms.contextual += t.contextual;
      out.terms.identity += t.identity;
      out.terms.total += t.total;
    }
    Tensor grad_img;
    base.discriminator.backward(dt, &tap_grads, nullptr, nullptr, &grad_img);
    RowBatch grad_s;
    st.generator.backward(gt, grad_img, &out.generator, &grad_s);
    for (std::size_t k = start; k < end; ++k) {
      const SCode g = grad_s.unpack<StyleSpace>(k - start, sch);
      st.bank.stn(k).accumulate_grad(mixed[k - start], g, out.stn[k]);
    }
  }
  return out;
}

StepRecord train_step(TrainingState& st) {
  if (st.step >= st.config.iterations)
    throw BoundsError("train_step: step " + std::to_string(st.step) + " reached the iteration budget");
  StepGradients g = compute_gradients(st);
  if (!std::isfinite(g.terms.total))
    throw NumericError("train_step: non-finite loss at step " + std::to_string(st.step));

  const TrainConfig& c = st.config;
  const AdamConfig gen_cfg{c.generator_lr, c.beta1, c.beta2};
  ParamList& params = st.generator.params();
  for (std::size_t j = 0; j < params.size(); ++j) st.generator_moments[j].step(params[j].value, g.generator[j], gen_cfg);

  const AdamConfig stn_cfg{c.stn_lr, c.beta1, c.beta2};
  for (std::size_t k = 0; k < st.bank.size(); ++k) {
    auto& mats = st.bank.stn(k).matrices();
    for (std::size_t w = 0; w < mats.size(); ++w)
      st.stn_moments[k][w].step(std::span<double>(mats[w].data(), static_cast<std::size_t>(mats[w].size())),
                                std::span<const double>(g.stn[k][w].data(), static_cast<std::size_t>(g.stn[k][w].size())),
                                stn_cfg);
  }
  StepRecord r;
  r.step = st.step;
  r.terms = g.terms;
  ++st.step;
  return r;
}

// --- model ------------------------------------------------------------------

MultiStyleModel MultiStyleModel::untrained(const BaseModel& base, std::vector<std::string> names) {
  MultiStyleModel m;
  m.base_config = base.config;
  m.generator = base.generator;
  m.bank = STNBank::create(base.schedule(), std::move(names), StnInit::Identity);
  m.base_hash = base_model_hash(base);
  TrainConfig cfg;
  cfg.iterations = 0;
  m.train_config = cfg;
  m.config_hash = msgan::config_hash(cfg);
  return m;
}

MultiStyleModel to_model(const TrainingState& st) {
  MultiStyleModel m;
  m.base_config = st.base->config;
  m.generator = st.generator;
  m.bank = st.bank;
  m.base_hash = base_model_hash(*st.base);
  m.train_config = st.config;
  m.config_hash = msgan::config_hash(st.config);
  if (!st.reference_codes.empty()) m.golden_code = st.reference_codes.front();
  return m;
}

void write_metrics_header(std::ostream& out) {
  out << "# step\ttotal\tperceptual\tcontextual\tidentity\telapsed_s\n";
}

void write_metrics_line(std::ostream& out, const StepRecord& r) {
  out << r.step << '\t' << std::setprecision(10) << r.terms.total << '\t' << r.terms.perceptual << '\t'
      << r.terms.contextual << '\t' << r.terms.identity << '\t' << std::setprecision(6) << r.elapsed_seconds << '\n';
}

std::vector<StepRecord> read_metrics_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open metrics log " + path.string());
  std::vector<StepRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    StepRecord r;
    if (!(ls >> r.step >> r.terms.total >> r.terms.perceptual >> r.terms.contextual >> r.terms.identity >>
          r.elapsed_seconds))
      throw IoError("malformed metrics line in " + path.string() + ": " + line);
    out.push_back(r);
  }
  return out;
}

FinetuneResult finetune_from_state(TrainingState st, const FinetuneOptions& options) {
  FinetuneResult res;
  std::ofstream log;
  if (!options.metrics_log.empty()) {
    if (options.metrics_log.has_parent_path()) std::filesystem::create_directories(options.metrics_log.parent_path());
    log.open(options.metrics_log, std::ios::trunc);
    if (!log) throw IoError("cannot write metrics log " + options.metrics_log.string());
    write_metrics_header(log);
  }
  const auto t0 = Clock::now();
  while (st.step < st.config.iterations) {
    StepRecord r;
    try {
      r = train_step(st);
    } catch (const NumericError&) {
      if (!options.snapshot_dir.empty()) save_model(to_model(st), options.snapshot_dir / "diagnostic.msgan");
      throw;
    }
    r.elapsed_seconds = seconds_since(t0);
    if (log) write_metrics_line(log, r);
    if (options.on_step) options.on_step(r);
    res.log.push_back(r);
    const int every = st.config.snapshot_every;
    if (!options.snapshot_dir.empty() && every > 0 && st.step % every == 0) {
      std::ostringstream name;
      name << "step_" << std::setw(6) << std::setfill('0') << st.step << ".msgan";
      save_model(to_model(st), options.snapshot_dir / name.str());
    }
  }
  res.train_seconds = seconds_since(t0);
  res.reference_codes = st.reference_codes;
  res.model = to_model(st);
  return res;
}

FinetuneResult finetune_detailed(std::span<const NamedImage> references, const TrainConfig& cfg,
                                 const BaseModel& base, const FinetuneOptions& options) {
  const auto t0 = Clock::now();
  TrainingState st = prepare(references, cfg, base);
  const double prep = seconds_since(t0);
  FinetuneResult res = finetune_from_state(std::move(st), options);
  res.prepare_seconds = prep;
  return res;
}

MultiStyleModel finetune(std::span<const NamedImage> references, const TrainConfig& cfg, const BaseModel& base) {
  return finetune_detailed(references, cfg, base).model;
}

// --- persistence ------------------------------------------------------------

Archive base_to_archive(const BaseModel& base) {
  Archive ar;
  ar.metadata()["kind"] = "base";
  ar.metadata()["base_config"] = base.config;
  for (const ParamList* list : base.param_lists())
    for (const Param& p : *list) ar.add(p.name, to_shape64(p.shape), p.value, DType::F32);
  return ar;
}

BaseModel base_from_archive(const Archive& ar) {
  BaseModelConfig cfg;
  try {
    if (ar.metadata().at("kind").get<std::string>() != "base") throw IntegrityError("archive is not a base checkpoint");
    cfg = ar.metadata().at("base_config").get<BaseModelConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("base checkpoint manifest: ") + e.what());
  }
  BaseModel base = BaseModel::create(cfg, 0);
  std::size_t expected = 0;
  for (ParamList* list : base.param_lists()) {
    load_params(*list, ar);
    expected += list->size();
  }
  if (ar.entries().size() != expected) throw IntegrityError("base checkpoint has unexpected extra entries");
  return base;
}

void save_base(const BaseModel& base, const std::filesystem::path& path) { base_to_archive(base).write(path); }

BaseModel load_base(const std::filesystem::path& path) { return base_from_archive(Archive::read(path)); }

std::string base_model_hash(const BaseModel& base) { return sha256_hex(base_to_archive(base).serialize()); }

namespace {

Archive model_arrays(const MultiStyleModel& m) {
  Archive ar;
  nlohmann::json& md = ar.metadata();
  md["kind"] = "multistyle";
  md["base_config"] = m.base_config;
  md["schedule"] = m.schedule().widths();
  md["style_names"] = m.names();
  md["train_config"] = m.train_config;
  md["config_hash"] = m.config_hash;
  md["base_hash"] = m.base_hash;
  for (const Param& p : m.generator.params()) ar.add(p.name, to_shape64(p.shape), p.value, DType::F32);
  for (std::size_t k = 0; k < m.bank.size(); ++k) {
    const STN& t = m.bank.stn(k);
    for (int w : t.widths()) ar.add(stn_entry(m.names()[k], w), {w, w}, matrix_values(t.matrix(w)), DType::F32);
  }
  if (m.golden_code) {
    const Eigen::VectorXd f = m.golden_code->flatten();
    ar.add("golden/code", {f.size()}, std::vector<double>(f.data(), f.data() + f.size()), DType::F64);
  }
  return ar;
}

}  // namespace

Archive model_to_archive(const MultiStyleModel& model) {
  Archive ar = model_arrays(model);
  if (model.golden_code) {
    // Render from the stored (rounded) parameters so a reload reproduces it.
    const MultiStyleModel stored = model_from_archive(ar, false);
    const Image img = stored.render(*stored.golden_code, 0);
    const auto px = img.pixels();
    ar.add("golden/image", {img.channels(), img.height(), img.width()}, std::vector<double>(px.begin(), px.end()),
           DType::F64);
  }
  return ar;
}

MultiStyleModel model_from_archive(const Archive& ar, bool verify_golden) {
  MultiStyleModel m;
  std::vector<std::string> names;
  std::vector<int> widths;
  try {
    const nlohmann::json& md = ar.metadata();
    if (md.at("kind").get<std::string>() != "multistyle") throw IntegrityError("archive is not a multistyle model");
    m.base_config = md.at("base_config").get<BaseModelConfig>();
    names = md.at("style_names").get<std::vector<std::string>>();
    widths = md.at("schedule").get<std::vector<int>>();
    m.train_config = md.at("train_config");
    m.config_hash = md.at("config_hash").get<std::string>();
    m.base_hash = md.at("base_hash").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("model manifest: ") + e.what());
  }
  if (sha256_hex(m.train_config.dump()) != m.config_hash) throw IntegrityError("config_hash does not match train_config");
  const RowSchedule sch(widths);
  if (!(sch == m.base_config.generator.schedule)) throw IntegrityError("schedule does not match the generator config");

  m.generator = Generator(m.base_config.generator, 0);
  load_params(m.generator.params(), ar);
  std::vector<STN> stns;
  for (const auto& name : names) {
    std::vector<Eigen::MatrixXd> mats;
    for (int w : sch.unique_widths()) {
      const std::string key = stn_entry(name, w);
      const ArrayEntry& e = ar.get(key);
      if (e.shape != std::vector<std::int64_t>{w, w}) throw IntegrityError("entry " + key + ": expected a square matrix");
      Eigen::MatrixXd mat(w, w);
      for (int r = 0; r < w; ++r)
        for (int c = 0; c < w; ++c) mat(r, c) = e.values[static_cast<std::size_t>(r) * w + c];
      mats.push_back(std::move(mat));
    }
    stns.emplace_back(sch, std::move(mats));
  }
  m.bank = STNBank(std::move(stns), names);
  std::size_t expected = m.generator.params().size() + names.size() * sch.unique_widths().size();
  if (ar.contains("golden/code")) {
    const ArrayEntry& e = ar.get("golden/code");
    if (e.values.size() != static_cast<std::size_t>(sch.total_dimension()))
      throw IntegrityError("entry golden/code: length does not match the schedule");
    m.golden_code = SCode::from_flat(sch, Eigen::Map<const Eigen::VectorXd>(e.values.data(), e.values.size()));
    ++expected;
    if (ar.contains("golden/image")) {
      ++expected;
      if (verify_golden) {
        const double d = golden_delta(m, ar);
        if (!(d <= kGoldenTolerance))
          throw IntegrityError("entry golden/image: cached stylization differs by " + std::to_string(d));
      }
    }
  }
  if (ar.entries().size() != expected) throw IntegrityError("model checkpoint has unexpected extra entries");
  return m;
}

double golden_delta(const MultiStyleModel& model, const Archive& ar) {
  if (!model.golden_code) throw IntegrityError("model has no golden code");
  const ArrayEntry& e = ar.get("golden/image");
  const Image img = model.render(*model.golden_code, 0);
  if (e.shape != std::vector<std::int64_t>{img.channels(), img.height(), img.width()})
    throw IntegrityError("entry golden/image: shape does not match the generator output");
  double d = 0.0;
  const auto px = img.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) d = std::max(d, std::abs(px[i] - e.values[i]));
  return d;
}

void save_model(const MultiStyleModel& model, const std::filesystem::path& path) { model_to_archive(model).write(path); }

MultiStyleModel load_model(const std::filesystem::path& path, bool verify_golden) {
  return model_from_archive(Archive::read(path), verify_golden);
}

}  // namespace msgan
