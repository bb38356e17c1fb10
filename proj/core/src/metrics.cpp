// SPDX-License-Identifier: Apache-2.0
#include "msgan/metrics.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <iomanip>
#include <sstream>

#include "msgan/errors.hpp"
#include "msgan/inference.hpp"
#include "msgan/losses.hpp"

namespace msgan {
namespace {

constexpr double kTimingFloor = 1e-6;

Eigen::MatrixXd covariance(const Eigen::MatrixXd& x, const Eigen::VectorXd& mu) {
  if (x.cols() < 2) throw ArgumentError("covariance needs at least two samples");
  const Eigen::MatrixXd c = x.colwise() - mu;
  return (c * c.transpose()) / static_cast<double>(x.cols() - 1);
}

Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eigen_of(const Eigen::MatrixXd& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  if (es.info() != Eigen::Success) throw NumericError(std::string("frechet distance: eigen-solver failed on ") + what);
  return es;
}

}  // namespace

Eigen::MatrixXd FeatureExtractor::features(const Image& image) const {
  if (!disc) throw ArgumentError("feature extractor has no discriminator");
  const FeatureList taps = disc->features(image);
  if (tap < 0 || static_cast<std::size_t>(tap) >= taps.size()) throw ArgumentError("feature extractor tap out of range");
  return feature_vectors(taps[static_cast<std::size_t>(tap)], 0);
}

double frechet_gaussian(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& s1, const Eigen::VectorXd& mu2,
                        const Eigen::MatrixXd& s2) {
  if (mu1.size() != mu2.size() || s1.rows() != mu1.size() || s2.rows() != mu2.size() || s1.cols() != s1.rows() ||
      s2.cols() != s2.rows())
    throw ShapeError("frechet distance: moment shapes disagree");
  const auto e1 = eigen_of(s1, "first covariance");
  const Eigen::VectorXd root = e1.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd a = e1.eigenvectors() * root.asDiagonal() * e1.eigenvectors().transpose();
  const auto e2 = eigen_of(a * s2 * a, "covariance product");
  const double tr_sqrt = e2.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double value = (mu1 - mu2).squaredNorm() + s1.trace() + s2.trace() - 2.0 * tr_sqrt;
  if (!std::isfinite(value)) throw NumericError("frechet distance: non-finite result");
  return std::max(value, 0.0);
}

double frechet_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double eps) {
  if (a.rows() != b.rows()) throw ShapeError("frechet distance: feature widths differ");
  if (!(eps >= 0.0)) throw ArgumentError("frechet distance: eps must be >= 0");
  const Eigen::VectorXd mu1 = a.rowwise().mean();
  const Eigen::VectorXd mu2 = b.rowwise().mean();
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(a.rows(), a.rows());
  return frechet_gaussian(mu1, covariance(a, mu1) + eps * id, mu2, covariance(b, mu2) + eps * id);
}

SifidScore sifid(const Image& generated, const Image& reference, const FeatureExtractor& fx, double eps) {
  if (!generated.same_shape(reference)) throw ShapeError("sifid: image shapes differ");
  const Eigen::MatrixXd a = fx.features(generated);
  const Eigen::MatrixXd b = fx.features(reference);
  if (a.cols() < a.rows() && eps <= 0.0) throw ArgumentError("sifid: fewer positions than channels needs eps > 0");
  return SifidScore{frechet_distance(a, b, eps), static_cast<int>(a.rows()), static_cast<int>(a.cols()),
                    static_cast<int>(b.cols())};
}

EvalResult eval_codes(const MultiStyleModel& model, const FeatureExtractor& fx, std::span<const SCode> codes,
                      std::span<const NamedImage> references, const std::vector<std::string>& styles) {
  if (codes.empty()) throw ArgumentError("eval: no inputs");
  const std::vector<std::size_t> idx = select_styles(model, styles);
  EvalResult r;
  for (std::size_t k : idx) r.styles.push_back(model.names()[k]);
  std::vector<const Image*> refs;
  for (const auto& name : r.styles) {
    const Image* found = nullptr;
    for (const auto& ref : references)
      if (ref.name == name) found = &ref.image;
    if (!found) throw LookupError("eval: no reference image for style " + name);
    refs.push_back(found);
  }
  r.scores.resize(static_cast<Eigen::Index>(codes.size()), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < codes.size(); ++i) {
    const std::vector<NamedImage> out = stylize_code(model, codes[i], r.styles);
    for (std::size_t k = 0; k < out.size(); ++k)
      r.scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = sifid(out[k].image, *refs[k], fx).value;
  }
  const Eigen::VectorXd col_mean = r.scores.colwise().mean().transpose();
  r.per_style.assign(col_mean.data(), col_mean.data() + col_mean.size());
  r.mean = r.scores.mean();
  return r;
}

EvalResult eval_model(const MultiStyleModel& model, const BaseModel& base, std::span<const Image> inputs,
                      std::span<const NamedImage> references, const InversionConfig& inversion, std::uint64_t seed,
                      const std::vector<std::string>& styles) {
  if (inputs.empty()) throw ArgumentError("eval: no inputs");
  std::vector<SCode> codes;
  for (auto& res : invert_batch(base, inputs, inversion, seed)) codes.push_back(std::move(res.code));
  return eval_codes(model, FeatureExtractor{&base.discriminator, 0}, codes, references, styles);
}

std::string format_eval(const EvalResult& r) {
  std::ostringstream os;
  os << std::setprecision(6) << "input";
  for (const auto& s : r.styles) os << '\t' << s;
  os << '\n';
  for (Eigen::Index i = 0; i < r.scores.rows(); ++i) {
    os << i;
    for (Eigen::Index k = 0; k < r.scores.cols(); ++k) os << '\t' << r.scores(i, k);
    os << '\n';
  }
  os << "mean";
  for (double v : r.per_style) os << '\t' << v;
  os << "\n# grand mean SIFID\t" << r.mean << '\n';
  return os.str();
}

std::uintmax_t StorageReport::total() const {
  std::uintmax_t t = generator_bytes;
  for (const auto& [name, bytes] : stn_bytes) t += bytes;
  return t;
}

StorageReport storage_report(const std::filesystem::path& checkpoint) {
  const Archive ar = Archive::read(checkpoint);
  StorageReport r;
  r.file_bytes = std::filesystem::file_size(checkpoint);
  std::vector<std::string> names;
  try {
    names = ar.metadata().at("style_names").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("storage report: ") + e.what());
  }
  std::uintmax_t stn_total = 0;
  for (const auto& name : names) {
    std::uintmax_t bytes = 0;
    const std::string prefix = "stn/" + name + "/";
    for (const auto& e : ar.entries())
      if (e.name.rfind(prefix, 0) == 0) bytes += e.byte_size();
    r.stn_bytes.emplace_back(name, bytes);
    stn_total += bytes;
  }
  r.style_count = names.size();
  r.generator_bytes = r.file_bytes - stn_total;
  r.counterfactual_bytes = r.style_count * r.generator_bytes;
  return r;
}

std::string format_storage(const StorageReport& r) {
  std::ostringstream os;
  os << "item\tbytes\n";
  os << "generator\t" << r.generator_bytes << '\n';
  for (const auto& [name, bytes] : r.stn_bytes) os << "stn:" << name << '\t' << bytes << '\n';
  os << "total\t" << r.total() << '\n';
  os << "separate_generators\t" << r.counterfactual_bytes << '\n';
  return os.str();
}

double TimingReport::single_total() const {
  double t = 0.0;
  for (double s : single_seconds) t += s;
  return t;
}

std::optional<double> TimingReport::ratio() const {
  if (multistyle_seconds < kTimingFloor || single_total() < kTimingFloor) return std::nullopt;
  return single_total() / multistyle_seconds;
}

double run_seconds(const std::filesystem::path& metrics_log) {
  const std::vector<StepRecord> log = read_metrics_log(metrics_log);
  return log.empty() ? 0.0 : log.back().elapsed_seconds;
}

TimingReport timing_report(const std::filesystem::path& multistyle_log,
                           std::span<const std::filesystem::path> single_logs) {
  TimingReport r;
  r.multistyle_seconds = run_seconds(multistyle_log);
  for (const auto& p : single_logs) r.single_seconds.push_back(run_seconds(p));
  return r;
}

std::string format_timing(const TimingReport& r) {
  std::ostringstream os;
  os << std::setprecision(6) << "run\tseconds\n";
  os << "multistyle\t" << r.multistyle_seconds << '\n';
  for (std::size_t i = 0; i < r.single_seconds.size(); ++i) os << "single_" << i << '\t' << r.single_seconds[i] << '\n';
  os << "single_total\t" << r.single_total() << '\n';
  os << "ratio\t";
  if (const auto q = r.ratio()) os << *q;
  else os << "n/a";
  os << '\n';
  return os.str();
}

ScalingResult bench_scaling(const BaseModel& base, std::span<const NamedImage> references,
                            std::span<const SCode> codes, const TrainConfig& cfg, const std::filesystem::path& dir) {
  if (references.empty() || codes.size() != references.size()) throw ArgumentError("bench: one code per reference");
  std::filesystem::create_directories(dir);
  const std::size_t n = references.size();
  const std::string tag = std::to_string(n);
  ScalingResult r;
  r.styles = n;
  r.iterations = cfg.iterations;

  const auto multi_log = dir / ("multi_" + tag + ".tsv");
  FinetuneOptions opts;
  opts.metrics_log = multi_log;
  FinetuneResult multi = finetune_from_state(prepare_from_codes(references, codes, cfg, base), opts);
  const auto multi_ckpt = dir / ("multi_" + tag + ".msgan");
  save_model(multi.model, multi_ckpt);
  if (!multi.log.empty()) r.final_losses.push_back(multi.log.back().terms.total);

  std::vector<std::filesystem::path> single_logs;
  for (std::size_t k = 0; k < n; ++k) {
    FinetuneOptions so;
    so.metrics_log = dir / ("single_" + tag + "_" + std::to_string(k) + ".tsv");
    FinetuneResult single = finetune_from_state(
        prepare_from_codes(references.subspan(k, 1), codes.subspan(k, 1), cfg, base), so);
    single_logs.push_back(so.metrics_log);
    if (k == 0) {
      const auto p = dir / ("single_" + tag + "_0.msgan");
      save_model(single.model, p);
      r.single_checkpoint_bytes = std::filesystem::file_size(p);
    }
  }
  r.timing = timing_report(multi_log, single_logs);
  r.storage = storage_report(multi_ckpt);
  return r;
}

std::string format_scaling(const ScalingResult& r) {
  std::ostringstream os;
  os << std::setprecision(6);
  os << "N\titerations\tmultistyle_s\tsingle_total_s\tratio\tmultistyle_bytes\tN_x_single_bytes\n";
  os << r.styles << '\t' << r.iterations << '\t' << r.timing.multistyle_seconds << '\t' << r.timing.single_total()
     << '\t';
  if (const auto q = r.timing.ratio()) os << *q;
  else os << "n/a";
  os << '\t' << r.storage.file_bytes << '\t' << r.styles * r.single_checkpoint_bytes << '\n';
  return os.str();
}

}  // namespace msgan
