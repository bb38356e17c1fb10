// SPDX-License-Identifier: Apache-2.0
#include "msgan/inference.hpp"

#include <cmath>

#include "msgan/errors.hpp"
#include "msgan/random.hpp"

namespace msgan {
namespace {

void check_base(const MultiStyleModel& model, const BaseModel& base) {
  if (!(model.base_config == base.config)) throw ArgumentError("model and base prior have different configs");
}

}  // namespace

std::vector<std::size_t> select_styles(const MultiStyleModel& model, const std::vector<std::string>& styles) {
  std::vector<std::size_t> idx;
  if (styles.empty()) {
    for (std::size_t k = 0; k < model.bank.size(); ++k) idx.push_back(k);
  } else {
    for (const auto& s : styles) idx.push_back(model.bank.find(s));
  }
  return idx;
}

std::vector<NamedImage> stylize_code(const MultiStyleModel& model, const SCode& s,
                                     const std::vector<std::string>& styles) {
  const std::vector<std::size_t> idx = select_styles(model, styles);
  // One render per style keeps each output independent of the selection.
  std::vector<NamedImage> out;
  for (std::size_t k : idx) out.push_back(NamedImage{model.names()[k], model.render(s, k)});
  return out;
}

std::vector<NamedImage> stylize(const MultiStyleModel& model, const BaseModel& base, const StylizationRequest& req) {
  check_base(model, base);
  select_styles(model, req.styles);
  const SCode s = invert(base, req.input, req.inversion, req.seed);
  return stylize_code(model, s, req.styles);
}

std::vector<NamedImage> restylize(const MultiStyleModel& model, const BaseModel& base, const Image& style_image,
                                  const StylizationRequest& req) {
  StylizationRequest r = req;
  r.input = style_image;
  return stylize(model, base, r);
}

std::size_t default_mix_start(std::size_t rows) {
  return rows - static_cast<std::size_t>(std::lround(0.4 * static_cast<double>(rows)));
}

NovelMixSpec NovelMixSpec::tail(const SCode& source, std::string base_style, std::string partner_style) {
  NovelMixSpec spec;
  spec.source = source;
  spec.base_style = std::move(base_style);
  spec.partner_style = std::move(partner_style);
  const std::size_t rows = source.rows();
  spec.range_begin = default_mix_start(rows);
  spec.range_end = rows;
  std::vector<std::uint8_t> bits(rows, 0);
  for (std::size_t i = spec.range_begin; i < rows; ++i) bits[i] = 1;
  spec.blend = StyleMixMask(bits);
  return spec;
}

SCode novel_mix_code(const MultiStyleModel& model, const BaseModel& base, const NovelMixSpec& spec) {
  check_base(model, base);
  const std::size_t rows = model.schedule().rows();
  if (!(spec.source.schedule() == model.schedule())) throw ShapeError("novel_mix: source schedule differs from model");
  if (spec.range_begin > spec.range_end || spec.range_end > rows)
    throw ArgumentError("novel_mix: row range [" + std::to_string(spec.range_begin) + ", " +
                        std::to_string(spec.range_end) + ") is outside the schedule");
  if (spec.blend.size() != rows) throw ArgumentError("novel_mix: blend mask needs one bit per row");
  for (std::size_t i = 0; i < rows; ++i)
    if (spec.blend.keeps_reference(i) && (i < spec.range_begin || i >= spec.range_end))
      throw ArgumentError("novel_mix: blend bit " + std::to_string(i) + " lies outside the row range");

  const SCode a = model.to_multistyle(spec.source, model.bank.find(spec.base_style));
  const std::size_t pk = model.bank.find(spec.partner_style);
  const SCode partner =
      spec.partner_seed
          ? model.to_multistyle(base.random_style(gaussian_vector(*spec.partner_seed, base.z_dim())), pk)
          : model.to_multistyle(spec.source, pk);
  // mix_rows keeps the first argument where the bit is set.
  return mix_rows(partner, a, spec.blend);
}

Image novel_mix(const MultiStyleModel& model, const BaseModel& base, const NovelMixSpec& spec) {
  return model.generator.synthesize(novel_mix_code(model, base, spec));
}

std::vector<MultistyleSample> sample_multistyle(const MultiStyleModel& model, const BaseModel& base,
                                                std::uint64_t seed, int count,
                                                std::optional<std::size_t> forced_style) {
  check_base(model, base);
  if (count < 1) throw ArgumentError("sample_multistyle: count must be >= 1");
  if (forced_style && *forced_style >= model.bank.size()) throw LookupError("sample_multistyle: style index out of range");
  std::vector<MultistyleSample> out;
  for (int i = 0; i < count; ++i) {
    Rng rng(derive_seed({seed, static_cast<std::uint64_t>(i)}));
    const Eigen::VectorXd z = gaussian_vector(rng, base.z_dim());
    const std::size_t k =
        forced_style ? *forced_style : std::uniform_int_distribution<std::size_t>(0, model.bank.size() - 1)(rng);
    out.push_back(MultistyleSample{k, model.render(base.random_style(z), k)});
  }
  return out;
}

}  // namespace msgan
