// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "msgan/inversion.hpp"
#include "msgan/trainer.hpp"

namespace msgan {

struct StylizationRequest {
  Image input;
  /// Style names in output order; empty selects every style.
  std::vector<std::string> styles;
  InversionConfig inversion;
  std::uint64_t seed = 0;
};

/// Resolves names to bank indices, preserving order. Empty means all.
std::vector<std::size_t> select_styles(const MultiStyleModel& model, const std::vector<std::string>& styles);

/// G_theta_hat(T_k(s)) for each selected style.
std::vector<NamedImage> stylize_code(const MultiStyleModel& model, const SCode& s,
                                     const std::vector<std::string>& styles = {});

/// Inverts the input against the base generator, then stylizes the code.
std::vector<NamedImage> stylize(const MultiStyleModel& model, const BaseModel& base, const StylizationRequest& req);

/// The same pipeline applied to a style image.
std::vector<NamedImage> restylize(const MultiStyleModel& model, const BaseModel& base, const Image& style_image,
                                  const StylizationRequest& req);

/// Blend of two multistyle codes over a row range near the output end.
struct NovelMixSpec {
  SCode source;
  std::string base_style;
  std::string partner_style;
  /// When set the partner code is T_partner(S(P(z))) for a seeded z;
  /// otherwise T_partner(source).
  std::optional<std::uint64_t> partner_seed;
  std::size_t range_begin = 0;
  std::size_t range_end = 0;
  /// One bit per row; set bits take the partner row and must lie in range.
  StyleMixMask blend;

  /// Range [default_mix_start(rows), rows) with every bit in it set.
  static NovelMixSpec tail(const SCode& source, std::string base_style, std::string partner_style);
};

/// First row of the last 40% of rows.
std::size_t default_mix_start(std::size_t rows);

SCode novel_mix_code(const MultiStyleModel& model, const BaseModel& base, const NovelMixSpec& spec);
Image novel_mix(const MultiStyleModel& model, const BaseModel& base, const NovelMixSpec& spec);

struct MultistyleSample {
  std::size_t style = 0;
  Image image;
};

/// z -> S(P(z)) -> T_k -> G. k is drawn uniformly unless forced.
std::vector<MultistyleSample> sample_multistyle(const MultiStyleModel& model, const BaseModel& base,
                                                std::uint64_t seed, int count,
                                                std::optional<std::size_t> forced_style = std::nullopt);

}  // namespace msgan
