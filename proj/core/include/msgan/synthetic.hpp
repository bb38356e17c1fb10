// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "msgan/nets.hpp"
#include "msgan/tensor.hpp"
#include "msgan/trainer.hpp"

namespace msgan {

enum class Primitive { Circle, Square, Triangle };

struct SyntheticDatasetSpec {
  std::vector<Primitive> primitives{Primitive::Circle, Primitive::Square, Primitive::Triangle};
  int count = 2048;
  int resolution = 32;
  /// Shapes per image are drawn from [1, max_shapes].
  int max_shapes = 2;
  /// Channel values of shape and background colours are drawn from
  /// [-palette_range, palette_range].
  double palette_range = 1.0;
  /// Largest end-to-end change of the background gradient per channel.
  double gradient_strength = 0.8;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Coloured primitives over linear-gradient backgrounds, 2x2 supersampled.
std::vector<Image> render_dataset(const SyntheticDatasetSpec& spec);

enum class StyleFilter { HueShift, EdgeSketch, Posterize, InvertPalette };

const char* filter_name(StyleFilter f);

/// Deterministic image filter; `variant` selects one of several parameter
/// settings so that repeated filters give distinct styles.
Image apply_style_filter(const Image& image, StyleFilter filter, int variant);

/// `count` style references: base-generator samples passed through the four
/// filters in turn. Names sort in generation order.
std::vector<NamedImage> synthetic_references(const BaseModel& base, int count, std::uint64_t seed);

/// Unfiltered base-generator samples (held-out inputs).
std::vector<Image> base_samples(const BaseModel& base, int count, std::uint64_t seed);

}  // namespace msgan
