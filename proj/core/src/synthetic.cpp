// SPDX-License-Identifier: Apache-2.0
#include "msgan/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "msgan/errors.hpp"
#include "msgan/random.hpp"

namespace msgan {
namespace {

using Rgb = std::array<double, 3>;

struct Shape {
  Primitive kind;
  double cx, cy, size, angle;
  Rgb color;
};

bool inside(const Shape& s, double x, double y) {
  const double dx = x - s.cx, dy = y - s.cy;
  const double c = std::cos(s.angle), sn = std::sin(s.angle);
  const double u = c * dx + sn * dy, v = -sn * dx + c * dy;
  switch (s.kind) {
    case Primitive::Circle:
      return dx * dx + dy * dy <= s.size * s.size;
    case Primitive::Square:
      return std::abs(u) <= s.size && std::abs(v) <= s.size;
    case Primitive::Triangle: {
      // Equilateral triangle with circumradius `size`, pointing along -v.
      const double r = s.size;
      const double h = 1.5 * r;
      const double t = (v + r) / h;  // 0 at apex, 1 at base
      return t >= 0.0 && t <= 1.0 && std::abs(u) <= t * r * 0.8660254037844386;
    }
  }
  return false;
}

double clamp1(double v) { return std::clamp(v, -1.0, 1.0); }

double luma(const Image& img, int y, int x) {
  return 0.299 * img.at(0, y, x) + 0.587 * img.at(1, y, x) + 0.114 * img.at(2, y, x);
}

}  // namespace

void SyntheticDatasetSpec::validate() const {
  if (count < 1) throw ArgumentError("dataset count must be >= 1");
  if (resolution < 4) throw ArgumentError("dataset resolution must be >= 4");
  if (primitives.empty()) throw ArgumentError("dataset needs at least one primitive type");
  if (max_shapes < 1) throw ArgumentError("max_shapes must be >= 1");
  if (!(palette_range > 0.0 && palette_range <= 1.0)) throw ArgumentError("palette_range must lie in (0, 1]");
}

std::vector<Image> render_dataset(const SyntheticDatasetSpec& spec) {
  spec.validate();
  const int res = spec.resolution;
  std::vector<Image> out;
  out.reserve(static_cast<std::size_t>(spec.count));
  for (int n = 0; n < spec.count; ++n) {
    Rng rng(derive_seed({spec.seed, 0xda7a, static_cast<std::uint64_t>(n)}));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> col(-spec.palette_range, spec.palette_range);
    Rgb bg{col(rng), col(rng), col(rng)};
    Rgb grad;
    for (double& g : grad) g = spec.gradient_strength * (2.0 * unit(rng) - 1.0);
    const double theta = 2.0 * std::numbers::pi * unit(rng);
    const double gx = std::cos(theta), gy = std::sin(theta);

    std::uniform_int_distribution<int> nshape(1, spec.max_shapes);
    std::uniform_int_distribution<std::size_t> kind(0, spec.primitives.size() - 1);
    std::vector<Shape> shapes(static_cast<std::size_t>(nshape(rng)));
    for (Shape& s : shapes) {
      s.kind = spec.primitives[kind(rng)];
      s.size = res * (0.12 + 0.18 * unit(rng));
      s.cx = res * (0.2 + 0.6 * unit(rng));
      s.cy = res * (0.2 + 0.6 * unit(rng));
      s.angle = 2.0 * std::numbers::pi * unit(rng);
      s.color = {col(rng), col(rng), col(rng)};
    }

    Image img(3, res, res);
    for (int y = 0; y < res; ++y)
      for (int x = 0; x < res; ++x) {
        Rgb acc{0, 0, 0};
        for (int sy = 0; sy < 2; ++sy)
          for (int sx = 0; sx < 2; ++sx) {
            const double px = x + 0.25 + 0.5 * sx, py = y + 0.25 + 0.5 * sy;
            const double t = ((px / res - 0.5) * gx + (py / res - 0.5) * gy);
            Rgb c;
            for (int ch = 0; ch < 3; ++ch) c[ch] = bg[ch] + grad[ch] * t;
            for (const Shape& s : shapes)
              if (inside(s, px, py)) c = s.color;
            for (int ch = 0; ch < 3; ++ch) acc[ch] += 0.25 * c[ch];
          }
        for (int ch = 0; ch < 3; ++ch) img.at(ch, y, x) = clamp1(acc[ch]);
      }
    out.push_back(std::move(img));
  }
  return out;
}

const char* filter_name(StyleFilter f) {
  switch (f) {
    case StyleFilter::HueShift: return "hue";
    case StyleFilter::EdgeSketch: return "sketch";
    case StyleFilter::Posterize: return "posterize";
    case StyleFilter::InvertPalette: return "invert";
  }
  return "?";
}

Image apply_style_filter(const Image& image, StyleFilter filter, int variant) {
  if (image.channels() != 3) throw ShapeError("style filters need RGB images");
  const int h = image.height(), w = image.width();
  Image out(3, h, w);
  switch (filter) {
    case StyleFilter::HueShift: {
      // Rotation about the grey axis, then a saturation boost.
      const double a = (2.0 * std::numbers::pi / 3.0) * (1 + variant % 2) + 0.35 * (variant / 2);
      const double c = std::cos(a), s = std::sin(a), k = (1.0 - c) / 3.0, r = std::sqrt(1.0 / 3.0) * s;
      const double m[3][3] = {{c + k, k - r, k + r}, {k + r, c + k, k - r}, {k - r, k + r, c + k}};
      const double sat = 1.4 + 0.2 * (variant % 3);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          double v[3];
          for (int i = 0; i < 3; ++i)
            v[i] = m[i][0] * image.at(0, y, x) + m[i][1] * image.at(1, y, x) + m[i][2] * image.at(2, y, x);
          const double g = (v[0] + v[1] + v[2]) / 3.0;
          for (int i = 0; i < 3; ++i) out.at(i, y, x) = clamp1(g + sat * (v[i] - g));
        }
      break;
    }
    case StyleFilter::EdgeSketch: {
      // Dark Sobel strokes on tinted paper.
      const double gain = 2.0 + 0.75 * (variant % 4);
      const double tint[3] = {0.9 - 0.15 * (variant % 3), 0.85, 0.7 + 0.1 * (variant % 2)};
      const double ink[3] = {-0.9, -0.85 + 0.3 * ((variant / 2) % 2), -0.8};
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          auto L = [&](int yy, int xx) { return luma(image, std::clamp(yy, 0, h - 1), std::clamp(xx, 0, w - 1)); };
          const double gx = (L(y - 1, x + 1) + 2 * L(y, x + 1) + L(y + 1, x + 1)) -
                            (L(y - 1, x - 1) + 2 * L(y, x - 1) + L(y + 1, x - 1));
          const double gy = (L(y + 1, x - 1) + 2 * L(y + 1, x) + L(y + 1, x + 1)) -
                            (L(y - 1, x - 1) + 2 * L(y - 1, x) + L(y - 1, x + 1));
          const double e = std::clamp(gain * std::sqrt(gx * gx + gy * gy) / 8.0, 0.0, 1.0);
          for (int i = 0; i < 3; ++i) out.at(i, y, x) = (1.0 - e) * tint[i] + e * ink[i];
        }
      break;
    }
    case StyleFilter::Posterize: {
      const int levels = 2 + variant % 3;
      const double contrast = 1.3 + 0.2 * (variant / 3);
      for (int i = 0; i < 3; ++i)
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) {
            const double v = clamp1(contrast * image.at(i, y, x));
            const double q = std::round((v + 1.0) / 2.0 * (levels - 1)) / (levels - 1);
            out.at(i, y, x) = 2.0 * q - 1.0;
          }
      break;
    }
    case StyleFilter::InvertPalette: {
      // Negative with a channel rotation; odd variants also flatten contrast.
      const int shift = variant % 3;
      const double gain = (variant / 3) % 2 == 0 ? 1.0 : 0.6;
      for (int i = 0; i < 3; ++i)
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) out.at(i, y, x) = clamp1(-gain * image.at((i + shift) % 3, y, x));
      break;
    }
  }
  return out;
}

std::vector<Image> base_samples(const BaseModel& base, int count, std::uint64_t seed) {
  std::vector<SCode> codes;
  for (int k = 0; k < count; ++k)
    codes.push_back(base.random_style(gaussian_vector(derive_seed({seed, 0x5a3b, static_cast<std::uint64_t>(k)}), base.z_dim())));
  std::vector<Image> out;
  for (const SCode& c : codes) out.push_back(base.generator.synthesize(c));
  return out;
}

std::vector<NamedImage> synthetic_references(const BaseModel& base, int count, std::uint64_t seed) {
  if (count < 1) throw ArgumentError("synthetic_references: count must be >= 1");
  constexpr StyleFilter kFilters[4] = {StyleFilter::HueShift, StyleFilter::EdgeSketch, StyleFilter::Posterize,
                                       StyleFilter::InvertPalette};
  const std::vector<Image> samples = base_samples(base, count, derive_seed({seed, 0x5e1}));
  std::vector<NamedImage> out;
  for (int k = 0; k < count; ++k) {
    const StyleFilter f = kFilters[k % 4];
    const int variant = k / 4;
    char name[64];
    std::snprintf(name, sizeof name, "%02d_%s%d", k, filter_name(f), variant);
    out.push_back(NamedImage{name, apply_style_filter(samples[static_cast<std::size_t>(k)], f, variant)});
  }
  return out;
}

}  // namespace msgan
