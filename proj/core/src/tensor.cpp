// SPDX-License-Identifier: Apache-2.0
#include "msgan/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

#include "msgan/errors.hpp"

namespace msgan {

Tensor::Tensor(std::vector<int> dims, double fill) : shape(std::move(dims)) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ShapeError("negative tensor dimension");
    n *= static_cast<std::size_t>(d);
  }
  data.assign(n, fill);
}

bool Tensor::all_finite() const {
  return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

Tensor slice_batch(const Tensor& t, int b) {
  if (t.shape.size() != 4 || b < 0 || b >= t.batch()) throw ShapeError("slice_batch: bad batch index");
  Tensor out({t.channels(), 1, t.height(), t.width()});
  const std::size_t plane = t.plane();
  for (int c = 0; c < t.channels(); ++c) {
    const double* src = t.data.data() + (static_cast<std::size_t>(c) * t.batch() + b) * plane;
    std::copy(src, src + plane, out.data.data() + static_cast<std::size_t>(c) * plane);
  }
  return out;
}

Image::Image(int channels, int height, int width, double fill)
    : channels_(channels), height_(height), width_(width) {
  if (channels <= 0 || height <= 0 || width <= 0) throw ShapeError("image dimensions must be positive");
  pixels_.assign(static_cast<std::size_t>(channels) * height * width, fill);
}

Image::Image(int channels, int height, int width, std::vector<double> pixels)
    : channels_(channels), height_(height), width_(width), pixels_(std::move(pixels)) {
  if (channels <= 0 || height <= 0 || width <= 0) throw ShapeError("image dimensions must be positive");
  if (pixels_.size() != static_cast<std::size_t>(channels) * height * width)
    throw ShapeError("pixel count does not match image shape");
}

double max_abs_diff(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw ShapeError("max_abs_diff: image shapes differ");
  double m = 0.0;
  for (std::size_t i = 0; i < a.pixels().size(); ++i) m = std::max(m, std::abs(a.pixels()[i] - b.pixels()[i]));
  return m;
}

double mean_squared_error(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw ShapeError("mean_squared_error: image shapes differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.pixels().size(); ++i) {
    const double d = a.pixels()[i] - b.pixels()[i];
    s += d * d;
  }
  return s / static_cast<double>(a.pixels().size());
}

Tensor images_to_batch(std::span<const Image> images) {
  if (images.empty()) throw ArgumentError("images_to_batch: empty batch");
  const Image& first = images.front();
  const int batch = static_cast<int>(images.size());
  Tensor out({first.channels(), batch, first.height(), first.width()});
  const std::size_t plane = out.plane();
  for (int b = 0; b < batch; ++b) {
    const Image& img = images[b];
    if (!img.same_shape(first)) throw ShapeError("images_to_batch: mixed image shapes");
    for (int c = 0; c < first.channels(); ++c) {
      const double* src = img.pixels().data() + static_cast<std::size_t>(c) * plane;
      std::copy(src, src + plane, out.data.data() + (static_cast<std::size_t>(c) * batch + b) * plane);
    }
  }
  return out;
}

Image image_from_batch(const Tensor& t, int b) {
  Tensor s = slice_batch(t, b);
  return Image(t.channels(), t.height(), t.width(), std::move(s.data));
}

}  // namespace msgan
