// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace msgan {

/// Dense row-major array of doubles. Network activations use the
/// channel-major layout [C, B, H, W] so that one GEMM covers the batch.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> dims, double fill = 0.0);

  std::size_t size() const { return data.size(); }
  int dim(std::size_t axis) const { return shape.at(axis); }
  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  bool all_finite() const;

  // [C, B, H, W] accessors
  int channels() const { return shape[0]; }
  int batch() const { return shape[1]; }
  int height() const { return shape[2]; }
  int width() const { return shape[3]; }
  std::size_t plane() const { return static_cast<std::size_t>(shape[2]) * shape[3]; }
};

/// Extracts sample `b` of a [C, B, H, W] tensor as [C, 1, H, W].
Tensor slice_batch(const Tensor& cbhw, int b);

/// RGB (or any channel count) image with pixels nominally in [-1, 1].
class Image {
 public:
  Image() = default;
  Image(int channels, int height, int width, double fill = 0.0);
  Image(int channels, int height, int width, std::vector<double> pixels);

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  bool empty() const { return pixels_.empty(); }
  bool same_shape(const Image& other) const {
    return channels_ == other.channels_ && height_ == other.height_ && width_ == other.width_;
  }

  double& at(int c, int y, int x) { return pixels_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x]; }
  double at(int c, int y, int x) const { return pixels_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x]; }
  std::span<const double> pixels() const { return pixels_; }
  std::span<double> pixels() { return pixels_; }

  bool operator==(const Image&) const = default;

 private:
  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<double> pixels_;
};

double max_abs_diff(const Image& a, const Image& b);
double mean_squared_error(const Image& a, const Image& b);

/// Packs equally shaped images into a [C, B, H, W] batch.
Tensor images_to_batch(std::span<const Image> images);
Image image_from_batch(const Tensor& cbhw, int b);

}  // namespace msgan
