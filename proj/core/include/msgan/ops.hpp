// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>

#include "msgan/tensor.hpp"

// Differentiable building blocks over [C, B, H, W] tensors. Each forward has
// a matching backward that accumulates (+=) into the gradient outputs.
namespace msgan::ops {

/// Stride-1 convolution with zero padding k/2. `weight` is [cout, cin, k, k].
Tensor conv2d(const Tensor& x, std::span<const double> weight, int cout, int k);

/// Accumulates d/dx into `grad_x` (if non-null) and d/dweight into
/// `grad_weight` (if non-empty).
void conv2d_backward(const Tensor& x, std::span<const double> weight, int cout, int k, const Tensor& grad_y,
                     Tensor* grad_x, std::span<double> grad_weight);

Tensor upsample2x(const Tensor& x);
Tensor upsample2x_backward(const Tensor& grad_y);

Tensor avgpool2x(const Tensor& x);
Tensor avgpool2x_backward(const Tensor& grad_y);

inline constexpr double kLeakySlope = 0.2;
inline constexpr double kLeakyGain = 1.4142135623730951;

/// gain * leaky_relu(v)
inline double lrelu(double v) { return kLeakyGain * (v >= 0.0 ? v : kLeakySlope * v); }
inline double lrelu_grad(double pre) { return kLeakyGain * (pre >= 0.0 ? 1.0 : kLeakySlope); }

}  // namespace msgan::ops
