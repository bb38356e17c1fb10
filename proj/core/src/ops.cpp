// SPDX-License-Identifier: Apache-2.0
#include "msgan/ops.hpp"

#include <Eigen/Core>

#include "msgan/errors.hpp"

namespace msgan::ops {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

void check4(const Tensor& x, const char* what) {
  if (x.shape.size() != 4) throw ShapeError(std::string(what) + ": expected a [C,B,H,W] tensor");
}

// cols is (cin*k*k) x (B*H*W), row-major.
RowMat im2col(const Tensor& x, int k) {
  const int cin = x.channels(), batch = x.batch(), h = x.height(), w = x.width();
  const int pad = k / 2;
  const Eigen::Index p = static_cast<Eigen::Index>(batch) * h * w;
  RowMat cols(static_cast<Eigen::Index>(cin) * k * k, p);
  for (int c = 0; c < cin; ++c) {
    const double* src_c = x.data.data() + static_cast<std::size_t>(c) * batch * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* dst = cols.row((static_cast<Eigen::Index>(c) * k + ky) * k + kx).data();
        const int dy = ky - pad, dx = kx - pad;
        for (int b = 0; b < batch; ++b) {
          const double* src = src_c + static_cast<std::size_t>(b) * h * w;
          double* out = dst + static_cast<std::size_t>(b) * h * w;
          for (int y = 0; y < h; ++y) {
            const int sy = y + dy;
            double* orow = out + static_cast<std::size_t>(y) * w;
            if (sy < 0 || sy >= h) {
              std::fill(orow, orow + w, 0.0);
              continue;
            }
            const double* srow = src + static_cast<std::size_t>(sy) * w;
            for (int xx = 0; xx < w; ++xx) {
              const int sx = xx + dx;
              orow[xx] = (sx < 0 || sx >= w) ? 0.0 : srow[sx];
            }
          }
        }
      }
    }
  }
  return cols;
}

void col2im_add(const RowMat& cols, int k, Tensor& gx) {
  const int cin = gx.channels(), batch = gx.batch(), h = gx.height(), w = gx.width();
  const int pad = k / 2;
  for (int c = 0; c < cin; ++c) {
    double* dst_c = gx.data.data() + static_cast<std::size_t>(c) * batch * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* src = cols.row((static_cast<Eigen::Index>(c) * k + ky) * k + kx).data();
        const int dy = ky - pad, dx = kx - pad;
        for (int b = 0; b < batch; ++b) {
          double* out = dst_c + static_cast<std::size_t>(b) * h * w;
          const double* in = src + static_cast<std::size_t>(b) * h * w;
          for (int y = 0; y < h; ++y) {
            const int sy = y + dy;
            if (sy < 0 || sy >= h) continue;
            const double* irow = in + static_cast<std::size_t>(y) * w;
            double* orow = out + static_cast<std::size_t>(sy) * w;
            for (int xx = 0; xx < w; ++xx) {
              const int sx = xx + dx;
              if (sx >= 0 && sx < w) orow[sx] += irow[xx];
            }
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, std::span<const double> weight, int cout, int k) {
  check4(x, "conv2d");
  const Eigen::Index kdim = static_cast<Eigen::Index>(x.channels()) * k * k;
  if (weight.size() != static_cast<std::size_t>(cout) * kdim) throw ShapeError("conv2d: weight size mismatch");
  Tensor y({cout, x.batch(), x.height(), x.width()});
  if (k == 1) {
    // x is already cin x P
    MutMap(y.data.data(), cout, static_cast<Eigen::Index>(x.size() / x.channels())).noalias() =
        ConstMap(weight.data(), cout, kdim) *
        ConstMap(x.data.data(), x.channels(), static_cast<Eigen::Index>(x.size() / x.channels()));
    return y;
  }
  const RowMat cols = im2col(x, k);
  MutMap(y.data.data(), cout, cols.cols()).noalias() = ConstMap(weight.data(), cout, kdim) * cols;
  return y;
}

void conv2d_backward(const Tensor& x, std::span<const double> weight, int cout, int k, const Tensor& grad_y,
                     Tensor* grad_x, std::span<double> grad_weight) {
  check4(x, "conv2d_backward");
  const Eigen::Index kdim = static_cast<Eigen::Index>(x.channels()) * k * k;
  const Eigen::Index p = static_cast<Eigen::Index>(x.size() / x.channels());
  ConstMap w(weight.data(), cout, kdim);
  ConstMap gy(grad_y.data.data(), cout, p);
  if (k == 1) {
    ConstMap xm(x.data.data(), x.channels(), p);
    if (!grad_weight.empty()) MutMap(grad_weight.data(), cout, kdim).noalias() += gy * xm.transpose();
    if (grad_x) MutMap(grad_x->data.data(), x.channels(), p).noalias() += w.transpose() * gy;
    return;
  }
  if (!grad_weight.empty()) {
    const RowMat cols = im2col(x, k);
    MutMap(grad_weight.data(), cout, kdim).noalias() += gy * cols.transpose();
  }
  if (grad_x) {
    RowMat gcols = w.transpose() * gy;
    col2im_add(gcols, k, *grad_x);
  }
}

Tensor upsample2x(const Tensor& x) {
  check4(x, "upsample2x");
  const int h = x.height(), w = x.width();
  Tensor y({x.channels(), x.batch(), 2 * h, 2 * w});
  const std::size_t planes = static_cast<std::size_t>(x.channels()) * x.batch();
  for (std::size_t pl = 0; pl < planes; ++pl) {
    const double* src = x.data.data() + pl * h * w;
    double* dst = y.data.data() + pl * 4 * h * w;
    for (int yy = 0; yy < 2 * h; ++yy)
      for (int xx = 0; xx < 2 * w; ++xx) dst[static_cast<std::size_t>(yy) * 2 * w + xx] = src[(yy / 2) * w + xx / 2];
  }
  return y;
}

Tensor upsample2x_backward(const Tensor& g) {
  check4(g, "upsample2x_backward");
  const int h = g.height() / 2, w = g.width() / 2;
  Tensor out({g.channels(), g.batch(), h, w});
  const std::size_t planes = static_cast<std::size_t>(g.channels()) * g.batch();
  for (std::size_t pl = 0; pl < planes; ++pl) {
    const double* src = g.data.data() + pl * 4 * h * w;
    double* dst = out.data.data() + pl * h * w;
    for (int yy = 0; yy < 2 * h; ++yy)
      for (int xx = 0; xx < 2 * w; ++xx) dst[(yy / 2) * w + xx / 2] += src[static_cast<std::size_t>(yy) * 2 * w + xx];
  }
  return out;
}

Tensor avgpool2x(const Tensor& x) {
  check4(x, "avgpool2x");
  if (x.height() % 2 || x.width() % 2) throw ShapeError("avgpool2x: odd spatial size");
  const int h = x.height() / 2, w = x.width() / 2;
  Tensor y({x.channels(), x.batch(), h, w});
  const std::size_t planes = static_cast<std::size_t>(x.channels()) * x.batch();
  const int iw = x.width();
  for (std::size_t pl = 0; pl < planes; ++pl) {
    const double* src = x.data.data() + pl * 4 * h * w;
    double* dst = y.data.data() + pl * h * w;
    for (int yy = 0; yy < h; ++yy)
      for (int xx = 0; xx < w; ++xx) {
        const double* s = src + static_cast<std::size_t>(2 * yy) * iw + 2 * xx;
        dst[yy * w + xx] = 0.25 * (s[0] + s[1] + s[iw] + s[iw + 1]);
      }
  }
  return y;
}

Tensor avgpool2x_backward(const Tensor& g) {
  check4(g, "avgpool2x_backward");
  const int h = g.height(), w = g.width();
  Tensor out({g.channels(), g.batch(), 2 * h, 2 * w});
  const std::size_t planes = static_cast<std::size_t>(g.channels()) * g.batch();
  for (std::size_t pl = 0; pl < planes; ++pl) {
    const double* src = g.data.data() + pl * h * w;
    double* dst = out.data.data() + pl * 4 * h * w;
    for (int yy = 0; yy < 2 * h; ++yy)
      for (int xx = 0; xx < 2 * w; ++xx) dst[static_cast<std::size_t>(yy) * 2 * w + xx] = 0.25 * src[(yy / 2) * w + xx / 2];
  }
  return out;
}

}  // namespace msgan::ops
