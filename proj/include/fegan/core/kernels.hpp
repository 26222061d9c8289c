#pragma once

// Raw (non-differentiable) numeric kernels. The differentiable wrappers in
// ops.hpp compose these.

#include <Eigen/Core>

#include <cmath>
#include <cstring>

#include "fegan/core/tensor.hpp"

namespace fegan::kernels {

template <class T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <class T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

struct ConvGeometry {
  int kernel = 3;
  int stride = 1;
  int pad = 1;
  int dilation = 1;

  int out_size(int in) const { return (in + 2 * pad - dilation * (kernel - 1) - 1) / stride + 1; }
  friend bool operator==(const ConvGeometry&, const ConvGeometry&) = default;
};

inline void check_geometry(const ConvGeometry& g) {
  require_shape(g.kernel >= 1 && g.stride >= 1 && g.pad >= 0, "invalid convolution geometry");
  if (g.dilation < 1) throw std::invalid_argument("dilation must be >= 1");
}

// x: (C, H, W) -> cols: (C*k*k, Ho*Wo)
template <class T>
void im2col(const T* x, int channels, int height, int width, const ConvGeometry& g, int out_h, int out_w, T* cols) {
  const int k = g.kernel;
  const std::int64_t plane = static_cast<std::int64_t>(out_h) * out_w;
  for (int c = 0; c < channels; ++c) {
    const T* xc = x + static_cast<std::int64_t>(c) * height * width;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* row = cols + (static_cast<std::int64_t>(c) * k * k + ky * k + kx) * plane;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * g.stride - g.pad + ky * g.dilation;
          T* dst = row + static_cast<std::int64_t>(oy) * out_w;
          if (iy < 0 || iy >= height) {
            std::fill_n(dst, out_w, T(0));
            continue;
          }
          const T* src = xc + static_cast<std::int64_t>(iy) * width;
          int ix = -g.pad + kx * g.dilation;
          for (int ox = 0; ox < out_w; ++ox, ix += g.stride) dst[ox] = (ix >= 0 && ix < width) ? src[ix] : T(0);
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add cols back into x: (C, H, W).
template <class T>
void col2im(const T* cols, int channels, int height, int width, const ConvGeometry& g, int out_h, int out_w, T* x) {
  const int k = g.kernel;
  const std::int64_t plane = static_cast<std::int64_t>(out_h) * out_w;
  for (int c = 0; c < channels; ++c) {
    T* xc = x + static_cast<std::int64_t>(c) * height * width;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* row = cols + (static_cast<std::int64_t>(c) * k * k + ky * k + kx) * plane;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * g.stride - g.pad + ky * g.dilation;
          if (iy < 0 || iy >= height) continue;
          const T* src = row + static_cast<std::int64_t>(oy) * out_w;
          T* dst = xc + static_cast<std::int64_t>(iy) * width;
          int ix = -g.pad + kx * g.dilation;
          for (int ox = 0; ox < out_w; ++ox, ix += g.stride)
            if (ix >= 0 && ix < width) dst[ix] += src[ox];
        }
      }
    }
  }
}

/// y[n,o] = sum_i w[o,i] (*) x[n,i]   (cross-correlation, PyTorch semantics)
template <class T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const ConvGeometry& g) {
  check_geometry(g);
  require_shape(w.dim(1) == x.dim(1) && w.dim(2) == g.kernel && w.dim(3) == g.kernel,
                "conv2d weight " + to_string(w.shape()) + " incompatible with input " + to_string(x.shape()));
  const int n_batch = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3), cout = w.dim(0);
  const int oh = g.out_size(h), ow = g.out_size(wd);
  require_shape(oh > 0 && ow > 0, "conv2d output would be empty for input " + to_string(x.shape()));
  const int kdim = cin * g.kernel * g.kernel;
  const int plane = oh * ow;
  Tensor<T> y(Shape{n_batch, cout, oh, ow});
  std::vector<T> cols(static_cast<std::size_t>(kdim) * plane);
  ConstMatMap<T> wm(w.data(), cout, kdim);
  for (int n = 0; n < n_batch; ++n) {
    im2col(x.data() + x.offset(n, 0, 0, 0), cin, h, wd, g, oh, ow, cols.data());
    MatMap<T> yn(y.data() + y.offset(n, 0, 0, 0), cout, plane);
    yn.noalias() = wm * ConstMatMap<T>(cols.data(), kdim, plane);
  }
  return y;
}

/// Adjoint of conv2d_forward with respect to its input; also the transposed
/// convolution of `grad` by `w`.
template <class T>
Tensor<T> conv2d_input_adjoint(const Tensor<T>& grad, const Tensor<T>& w, const ConvGeometry& g, int in_h, int in_w) {
  check_geometry(g);
  const int oh = g.out_size(in_h), ow = g.out_size(in_w);
  require_shape(grad.dim(1) == w.dim(0) && grad.dim(2) == oh && grad.dim(3) == ow,
                "conv input adjoint: grad " + to_string(grad.shape()) + " does not match weight " +
                    to_string(w.shape()) + " and input size " + std::to_string(in_h) + "x" + std::to_string(in_w));
  const int n_batch = grad.dim(0), cout = w.dim(0), cin = w.dim(1);
  const int kdim = cin * g.kernel * g.kernel;
  const int plane = oh * ow;
  Tensor<T> x(Shape{n_batch, cin, in_h, in_w});
  std::vector<T> cols(static_cast<std::size_t>(kdim) * plane);
  ConstMatMap<T> wm(w.data(), cout, kdim);
  for (int n = 0; n < n_batch; ++n) {
    MatMap<T> cm(cols.data(), kdim, plane);
    cm.noalias() = wm.transpose() * ConstMatMap<T>(grad.data() + grad.offset(n, 0, 0, 0), cout, plane);
    col2im(cols.data(), cin, in_h, in_w, g, oh, ow, x.data() + x.offset(n, 0, 0, 0));
  }
  return x;
}

/// Adjoint of conv2d_forward with respect to its weight.
template <class T>
Tensor<T> conv2d_weight_adjoint(const Tensor<T>& x, const Tensor<T>& grad, const ConvGeometry& g) {
  check_geometry(g);
  const int n_batch = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3), cout = grad.dim(1);
  const int oh = g.out_size(h), ow = g.out_size(wd);
  require_shape(grad.dim(0) == n_batch && grad.dim(2) == oh && grad.dim(3) == ow,
                "conv weight adjoint: grad " + to_string(grad.shape()) + " incompatible with input " +
                    to_string(x.shape()));
  const int kdim = cin * g.kernel * g.kernel;
  const int plane = oh * ow;
  Tensor<T> w(Shape{cout, cin, g.kernel, g.kernel});
  std::vector<T> cols(static_cast<std::size_t>(kdim) * plane);
  MatMap<T> wm(w.data(), cout, kdim);
  for (int n = 0; n < n_batch; ++n) {
    im2col(x.data() + x.offset(n, 0, 0, 0), cin, h, wd, g, oh, ow, cols.data());
    wm.noalias() += ConstMatMap<T>(grad.data() + grad.offset(n, 0, 0, 0), cout, plane) *
                    ConstMatMap<T>(cols.data(), kdim, plane).transpose();
  }
  return w;
}

/// Batched matmul over the last two dims; leading dims must agree.
template <class T>
Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b, bool trans_a, bool trans_b) {
  require_shape(a.dim(0) == b.dim(0) && a.dim(1) == b.dim(1),
                "bmm batch dims differ: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  const int m = trans_a ? a.dim(3) : a.dim(2);
  const int ka = trans_a ? a.dim(2) : a.dim(3);
  const int kb = trans_b ? b.dim(3) : b.dim(2);
  const int p = trans_b ? b.dim(2) : b.dim(3);
  require_shape(ka == kb, "bmm inner dims differ: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  Tensor<T> c(Shape{a.dim(0), a.dim(1), m, p});
  const std::int64_t sa = static_cast<std::int64_t>(a.dim(2)) * a.dim(3);
  const std::int64_t sb = static_cast<std::int64_t>(b.dim(2)) * b.dim(3);
  const std::int64_t sc = static_cast<std::int64_t>(m) * p;
  for (int i = 0; i < a.dim(0) * a.dim(1); ++i) {
    ConstMatMap<T> am(a.data() + i * sa, a.dim(2), a.dim(3));
    ConstMatMap<T> bm(b.data() + i * sb, b.dim(2), b.dim(3));
    MatMap<T> cm(c.data() + i * sc, m, p);
    if (!trans_a && !trans_b)
      cm.noalias() = am * bm;
    else if (trans_a && !trans_b)
      cm.noalias() = am.transpose() * bm;
    else if (!trans_a && trans_b)
      cm.noalias() = am * bm.transpose();
    else
      cm.noalias() = am.transpose() * bm.transpose();
  }
  return c;
}

}  // namespace fegan::kernels
