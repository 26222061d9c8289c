#pragma once

// Differentiable ops. Each backward closure is expressed with these same ops,
// so gradients taken with create_graph=true are themselves differentiable.

#include <cmath>
#include <numeric>

#include "fegan/core/autograd.hpp"
#include "fegan/core/kernels.hpp"

namespace fegan::ag {

using kernels::ConvGeometry;

namespace detail {

inline Shape broadcast_shape(const Shape& a, const Shape& b) {
  Shape out{};
  for (std::size_t d = 0; d < 4; ++d) {
    if (a[d] == b[d] || b[d] == 1)
      out[d] = a[d];
    else if (a[d] == 1)
      out[d] = b[d];
    else
      throw ShapeError("cannot broadcast " + to_string(a) + " with " + to_string(b));
  }
  return out;
}

// Strides of `s` when read inside an iteration over `out` (0 on broadcast dims).
inline std::array<std::int64_t, 4> read_strides(const Shape& s, const Shape& out) {
  std::array<std::int64_t, 4> st{};
  std::int64_t acc = 1;
  for (int d = 3; d >= 0; --d) {
    st[static_cast<std::size_t>(d)] = (s[static_cast<std::size_t>(d)] == 1 && out[static_cast<std::size_t>(d)] != 1) ? 0 : acc;
    acc *= s[static_cast<std::size_t>(d)];
  }
  return st;
}

template <class T, class F>
Tensor<T> binary(const Tensor<T>& a, const Tensor<T>& b, F f) {
  if (a.shape() == b.shape()) {
    Tensor<T> out(a.shape());
    const T* pa = a.data();
    const T* pb = b.data();
    T* po = out.data();
    for (std::int64_t i = 0, n = out.size(); i < n; ++i) po[i] = f(pa[i], pb[i]);
    return out;
  }
  const Shape s = broadcast_shape(a.shape(), b.shape());
  const auto sa = read_strides(a.shape(), s);
  const auto sb = read_strides(b.shape(), s);
  Tensor<T> out(s);
  T* po = out.data();
  for (int n = 0; n < s[0]; ++n)
    for (int c = 0; c < s[1]; ++c)
      for (int h = 0; h < s[2]; ++h) {
        const T* pa = a.data() + n * sa[0] + c * sa[1] + h * sa[2];
        const T* pb = b.data() + n * sb[0] + c * sb[1] + h * sb[2];
        for (int w = 0; w < s[3]; ++w) *po++ = f(pa[w * sa[3]], pb[w * sb[3]]);
      }
  return out;
}

template <class T, class F>
Tensor<T> unary(const Tensor<T>& x, F f) {
  Tensor<T> out(x.shape());
  const T* px = x.data();
  T* po = out.data();
  for (std::int64_t i = 0, n = out.size(); i < n; ++i) po[i] = f(px[i]);
  return out;
}

template <class T>
Tensor<T> sum_to(const Tensor<T>& x, const Shape& target) {
  if (x.shape() == target) return x;
  for (std::size_t d = 0; d < 4; ++d)
    require_shape(target[d] == x.shape()[d] || target[d] == 1,
                  "cannot reduce " + to_string(x.shape()) + " to " + to_string(target));
  Tensor<T> out(target);
  const auto st = read_strides(target, x.shape());
  const Shape& s = x.shape();
  const T* px = x.data();
  for (int n = 0; n < s[0]; ++n)
    for (int c = 0; c < s[1]; ++c)
      for (int h = 0; h < s[2]; ++h) {
        T* po = out.data() + n * st[0] + c * st[1] + h * st[2];
        for (int w = 0; w < s[3]; ++w) po[w * st[3]] += *px++;
      }
  return out;
}

template <class T>
Tensor<T> expand(const Tensor<T>& x, const Shape& target) {
  if (x.shape() == target) return x;
  require_shape(broadcast_shape(x.shape(), target) == target,
                "cannot expand " + to_string(x.shape()) + " to " + to_string(target));
  const auto st = read_strides(x.shape(), target);
  Tensor<T> out(target);
  T* po = out.data();
  for (int n = 0; n < target[0]; ++n)
    for (int c = 0; c < target[1]; ++c)
      for (int h = 0; h < target[2]; ++h) {
        const T* px = x.data() + n * st[0] + c * st[1] + h * st[2];
        for (int w = 0; w < target[3]; ++w) *po++ = px[w * st[3]];
      }
  return out;
}

template <class T>
Tensor<T> narrow(const Tensor<T>& x, int dim, int start, int len) {
  Shape s = x.shape();
  require_shape(dim >= 0 && dim < 4 && start >= 0 && len >= 0 && start + len <= s[static_cast<std::size_t>(dim)],
                "narrow out of range on " + to_string(s));
  Shape o = s;
  o[static_cast<std::size_t>(dim)] = len;
  Tensor<T> out(o);
  std::int64_t outer = 1, inner = 1;
  for (int d = 0; d < dim; ++d) outer *= s[static_cast<std::size_t>(d)];
  for (int d = dim + 1; d < 4; ++d) inner *= s[static_cast<std::size_t>(d)];
  const std::int64_t src_block = s[static_cast<std::size_t>(dim)] * inner;
  const std::int64_t dst_block = len * inner;
  for (std::int64_t i = 0; i < outer; ++i)
    std::copy_n(x.data() + i * src_block + start * inner, dst_block, out.data() + i * dst_block);
  return out;
}

// Adjoint of narrow: place x at [start, start+len) of a zero tensor whose
// extent along `dim` is `total`.
template <class T>
Tensor<T> embed(const Tensor<T>& x, int dim, int start, int total) {
  Shape s = x.shape();
  const int len = s[static_cast<std::size_t>(dim)];
  require_shape(start >= 0 && start + len <= total, "embed out of range");
  Shape o = s;
  o[static_cast<std::size_t>(dim)] = total;
  Tensor<T> out(o);
  std::int64_t outer = 1, inner = 1;
  for (int d = 0; d < dim; ++d) outer *= s[static_cast<std::size_t>(d)];
  for (int d = dim + 1; d < 4; ++d) inner *= s[static_cast<std::size_t>(d)];
  const std::int64_t dst_block = total * inner;
  const std::int64_t src_block = len * inner;
  for (std::int64_t i = 0; i < outer; ++i)
    std::copy_n(x.data() + i * src_block, src_block, out.data() + i * dst_block + start * inner);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------- structure

template <class T>
Var<T> sum_to(const Var<T>& x, const Shape& target);
template <class T>
Var<T> expand(const Var<T>& x, const Shape& target);

template <class T>
Var<T> sum_to(const Var<T>& x, const Shape& target) {
  if (x.shape() == target) return x;
  const Shape in = x.shape();
  return make_op<T>("sum_to", detail::sum_to(x.value(), target), {x},
                    [in](const Var<T>&, const Var<T>& g, const std::vector<bool>&) {
                      return std::vector<Var<T>>{expand(g, in)};
                    });
}

template <class T>
Var<T> expand(const Var<T>& x, const Shape& target) {
  if (x.shape() == target) return x;
  const Shape in = x.shape();
  return make_op<T>("expand", detail::expand(x.value(), target), {x},
                    [in](const Var<T>&, const Var<T>& g, const std::vector<bool>&) {
                      return std::vector<Var<T>>{sum_to(g, in)};
                    });
}

template <class T>
Var<T> reshape(const Var<T>& x, const Shape& s) {
  if (x.shape() == s) return x;
  const Shape in = x.shape();
  return make_op<T>("reshape", x.value().reshaped(s), {x},
                    [in](const Var<T>&, const Var<T>& g, const std::vector<bool>&) {
                      return std::vector<Var<T>>{reshape(g, in)};
                    });
}

template <class T>
Var<T> embed(const Var<T>& x, int dim, int start, int total);

template <class T>
Var<T> narrow(const Var<T>& x, int dim, int start, int len) {
  if (start == 0 && len == x.dim(dim)) return x;
  const int total = x.dim(dim);
  return make_op<T>("narrow", detail::narrow(x.value(), dim, start, len), {x},
                    [dim, start, total](const Var<T>&, const Var<T>& g, const std::vector<bool>&) {
                      return std::vector<Var<T>>{embed(g, dim, start, total)};
                    });
}

template <class T>
Var<T> embed(const Var<T>& x, int dim, int start, int total) {
  const int len = x.dim(dim);
  return make_op<T>("embed", detail::embed(x.value(), dim, start, total), {x},
                    [dim, start, len](const Var<T>&, const Var<T>& g, const std::vector<bool>&) {
                      return std::vector<Var<T>>{narrow(g, dim, start, len)};
                    });
}

/// Concatenate along `dim` (all other dims must agree).
template <class T>
Var<T> concat(const std::vector<Var<T>>& parts, int dim = 1) {
  require_shape(!parts.empty(), "concat of nothing");
  if (parts.size() == 1) return parts.front();
  Shape s = parts.front().shape();
  std::vector<int> offsets;
  int total = 0;
  for (const auto& p : parts) {
    for (std::size_t d = 0; d < 4; ++d)
      if (static_cast<int>(d) != dim)
        require_shape(p.shape()[d] == s[d], "concat shape mismatch " + to_string(p.shape()) + " vs " + to_string(s));
    offsets.push_back(total);
    total += p.dim(dim);
  }
  s[static_cast<std::size_t>(dim)] = total;
  Tensor<T> out(s);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    Tensor<T> e = detail::embed(parts[i].value(), dim, offsets[i], total);
    T* po = out.data();
    const T* pe = e.data();
    for (std::int64_t j = 0; j < out.size(); ++j) po[j] += pe[j];
  }
  std::vector<int> lens;
  for (const auto& p : parts) lens.push_back(p.dim(dim));
  return make_op<T>("concat", std::move(out), parts,
                    [dim, offsets, lens](const Var<T>&, const Var<T>& g, const std::vector<bool>& needed) {
                      std::vector<Var<T>> r(offsets.size());
                      for (std::size_t i = 0; i < r.size(); ++i)
                        if (needed[i]) r[i] = narrow(g, dim, offsets[i], lens[i]);
                      return r;
                    });
}

// --------------------------------------------------------------- arithmetic

template <class T>
Var<T> neg(const Var<T>& x);
template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b);
template <class T>
Var<T> div(const Var<T>& a, const Var<T>& b);

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  const Shape sa = a.shape(), sb = b.shape();
  return make_op<T>("add", detail::binary(a.value(), b.value(), [](T x, T y) { return x + y; }), {a, b},
                    [sa, sb](const Var<T>&, const Var<T>& g, const std::vector<bool>& needed) {
                      std::vector<Var<T>> r(2);
                      if (needed[0]) r[0] = sum_to(g, sa);
                      if (needed[1]) r[1] = sum_to(g, sb);
                      return r;
                    });
}

template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  const Shape sa = a.shape(), sb = b.shape();
  return make_op<T>("sub", detail::binary(a.value(), b.value(), [](T x, T y) { return x - y; }), {a, b},
                    [sa, sb](const Var<T>&, const Var<T>& g, const std::vector<bool>& needed) {
                      std::vector<Var<T>> r(2);
                      if (needed[0]) r[0] = sum_to(g, sa);
                      if (needed[1]) r[1] = sum_to(neg(g), sb);
                      return r;
                    });
}

template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  return make_op<T>("mul", detail::binary(a.value(), b.value(), [](T x, T y) { return x * y; }), {a, b},
                    [a, b](const Var<T>&, const Var<T>& g, const std::vector<bool>& needed) {
                      std::vector<Var<T>> r(2);
                      if (needed[0]) r[0] = sum_to(mul(g, b), a.shape());
                      if (needed[1]) r[1] = sum_to(mul(g, a), b.shape());
                      return r;
                    });
}

template <class T>
Var<T> div(const Var<T>& a, const Var<T>& b) {
  return make_op<T>("div", detail::binary(a.value(), b.value(), [](T x, T y) { return x / y; }), {a, b},
                    [a, b](const Var<T>& out, const Var<T>& g, const std::vector<bool>& needed) {
                      std::vector<Var<T>> r(2);
                      if (needed[0]) r[0] = sum_to(div(g, b), a.shape());
                      if (needed[1]) r[1] = sum_to(neg(div(mul(g, out), b)), b.shape());
                      return r;
                    });
}

template <class T>
Var<T> scale(const Var<T>& x, T c) {
  return make_op<T>("scale", detail::unary(x.value(), [c](T v) { return v * c; }), {x},
                    [c](const Var<T>&, const Var<T>& g, const std::vector<bool>&) {
                      return std::vector<Var<T>>{scale(g, c)};
                    });
}

template <class T>
Var<T> neg(const Var<T>& x) {
  return scale(x, T(-1));
}

template <class T>
Var<T> add_scalar(const Var<T>& x, T c) {
  return make_op<T>("add_scalar", detail::unary(x.value(), [c](T v) { return v + c; }), {x},
                    [](const Var<T>&, const Var<T>& g, const std::vector<bool>&) { return std::vector<Var<T>>{g}; });
}

/// c - x
template <class T>
Var<T> rsub_scalar(T c, const Var<T>& x) {
  return add_scalar(neg(x), c);
}

template <class T>
Var<T> abs(const Var<T>& x) {
  Tensor<T> sign = detail::unary(x.value(), [](T v) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
  return make_op<T>("abs", detail::unary(x.value(), [](T v) { return std::abs(v); }), {x},
                    [sign = std::move(sign)](const Var<T>&, const Var<T>& g, const std::vector<bool>&) {
                      return std::vector<Var<T>>{mul(g, constant(sign))};
                    });
}

template <class T>
Var<T> square(const Var<T>& x) {
  return make_op<T>("square", detail::unary(x.value(), [](T v) { return v * v; }), {x},
                    [x](const Var<T>&, const Var<T>& g, const std::vector<bool>&) {
                      return std::vector<Var<T>>{mul(g, scale(x, T(2)))};
                    });
}

template <class T>
Var<T> sqrt(const Var<T>& x) {
  return make_op<T>("sqrt", detail::unary(x.value(), [](T v) { return std::sqrt(v); }), {x},
                    [](const Var<T>& out, const Var<T>& g, const std::vector<bool>&) {
                      return std::vector<Var<T>>{div(scale(g, T(0.5)), out)};
                    });
}

/// x^p for a constant exponent (x > 0 where p is not an integer).
template <class T>
Var<T> pow_scalar(const Var<T>& x, T p) {
  return make_op<T>("pow", detail::unary(x.value(), [p](T v) { return std::pow(v, p); }), {x},
                    [x, p](const Var<T>&, const Var<T>& g, const std::vector<bool>&) {
                      return std::vector<Var<T>>{mul(g, scale(pow_scalar(x, p - T(1)), p))};
                    });
}

template <class T>
Var<T> sigmoid(const Var<T>& x) {
  auto f = [](T v) {
    if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
    const T e = std::exp(v);
    return e / (T(1) + e);
  };
  return make_op<T>("sigmoid", detail::unary(x.value(), f), {x},
                    [](const Var<T>& out, const Var<T>& g, const std::vector<bool>&) {
                      return std::vector<Var<T>>{mul(g, mul(out, rsub_scalar(T(1), out)))};
                    });
}

template <class T>
Var<T> tanh(const Var<T>& x) {
  return make_op<T>("tanh", detail::unary(x.value(), [](T v) { return std::tanh(v); }), {x},
                    [](const Var<T>& out, const Var<T>& g, const std::vector<bool>&) {
                      return std::vector<Var<T>>{mul(g, rsub_scalar(T(1), square(out)))};
                    });
}

template <class T>
Var<T> leaky_relu(const Var<T>& x, T slope) {
  Tensor<T> slope_mask = detail::unary(x.value(), [slope](T v) { return v > T(0) ? T(1) : slope; });
  return make_op<T>("leaky_relu", detail::unary(x.value(), [slope](T v) { return v > T(0) ? v : v * slope; }), {x},
                    [m = std::move(slope_mask)](const Var<T>&, const Var<T>& g, const std::vector<bool>&) {
                      return std::vector<Var<T>>{mul(g, constant(m))};
                    });
}

template <class T>
Var<T> relu(const Var<T>& x) {
  return leaky_relu(x, T(0));
}

template <class T>
Var<T> clamp_min(const Var<T>& x, T lo) {
  Tensor<T> pass = detail::unary(x.value(), [lo](T v) { return v > lo ? T(1) : T(0); });
  return make_op<T>("clamp_min", detail::unary(x.value(), [lo](T v) { return v > lo ? v : lo; }), {x},
                    [m = std::move(pass)](const Var<T>&, const Var<T>& g, const std::vector<bool>&) {
                      return std::vector<Var<T>>{mul(g, constant(m))};
                    });
}

/// Elementwise choice by a constant binary mask: mask ? a : b. Values from
/// the unselected operand never leak into the result.
template <class T>
Var<T> select(const Tensor<T>& mask, const Var<T>& a, const Var<T>& b) {
  require_shape(a.shape() == b.shape(), "select operands differ in shape");
  const Tensor<T> m = detail::expand(mask, a.shape());
  Tensor<T> out(a.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = m[i] != T(0) ? a.value()[i] : b.value()[i];
  Tensor<T> inv = detail::unary(m, [](T v) { return v != T(0) ? T(0) : T(1); });
  Tensor<T> sel = detail::unary(m, [](T v) { return v != T(0) ? T(1) : T(0); });
  return make_op<T>("select", std::move(out), {a, b},
                    [sel = std::move(sel), inv = std::move(inv)](const Var<T>&, const Var<T>& g,
                                                                 const std::vector<bool>& needed) {
                      std::vector<Var<T>> r(2);
                      if (needed[0]) r[0] = mul(g, constant(sel));
                      if (needed[1]) r[1] = mul(g, constant(inv));
                      return r;
                    });
}

// --------------------------------------------------------------- reductions

template <class T>
Var<T> sum(const Var<T>& x) {
  return sum_to(x, Shape{1, 1, 1, 1});
}

template <class T>
Var<T> mean(const Var<T>& x) {
  return scale(sum(x), T(1) / static_cast<T>(x.size()));
}

/// Mean over the channel dimension, keeping it as size 1.
template <class T>
Var<T> mean_channels(const Var<T>& x) {
  const Shape s = x.shape();
  return scale(sum_to(x, Shape{s[0], 1, s[2], s[3]}), T(1) / static_cast<T>(s[1]));
}

// ---------------------------------------------------------------- linear

template <class T>
Var<T> bmm(const Var<T>& a, const Var<T>& b, bool trans_a = false, bool trans_b = false) {
  return make_op<T>(
      "bmm", kernels::bmm(a.value(), b.value(), trans_a, trans_b), {a, b},
      [a, b, trans_a, trans_b](const Var<T>&, const Var<T>& g, const std::vector<bool>& needed) {
        std::vector<Var<T>> r(2);
        // C = op(A) op(B)
        if (!trans_a && !trans_b) {
          if (needed[0]) r[0] = bmm(g, b, false, true);
          if (needed[1]) r[1] = bmm(a, g, true, false);
        } else if (trans_a && !trans_b) {
          if (needed[0]) r[0] = bmm(b, g, false, true);
          if (needed[1]) r[1] = bmm(a, g, false, false);
        } else if (!trans_a && trans_b) {
          if (needed[0]) r[0] = bmm(g, b, false, false);
          if (needed[1]) r[1] = bmm(g, a, true, false);
        } else {
          if (needed[0]) r[0] = bmm(b, g, true, true);
          if (needed[1]) r[1] = bmm(g, a, true, true);
        }
        return r;
      });
}

template <class T>
Var<T> conv_input_adjoint(const Var<T>& grad, const Var<T>& w, const ConvGeometry& geo, int in_h, int in_w);
template <class T>
Var<T> conv_weight_adjoint(const Var<T>& x, const Var<T>& grad, const ConvGeometry& geo);

/// 2-D cross-correlation; w is (Cout, Cin, k, k). No bias.
template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const ConvGeometry& geo) {
  const int h = x.dim(2), wd = x.dim(3);
  return make_op<T>("conv2d", kernels::conv2d_forward(x.value(), w.value(), geo), {x, w},
                    [x, w, geo, h, wd](const Var<T>&, const Var<T>& g, const std::vector<bool>& needed) {
                      std::vector<Var<T>> r(2);
                      if (needed[0]) r[0] = conv_input_adjoint(g, w, geo, h, wd);
                      if (needed[1]) r[1] = conv_weight_adjoint(x, g, geo);
                      return r;
                    });
}

/// Adjoint of conv2d in its input. As a layer this is the transposed
/// convolution: `grad` is (N, Cout, h, w), w is (Cout, Cin, k, k), output is
/// (N, Cin, in_h, in_w).
template <class T>
Var<T> conv_input_adjoint(const Var<T>& grad, const Var<T>& w, const ConvGeometry& geo, int in_h, int in_w) {
  return make_op<T>("conv_input_adjoint", kernels::conv2d_input_adjoint(grad.value(), w.value(), geo, in_h, in_w),
                    {grad, w}, [grad, w, geo](const Var<T>&, const Var<T>& h, const std::vector<bool>& needed) {
                      std::vector<Var<T>> r(2);
                      if (needed[0]) r[0] = conv2d(h, w, geo);
                      if (needed[1]) r[1] = conv_weight_adjoint(h, grad, geo);
                      return r;
                    });
}

template <class T>
Var<T> conv_weight_adjoint(const Var<T>& x, const Var<T>& grad, const ConvGeometry& geo) {
  const int h = x.dim(2), wd = x.dim(3);
  return make_op<T>("conv_weight_adjoint", kernels::conv2d_weight_adjoint(x.value(), grad.value(), geo), {x, grad},
                    [x, grad, geo, h, wd](const Var<T>&, const Var<T>& hw, const std::vector<bool>& needed) {
                      std::vector<Var<T>> r(2);
                      if (needed[0]) r[0] = conv_input_adjoint(grad, hw, geo, h, wd);
                      if (needed[1]) r[1] = conv2d(x, hw, geo);
                      return r;
                    });
}

template <class T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& w, const ConvGeometry& geo, int out_h, int out_w) {
  return conv_input_adjoint(x, w, geo, out_h, out_w);
}

// ------------------------------------------------------------------ pooling

template <class T>
Var<T> gather_index(const Var<T>& x, std::shared_ptr<const std::vector<std::int64_t>> idx, const Shape& out_shape);

template <class T>
Var<T> scatter_index(const Var<T>& g, std::shared_ptr<const std::vector<std::int64_t>> idx, const Shape& out_shape) {
  Tensor<T> out(out_shape);
  for (std::int64_t i = 0; i < g.size(); ++i) out[(*idx)[static_cast<std::size_t>(i)]] += g.value()[i];
  const Shape small = g.shape();
  return make_op<T>("scatter_index", std::move(out), {g},
                    [idx, small](const Var<T>&, const Var<T>& h, const std::vector<bool>&) {
                      return std::vector<Var<T>>{gather_index(h, idx, small)};
                    });
}

template <class T>
Var<T> gather_index(const Var<T>& x, std::shared_ptr<const std::vector<std::int64_t>> idx, const Shape& out_shape) {
  Tensor<T> out(out_shape);
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = x.value()[(*idx)[static_cast<std::size_t>(i)]];
  const Shape big = x.shape();
  return make_op<T>("gather_index", std::move(out), {x},
                    [idx, big](const Var<T>&, const Var<T>& g, const std::vector<bool>&) {
                      return std::vector<Var<T>>{scatter_index(g, idx, big)};
                    });
}

/// 2x2 max pooling with stride 2 (odd trailing rows/cols dropped).
template <class T>
Var<T> max_pool2(const Var<T>& x) {
  const Shape s = x.shape();
  const Shape o{s[0], s[1], s[2] / 2, s[3] / 2};
  require_shape(o[2] > 0 && o[3] > 0, "max_pool2 on too small input " + to_string(s));
  auto idx = std::make_shared<std::vector<std::int64_t>>(static_cast<std::size_t>(numel(o)));
  const Tensor<T>& v = x.value();
  std::size_t k = 0;
  for (int n = 0; n < o[0]; ++n)
    for (int c = 0; c < o[1]; ++c)
      for (int y = 0; y < o[2]; ++y)
        for (int xx = 0; xx < o[3]; ++xx) {
          std::int64_t best = v.offset(n, c, 2 * y, 2 * xx);
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              const std::int64_t off = v.offset(n, c, 2 * y + dy, 2 * xx + dx);
              if (v[off] > v[best]) best = off;
            }
          (*idx)[k++] = best;
        }
  return gather_index<T>(x, std::move(idx), o);
}

// ------------------------------------------------------------------ helpers

template <class T>
Var<T> pixel_norm(const Var<T>& x, T eps = T(1e-8)) {
  return mul(x, pow_scalar(add_scalar(mean_channels(square(x)), eps), T(-0.5)));
}

}  // namespace fegan::ag
