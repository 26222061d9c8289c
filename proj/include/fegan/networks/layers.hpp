#pragma once

// Gated convolution and spectral normalization.

#include <cmath>
#include <stdexcept>

#include "fegan/core/ops.hpp"
#include "fegan/networks/params.hpp"

namespace fegan::nn {

enum class Activation { kLeakyRelu, kTanh, kIdentity };

template <class T>
struct GatedConvParams {
  Var<T> feature_w;
  Var<T> feature_b;
  Var<T> gate_w;
  Var<T> gate_b;
};

struct GatedConvOptions {
  int stride = 1;
  int dilation = 1;
  bool transposed = false;  // 4x4 stride-2 upsampling when set
  bool normalize = true;    // pixelwise feature normalization on the feature path
  Activation activation = Activation::kLeakyRelu;
  double slope = 0.2;
};

/// Registers `<prefix>.feature.{w,b}` and `<prefix>.gate.{w,b}`. Regular
/// layers use (out, in, 3, 3) weights; transposed layers (in, out, 4, 4).
template <class T>
GatedConvParams<T> make_gated_conv(ParamStore<T>& store, Rng& rng, const std::string& prefix, int in, int out,
                                   bool transposed) {
  const int k = transposed ? 4 : 3;
  const Shape ws = transposed ? Shape{in, out, k, k} : Shape{out, in, k, k};
  const int fan_in = transposed ? in * k * k / 4 : in * k * k;
  GatedConvParams<T> p;
  p.feature_w = store.add(prefix + ".feature.w", he_normal<T>(rng, ws, fan_in));
  p.feature_b = store.add(prefix + ".feature.b", Tensor<T>(Shape{1, out, 1, 1}));
  p.gate_w = store.add(prefix + ".gate.w", he_normal<T>(rng, ws, fan_in));
  p.gate_b = store.add(prefix + ".gate.b", Tensor<T>(Shape{1, out, 1, 1}));
  return p;
}

template <class T>
struct GatedConvParts {
  Var<T> feature;  // after normalization and activation
  Var<T> gate;     // sigmoid output
};

template <class T>
Var<T> activate(const Var<T>& x, Activation a, double slope) {
  switch (a) {
    case Activation::kLeakyRelu: return ag::leaky_relu(x, static_cast<T>(slope));
    case Activation::kTanh: return ag::tanh(x);
    case Activation::kIdentity: break;
  }
  return x;
}

/// Both convolutions share one im2col pass by stacking their weights.
template <class T>
GatedConvParts<T> gated_conv_parts(const Var<T>& x, const GatedConvParams<T>& p, const GatedConvOptions& o) {
  if (o.dilation < 1) throw std::invalid_argument("gated_conv: dilation must be >= 1");
  const int out = p.feature_b.dim(1);
  Var<T> y;
  if (o.transposed) {
    require_shape(x.dim(1) == p.feature_w.dim(0), "gated_conv: input has " + std::to_string(x.dim(1)) +
                                                      " channels, layer expects " + std::to_string(p.feature_w.dim(0)));
    const ConvGeometry geo{4, 2, 1, 1};
    y = ag::conv_transpose2d(x, ag::concat<T>({p.feature_w, p.gate_w}, 1), geo, 2 * x.dim(2), 2 * x.dim(3));
  } else {
    require_shape(x.dim(1) == p.feature_w.dim(1), "gated_conv: input has " + std::to_string(x.dim(1)) +
                                                      " channels, layer expects " + std::to_string(p.feature_w.dim(1)));
    const ConvGeometry geo{3, o.stride, o.dilation, o.dilation};
    y = ag::conv2d(x, ag::concat<T>({p.feature_w, p.gate_w}, 0), geo);
  }
  y = ag::add(y, ag::concat<T>({p.feature_b, p.gate_b}, 1));
  Var<T> f = ag::narrow(y, 1, 0, out);
  if (o.normalize) f = ag::pixel_norm(f);
  return {activate(f, o.activation, o.slope), ag::sigmoid(ag::narrow(y, 1, out, out))};
}

/// activation(norm(feature(x))) * sigmoid(gate(x)).
template <class T>
Var<T> gated_conv(const Var<T>& x, const GatedConvParams<T>& p, const GatedConvOptions& o) {
  auto parts = gated_conv_parts(x, p, o);
  return ag::mul(parts.feature, parts.gate);
}

// ------------------------------------------------------ spectral normalization

/// Power-iteration vectors for a weight viewed as a (rows, cols) matrix,
/// rows = output channels.
template <class T>
struct SpectralState {
  Tensor<T> u;  // (1, 1, rows, 1), unit norm
  Tensor<T> v;  // (1, 1, cols, 1), unit norm
  std::uint64_t updates = 0;

  static SpectralState random(Rng& rng, int rows, int cols) {
    SpectralState s{Tensor<T>(Shape{1, 1, rows, 1}), Tensor<T>(Shape{1, 1, cols, 1}), 0};
    for (auto& x : s.u.values()) x = static_cast<T>(rng.normal());
    for (auto& x : s.v.values()) x = static_cast<T>(rng.normal());
    normalize(s.u);
    normalize(s.v);
    return s;
  }

  static T norm(const Tensor<T>& t) {
    double s = 0;
    for (T x : t.values()) s += static_cast<double>(x) * x;
    return static_cast<T>(std::sqrt(s));
  }
  static bool normalize(Tensor<T>& t) {
    const T n = norm(t);
    if (!(n > T(0))) return false;
    for (auto& x : t.values()) x /= n;
    return true;
  }
};

template <class T>
struct SpectralResult {
  Tensor<T> weight;
  T sigma = 0;
  bool degenerate = false;  // zero matrix; weight returned unchanged
};

namespace detail {
template <class T>
Tensor<T> as_matrix(const Tensor<T>& w) {
  const int rows = w.dim(0);
  return w.reshaped(Shape{1, 1, rows, static_cast<int>(w.size() / rows)});
}
}  // namespace detail

/// Advances the power iteration `iterations` times (v <- W^T u / |.|,
/// u <- W v / |.|). Returns sigma = u^T W v for the updated vectors. A zero
/// matrix leaves the state untouched and reports sigma 0.
template <class T>
T power_iterate(const Tensor<T>& weight, SpectralState<T>& s, int iterations) {
  if (iterations < 1) throw std::invalid_argument("spectral normalization needs at least one iteration");
  const Tensor<T> W = detail::as_matrix(weight);
  require_shape(s.u.dim(2) == W.dim(2) && s.v.dim(2) == W.dim(3), "spectral state does not match the weight");
  for (int i = 0; i < iterations; ++i) {
    Tensor<T> v = kernels::bmm(W, s.u, true, false);
    if (!SpectralState<T>::normalize(v)) return T(0);
    Tensor<T> u = kernels::bmm(W, v, false, false);
    if (!SpectralState<T>::normalize(u)) return T(0);
    s.u = std::move(u);
    s.v = std::move(v);
  }
  ++s.updates;
  return kernels::bmm(kernels::bmm(s.u, W, true, false), s.v, false, false).item();
}

/// Weight divided by its power-iteration estimate of the largest singular
/// value; the state is advanced in place.
template <class T>
SpectralResult<T> spectral_normalize(const Tensor<T>& weight, SpectralState<T>& s, int iterations) {
  const T sigma = power_iterate(weight, s, iterations);
  if (!(sigma > T(0))) return {weight, T(0), true};
  Tensor<T> out = weight;
  for (auto& x : out.values()) x /= sigma;
  return {std::move(out), sigma, false};
}

/// Differentiable W / (u^T W v) for fixed u, v. A zero estimate (zero
/// matrix) returns the weight unchanged.
template <class T>
Var<T> spectral_weight(const Var<T>& w, const SpectralState<T>& s) {
  const int rows = w.dim(0), cols = static_cast<int>(w.size() / rows);
  const Var<T> W = ag::reshape(w, Shape{1, 1, rows, cols});
  const Var<T> sigma = ag::bmm(ag::bmm(ag::constant(s.u), W, true, false), ag::constant(s.v));
  if (!(sigma.item() > T(0))) return w;
  return ag::div(w, sigma);
}

}  // namespace fegan::nn
