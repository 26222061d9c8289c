#pragma once

// Gated-convolution U-net generator.
//
//   enc1..encD   3x3 stride-2 gated convs (no normalization on enc1)
//   dil1..dilR   3x3 dilated gated convs at the bottleneck
//   decD..dec1   4x4 stride-2 transposed gated convs on concat(d, enc_k);
//                dec1 is the tanh RGB output (no normalization)

#include <stdexcept>
#include <string>
#include <vector>

#include "fegan/core/config.hpp"
#include "fegan/networks/layers.hpp"

namespace fegan::nn {

struct GeneratorConfig {
  int input_channels = 9;
  int base_width = 64;
  int width_cap = 512;
  int depth = 7;
  std::vector<int> dilation_rates = {2, 4};
  double leaky_slope = 0.2;
  int output_channels = 3;

  static GeneratorConfig full() { return {}; }
  /// 64x64 training scale.
  static GeneratorConfig toy() { return {9, 16, 64, 4, {2, 2}, 0.2, 3}; }
  /// 16x16 scale for finite-difference checks.
  static GeneratorConfig tiny() { return {9, 4, 8, 2, {2}, 0.2, 3}; }

  static GeneratorConfig from_config(const KeyValueConfig& cfg, GeneratorConfig base = toy()) {
    base.base_width = cfg.get("generator.baseWidth", base.base_width);
    base.width_cap = cfg.get("generator.widthCap", base.width_cap);
    base.depth = cfg.get("generator.depth", base.depth);
    base.dilation_rates = cfg.get_list("generator.dilationRates", base.dilation_rates);
    base.leaky_slope = cfg.get("generator.leakySlope", base.leaky_slope);
    return base;
  }

  /// Channels after encoder level k (1-based).
  int width(int level) const { return std::min(width_cap, base_width << (level - 1)); }
  int conv_layer_count() const { return 2 * depth + static_cast<int>(dilation_rates.size()); }
  int size_multiple() const { return 1 << depth; }

  void validate() const {
    if (input_channels != 9 || output_channels != 3) throw std::invalid_argument("generator maps 9 channels to 3");
    if (depth < 1 || depth > 12) throw std::invalid_argument("generator depth must be in [1, 12]");
    if (base_width < 1 || width_cap < base_width) throw std::invalid_argument("invalid generator widths");
    for (int r : dilation_rates)
      if (r < 1) throw std::invalid_argument("dilation rates must be >= 1");
    if (!(leaky_slope >= 0 && leaky_slope < 1)) throw std::invalid_argument("leaky slope must be in [0, 1)");
  }
};

/// Spatial sizes seen by the skip connections, for checking U-net symmetry.
struct UnetTrace {
  std::vector<Shape> encoder;        // enc1..encD outputs
  std::vector<Shape> decoder_input;  // inputs of decD..dec1 before concatenation
};

template <class T>
class Generator {
 public:
  explicit Generator(GeneratorConfig cfg, std::uint64_t seed = 0) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng rng(seed);
    for (int k = 1; k <= cfg_.depth; ++k) {
      const int in = k == 1 ? cfg_.input_channels : cfg_.width(k - 1);
      enc_.push_back(make_gated_conv(params_, rng, "gen.enc" + std::to_string(k), in, cfg_.width(k), false));
    }
    for (std::size_t i = 0; i < cfg_.dilation_rates.size(); ++i)
      dil_.push_back(make_gated_conv(params_, rng, "gen.dil" + std::to_string(i + 1), cfg_.width(cfg_.depth),
                                     cfg_.width(cfg_.depth), false));
    for (int k = cfg_.depth; k >= 1; --k) {
      const int in = 2 * cfg_.width(k);
      const int out = k == 1 ? cfg_.output_channels : cfg_.width(k - 1);
      dec_.push_back(make_gated_conv(params_, rng, "gen.dec" + std::to_string(k), in, out, true));
    }
  }

  const GeneratorConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }

  /// (N, 9, H, W) -> (N, 3, H, W) in (-1, 1).
  Var<T> forward(const Var<T>& x, UnetTrace* trace = nullptr) const {
    require_shape(x.dim(1) == cfg_.input_channels,
                  "generator expects 9 input channels, got " + std::to_string(x.dim(1)));
    const int m = cfg_.size_multiple();
    if (x.dim(2) % m != 0 || x.dim(3) % m != 0)
      throw std::invalid_argument("generator input " + std::to_string(x.dim(2)) + "x" + std::to_string(x.dim(3)) +
                                  " is not divisible by " + std::to_string(m));
    const double slope = cfg_.leaky_slope;
    std::vector<Var<T>> skips;
    Var<T> h = x;
    for (int k = 0; k < cfg_.depth; ++k) {
      h = gated_conv(h, enc_[static_cast<std::size_t>(k)], {2, 1, false, k != 0, Activation::kLeakyRelu, slope});
      skips.push_back(h);
      if (trace) trace->encoder.push_back(h.shape());
    }
    for (std::size_t i = 0; i < dil_.size(); ++i)
      h = gated_conv(h, dil_[i], {1, cfg_.dilation_rates[i], false, true, Activation::kLeakyRelu, slope});
    for (int j = 0; j < cfg_.depth; ++j) {
      const int level = cfg_.depth - j;
      if (trace) trace->decoder_input.push_back(h.shape());
      const bool last = level == 1;
      h = gated_conv(ag::concat<T>({h, skips[static_cast<std::size_t>(level - 1)]}, 1), dec_[static_cast<std::size_t>(j)],
                     {2, 1, true, !last, last ? Activation::kTanh : Activation::kLeakyRelu, slope});
    }
    return h;
  }

  Tensor<T> infer(const Tensor<T>& x) const {
    ag::NoGrad off;
    return forward(ag::constant(x)).value();
  }

 private:
  GeneratorConfig cfg_;
  ParamStore<T> params_;
  std::vector<GatedConvParams<T>> enc_, dil_, dec_;
};

/// I_comp = M * I_gen + (1 - M) * I_gt, selected elementwise so pixels outside
/// the mask are ground truth bit for bit. `mask` is (N, 1, H, W).
template <class T>
Var<T> compose(const Var<T>& gen, const Tensor<T>& gt, const Tensor<T>& mask) {
  require_shape(gen.shape() == gt.shape(), "compose: generated and ground-truth images differ in shape");
  require_shape(mask.dim(0) == gt.dim(0) && mask.dim(1) == 1 && mask.dim(2) == gt.dim(2) && mask.dim(3) == gt.dim(3),
                "compose: mask must be (N,1,H,W) matching the images");
  return ag::select(mask, gen, ag::constant(gt));
}

template <class T>
Tensor<T> compose(const Tensor<T>& gen, const Tensor<T>& gt, const Tensor<T>& mask) {
  ag::NoGrad off;
  return compose(ag::constant(gen), gt, mask).value();
}

}  // namespace fegan::nn
