#pragma once

// Spectrally normalized patch discriminator on concat(image, sketch, color,
// mask). Scores are raw (no squashing).

#include <string>
#include <vector>

#include "fegan/core/config.hpp"
#include "fegan/networks/layers.hpp"

namespace fegan::nn {

struct DiscriminatorConfig {
  int input_channels = 8;
  int base_width = 64;
  int width_cap = 512;
  int layers = 6;
  double leaky_slope = 0.2;
  int power_iterations = 1;

  static DiscriminatorConfig full() { return {}; }
  static DiscriminatorConfig toy() { return {8, 16, 64, 4, 0.2, 1}; }
  static DiscriminatorConfig tiny() { return {8, 4, 8, 2, 0.2, 1}; }

  static DiscriminatorConfig from_config(const KeyValueConfig& cfg, DiscriminatorConfig base = toy()) {
    base.base_width = cfg.get("discriminator.baseWidth", base.base_width);
    base.width_cap = cfg.get("discriminator.widthCap", base.width_cap);
    base.layers = cfg.get("discriminator.layers", base.layers);
    base.leaky_slope = cfg.get("discriminator.leakySlope", base.leaky_slope);
    base.power_iterations = cfg.get("discriminator.powerIterations", base.power_iterations);
    return base;
  }

  int width(int layer) const {
    return layer == layers ? 1 : std::min(width_cap, base_width << (layer - 1));
  }

  void validate() const {
    if (input_channels != 8) throw std::invalid_argument("discriminator input is 3 + 1 + 3 + 1 channels");
    if (layers < 1 || base_width < 1 || width_cap < base_width) throw std::invalid_argument("invalid discriminator shape");
    if (power_iterations < 1) throw std::invalid_argument("power iterations must be >= 1");
  }
};

template <class T>
class Discriminator {
 public:
  explicit Discriminator(DiscriminatorConfig cfg, std::uint64_t seed = 1) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    for (int l = 1; l <= cfg_.layers; ++l) {
      const int in = l == 1 ? cfg_.input_channels : cfg_.width(l - 1), out = cfg_.width(l);
      const std::string name = "dis.conv" + std::to_string(l);
      weights_.push_back(params_.add(name + ".w", he_normal<T>(rng, Shape{out, in, 3, 3}, in * 9)));
      biases_.push_back(params_.add(name + ".b", Tensor<T>(Shape{1, out, 1, 1})));
      spectral_.push_back(SpectralState<T>::random(rng, out, in * 9));
    }
  }

  const DiscriminatorConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }
  std::vector<SpectralState<T>>& spectral_state() { return spectral_; }
  const std::vector<SpectralState<T>>& spectral_state() const { return spectral_; }
  std::string layer_name(std::size_t i) const { return "dis.conv" + std::to_string(i + 1); }

  /// One training-mode update of every layer's power iteration.
  void update_spectral_state() {
    for (std::size_t i = 0; i < weights_.size(); ++i)
      power_iterate(weights_[i].value(), spectral_[i], cfg_.power_iterations);
  }

  /// Normalized weight of layer i under the current state.
  Tensor<T> normalized_weight(std::size_t i) const {
    ag::NoGrad off;
    return spectral_weight(weights_[i], spectral_[i]).value();
  }

  /// Training-mode pass: advances every power iteration once, then scores.
  Var<T> forward_train(const Var<T>& image, const Var<T>& conditioning) {
    update_spectral_state();
    return forward(image, conditioning);
  }

  /// Eval-mode pass, read-only in the spectral state.
  Var<T> forward(const Var<T>& image, const Var<T>& conditioning) const {
    require_shape(image.dim(1) == 3 && conditioning.dim(1) == cfg_.input_channels - 3,
                  "discriminator expects a 3-channel image and 5 conditioning channels");
    require_shape(image.dim(0) == conditioning.dim(0) && image.dim(2) == conditioning.dim(2) &&
                      image.dim(3) == conditioning.dim(3),
                  "discriminator conditioning " + to_string(conditioning.shape()) + " does not match image " +
                      to_string(image.shape()));
    Var<T> h = ag::concat<T>({image, conditioning}, 1);
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      h = ag::add(ag::conv2d(h, spectral_weight(weights_[i], spectral_[i]), ConvGeometry{3, 2, 1, 1}), biases_[i]);
      if (i + 1 < weights_.size()) h = ag::leaky_relu(h, static_cast<T>(cfg_.leaky_slope));
    }
    return h;
  }

 private:
  DiscriminatorConfig cfg_;
  ParamStore<T> params_;
  std::vector<Var<T>> weights_, biases_;
  std::vector<SpectralState<T>> spectral_;
};

/// Sketch, color and mask planes of an edit batch, i.e. the discriminator's
/// conditioning channels.
template <class T>
Tensor<T> conditioning_from_batch(const Tensor<T>& batch9) {
  require_shape(batch9.dim(1) == 9, "conditioning needs a 9-channel batch");
  return batch9.channels(3, 5);
}

}  // namespace fegan::nn
