#pragma once

// Frozen feature pyramids for the perceptual and style losses. Each returns
// the pool1, pool2 and pool3 activations.

#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "fegan/core/archive.hpp"
#include "fegan/core/ops.hpp"
#include "fegan/networks/params.hpp"

namespace fegan::loss {

using ag::Var;

/// Raised for any failure inside a feature extractor, so callers can tell it
/// apart from errors in the loss arithmetic.
class FeatureExtractorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <class T>
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual std::vector<Var<T>> extract(const Var<T>& image) const = 0;
  virtual std::string name() const = 0;

  /// extract() with failures rethrown as FeatureExtractorError.
  std::vector<Var<T>> features(const Var<T>& image) const {
    try {
      return extract(image);
    } catch (const FeatureExtractorError&) {
      throw;
    } catch (const std::exception& e) {
      throw FeatureExtractorError(name() + " feature extraction failed: " + e.what());
    }
  }
};

/// The image itself as a single feature level.
template <class T>
class IdentityExtractor final : public FeatureExtractor<T> {
 public:
  std::vector<Var<T>> extract(const Var<T>& image) const override { return {image}; }
  std::string name() const override { return "identity"; }
};

/// Stage-wise conv3x3 + ReLU stacks, each followed by 2x2 max pooling.
template <class T>
class ConvPoolPyramid : public FeatureExtractor<T> {
 public:
  struct Conv {
    Var<T> w;
    Var<T> b;
  };

  std::vector<Var<T>> extract(const Var<T>& image) const override {
    require_shape(image.dim(1) == 3, "feature extractor expects RGB input");
    Var<T> h = preprocess(image);
    std::vector<Var<T>> out;
    for (const auto& stage : stages_) {
      for (const auto& c : stage) h = ag::relu(ag::add(ag::conv2d(h, c.w, ConvGeometry{3, 1, 1, 1}), c.b));
      if (h.dim(2) < 2 || h.dim(3) < 2) throw FeatureExtractorError("image too small for " + this->name());
      h = ag::max_pool2(h);
      out.push_back(h);
    }
    return out;
  }

 protected:
  using ConvGeometry = kernels::ConvGeometry;
  virtual Var<T> preprocess(const Var<T>& image) const { return image; }
  std::vector<std::vector<Conv>> stages_;
};

/// Fixed-seed random weights; one conv per stage with widths `widths`.
template <class T>
class RandomPyramidExtractor final : public ConvPoolPyramid<T> {
 public:
  explicit RandomPyramidExtractor(std::uint64_t seed = 7, std::vector<int> widths = {16, 32, 64}) {
    Rng rng(seed);
    int in = 3;
    for (int w : widths) {
      auto weight = ag::constant(nn::he_normal<T>(rng, Shape{w, in, 3, 3}, in * 9));
      this->stages_.push_back({{weight, ag::constant(Tensor<T>(Shape{1, w, 1, 1}))}});
      in = w;
    }
  }
  std::string name() const override { return "random-pyramid"; }
};

/// VGG-16 up to pool3 from a tensor archive holding conv1_1 ... conv3_3 as
/// `<layer>.w` (out, in, 3, 3) and `<layer>.b` (1, out, 1, 1). Inputs in
/// [-1, 1] are mapped to [0, 1] and standardized with the ImageNet
/// statistics.
template <class T>
class Vgg16Extractor final : public ConvPoolPyramid<T> {
 public:
  explicit Vgg16Extractor(const std::filesystem::path& weights) {
    TensorArchive a;
    try {
      a = TensorArchive::load(weights);
    } catch (const std::exception& e) {
      throw FeatureExtractorError("cannot load VGG-16 weights: " + std::string(e.what()));
    }
    const std::vector<std::vector<std::string>> layout = {
        {"conv1_1", "conv1_2"}, {"conv2_1", "conv2_2"}, {"conv3_1", "conv3_2", "conv3_3"}};
    int in = 3;
    for (const auto& stage : layout) {
      std::vector<typename ConvPoolPyramid<T>::Conv> convs;
      for (const auto& l : stage) {
        if (!a.has(l + ".w") || !a.has(l + ".b")) throw FeatureExtractorError("VGG-16 weights lack " + l);
        const Tensor<float>& w = a.get(l + ".w");
        if (w.dim(1) != in || w.dim(2) != 3 || w.dim(3) != 3) throw FeatureExtractorError("unexpected shape for " + l);
        convs.push_back({ag::constant(w.template cast<T>()),
                         ag::constant(a.get(l + ".b").template cast<T>().reshaped(Shape{1, w.dim(0), 1, 1}))});
        in = w.dim(0);
      }
      this->stages_.push_back(std::move(convs));
    }
    Tensor<T> mean(Shape{1, 3, 1, 1}), inv_std(Shape{1, 3, 1, 1});
    const double m[3] = {0.485, 0.456, 0.406}, s[3] = {0.229, 0.224, 0.225};
    for (int c = 0; c < 3; ++c) mean[c] = static_cast<T>(m[c]), inv_std[c] = static_cast<T>(1.0 / s[c]);
    mean_ = ag::constant(mean);
    inv_std_ = ag::constant(inv_std);
  }
  std::string name() const override { return "vgg16"; }

 protected:
  Var<T> preprocess(const Var<T>& image) const override {
    return ag::mul(ag::sub(ag::scale(ag::add_scalar(image, T(1)), T(0.5)), mean_), inv_std_);
  }

 private:
  Var<T> mean_, inv_std_;
};

/// "identity", "random" or "vgg16:<path>".
template <class T>
std::shared_ptr<const FeatureExtractor<T>> make_feature_extractor(const std::string& kind, std::uint64_t seed = 7) {
  if (kind == "identity") return std::make_shared<IdentityExtractor<T>>();
  if (kind == "random") return std::make_shared<RandomPyramidExtractor<T>>(seed);
  if (kind.starts_with("vgg16:")) return std::make_shared<Vgg16Extractor<T>>(kind.substr(6));
  throw std::invalid_argument("unknown feature extractor '" + kind + "'");
}

}  // namespace fegan::loss
