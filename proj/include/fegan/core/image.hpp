#pragma once

// Image-domain value types. Images are (1, C, H, W) float tensors; RGB images
// live in [-1, 1], binary maps hold exactly 0 or 1.

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "fegan/core/tensor.hpp"

namespace fegan {

using ImageTensor = Tensor<float>;

inline ImageTensor make_image(int height, int width, int channels = 3, float fill = 0.0f) {
  return ImageTensor(Shape{1, channels, height, width}, fill);
}

inline int image_height(const ImageTensor& t) { return t.dim(2); }
inline int image_width(const ImageTensor& t) { return t.dim(3); }

/// H x W map whose elements are exactly 0 or 1.
template <class Tag>
class BinaryMap {
 public:
  BinaryMap() = default;
  BinaryMap(int height, int width) : data_(Shape{1, 1, height, width}) {}

  static BinaryMap zeros(int height, int width) { return BinaryMap(height, width); }
  static BinaryMap ones(int height, int width) {
    BinaryMap m(height, width);
    std::fill(m.data_.values().begin(), m.data_.values().end(), 1.0f);
    return m;
  }

  /// Validating conversion from a (1, 1, H, W) tensor; throws on any value
  /// other than 0 or 1.
  static BinaryMap from_tensor(const Tensor<float>& t) {
    require_shape(t.dim(0) == 1 && t.dim(1) == 1, "binary map must be (1,1,H,W), got " + to_string(t.shape()));
    for (float v : t.values())
      if (v != 0.0f && v != 1.0f) throw std::invalid_argument("binary map contains a value other than 0 or 1");
    BinaryMap m;
    m.data_ = t;
    return m;
  }

  /// Thresholding conversion: v > threshold -> 1.
  static BinaryMap threshold(const Tensor<float>& t, float threshold) {
    BinaryMap m(t.dim(2), t.dim(3));
    for (std::int64_t i = 0; i < m.data_.size(); ++i) m.data_[i] = t[i] > threshold ? 1.0f : 0.0f;
    return m;
  }

  int height() const { return data_.dim(2); }
  int width() const { return data_.dim(3); }
  bool contains(int y, int x) const { return y >= 0 && y < height() && x >= 0 && x < width(); }

  bool at(int y, int x) const { return data_(0, 0, y, x) != 0.0f; }
  void set(int y, int x, bool on = true) { data_(0, 0, y, x) = on ? 1.0f : 0.0f; }

  const Tensor<float>& tensor() const { return data_; }

  std::int64_t count() const {
    return std::count(data_.values().begin(), data_.values().end(), 1.0f);
  }
  double coverage() const { return data_.empty() ? 0.0 : static_cast<double>(count()) / data_.size(); }

  BinaryMap& operator|=(const BinaryMap& o) {
    require_shape(o.data_.shape() == data_.shape(), "binary map union size mismatch");
    for (std::int64_t i = 0; i < data_.size(); ++i) data_[i] = std::max(data_[i], o.data_[i]);
    return *this;
  }
  BinaryMap& operator&=(const BinaryMap& o) {
    require_shape(o.data_.shape() == data_.shape(), "binary map intersection size mismatch");
    for (std::int64_t i = 0; i < data_.size(); ++i) data_[i] = std::min(data_[i], o.data_[i]);
    return *this;
  }
  friend BinaryMap operator|(BinaryMap a, const BinaryMap& b) { return a |= b; }
  friend BinaryMap operator&(BinaryMap a, const BinaryMap& b) { return a &= b; }
  friend bool operator==(const BinaryMap& a, const BinaryMap& b) { return a.data_ == b.data_; }

  /// True when every set pixel of this map is also set in `o`.
  bool subset_of(const BinaryMap& o) const {
    for (std::int64_t i = 0; i < data_.size(); ++i)
      if (data_[i] > o.data_[i]) return false;
    return true;
  }

 private:
  Tensor<float> data_;
};

struct MaskTag {};
struct SketchTag {};

/// 1 marks the erased / editable region.
using MaskMap = BinaryMap<MaskTag>;
using SketchMap = BinaryMap<SketchTag>;

/// RGB stroke colors in [-1, 1] plus the support they are defined on; values
/// are exactly zero off the support.
class ColorMap {
 public:
  ColorMap() = default;
  ColorMap(ImageTensor rgb, MaskMap support) : rgb_(std::move(rgb)), support_(std::move(support)) {
    require_shape(rgb_.dim(0) == 1 && rgb_.dim(1) == 3 && rgb_.dim(2) == support_.height() &&
                      rgb_.dim(3) == support_.width(),
                  "color map and support differ in size");
    apply_support();
  }

  static ColorMap empty(int height, int width) { return ColorMap(make_image(height, width), MaskMap(height, width)); }

  int height() const { return support_.height(); }
  int width() const { return support_.width(); }
  const ImageTensor& rgb() const { return rgb_; }
  const MaskMap& support() const { return support_; }

  /// Restrict strokes to `region` (support becomes support AND region).
  ColorMap masked(const MaskMap& region) const { return ColorMap(rgb_, support_ & region); }

 private:
  void apply_support() {
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < height(); ++y)
        for (int x = 0; x < width(); ++x)
          if (!support_.at(y, x)) rgb_(0, c, y, x) = 0.0f;
  }

  ImageTensor rgb_;
  MaskMap support_;
};

/// Luma of an RGB image in [-1, 1], returned on [0, 1] as (1, 1, H, W).
inline Tensor<float> luminance01(const ImageTensor& rgb) {
  Tensor<float> g(Shape{1, 1, rgb.dim(2), rgb.dim(3)});
  for (int y = 0; y < rgb.dim(2); ++y)
    for (int x = 0; x < rgb.dim(3); ++x) {
      const float v = 0.299f * rgb(0, 0, y, x) + 0.587f * rgb(0, 1, y, x) + 0.114f * rgb(0, 2, y, x);
      g(0, 0, y, x) = std::clamp((v + 1.0f) * 0.5f, 0.0f, 1.0f);
    }
  return g;
}

/// Bilinear resampling (pixel-center aligned) to height x width.
inline ImageTensor resize_bilinear(const ImageTensor& src, int height, int width) {
  const int sh = src.dim(2), sw = src.dim(3), ch = src.dim(1);
  if (sh == height && sw == width) return src;
  ImageTensor out(Shape{src.dim(0), ch, height, width});
  const float sy = static_cast<float>(sh) / height, sx = static_cast<float>(sw) / width;
  for (int n = 0; n < src.dim(0); ++n)
    for (int y = 0; y < height; ++y) {
      const float fy = std::clamp((y + 0.5f) * sy - 0.5f, 0.0f, static_cast<float>(sh - 1));
      const int y0 = static_cast<int>(fy), y1 = std::min(y0 + 1, sh - 1);
      const float ty = fy - y0;
      for (int x = 0; x < width; ++x) {
        const float fx = std::clamp((x + 0.5f) * sx - 0.5f, 0.0f, static_cast<float>(sw - 1));
        const int x0 = static_cast<int>(fx), x1 = std::min(x0 + 1, sw - 1);
        const float tx = fx - x0;
        for (int c = 0; c < ch; ++c) {
          const float a = src(n, c, y0, x0) * (1 - tx) + src(n, c, y0, x1) * tx;
          const float b = src(n, c, y1, x0) * (1 - tx) + src(n, c, y1, x1) * tx;
          out(n, c, y, x) = a * (1 - ty) + b * ty;
        }
      }
    }
  return out;
}

/// Reflect-pad (without edge repeat) on the bottom/right to height x width.
inline ImageTensor reflect_pad(const ImageTensor& src, int height, int width) {
  const int sh = src.dim(2), sw = src.dim(3);
  require_shape(height >= sh && width >= sw, "reflect_pad target smaller than source");
  auto reflect = [](int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i %= period;
    return i < n ? i : period - i;
  };
  ImageTensor out(Shape{src.dim(0), src.dim(1), height, width});
  for (int n = 0; n < src.dim(0); ++n)
    for (int c = 0; c < src.dim(1); ++c)
      for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) out(n, c, y, x) = src(n, c, reflect(y, sh), reflect(x, sw));
  return out;
}

inline ImageTensor crop(const ImageTensor& src, int height, int width) {
  require_shape(height <= src.dim(2) && width <= src.dim(3), "crop larger than source");
  ImageTensor out(Shape{src.dim(0), src.dim(1), height, width});
  for (int n = 0; n < src.dim(0); ++n)
    for (int c = 0; c < src.dim(1); ++c)
      for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) out(n, c, y, x) = src(n, c, y, x);
  return out;
}

}  // namespace fegan
