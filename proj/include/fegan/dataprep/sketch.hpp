#pragma once

// Sketch domain: binary edge maps of the structure inside an image.

#include <cmath>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "fegan/dataprep/filters.hpp"

namespace fegan::dataprep {

/// Maps a [0, 1] single-channel image to a binary edge map. Implementations
/// must be safe for concurrent const use.
class EdgeBackend {
 public:
  virtual ~EdgeBackend() = default;
  virtual SketchMap detect(const Tensor<float>& gray01) const = 0;
};

struct CannyParams {
  double sigma = 1.0;
  double low = 0.1;
  double high = 0.2;
};

/// Gradient magnitude with non-maximum suppression and hysteresis.
class CannyEdgeBackend final : public EdgeBackend {
 public:
  explicit CannyEdgeBackend(CannyParams p = {}) : p_(p) {
    if (!(p_.low >= 0 && p_.low <= p_.high)) throw std::invalid_argument("edge thresholds need 0 <= low <= high");
  }

  SketchMap detect(const Tensor<float>& gray01) const override {
    const int H = gray01.dim(2), W = gray01.dim(3);
    const Gradient g = sobel(gaussian_blur(gray01, p_.sigma));
    std::vector<float> mag(static_cast<std::size_t>(H) * W);
    for (int i = 0; i < H * W; ++i) mag[static_cast<std::size_t>(i)] = std::hypot(g.gx[i], g.gy[i]);
    auto m = [&](int y, int x) {
      if (y < 0 || y >= H || x < 0 || x >= W) return 0.0f;
      return mag[static_cast<std::size_t>(y) * W + x];
    };

    // Thin: keep a pixel when it is >= its neighbour against the gradient
    // direction and > the one along it, so a plateau of two keeps one pixel.
    std::vector<float> thin(mag.size(), 0.0f);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const float v = m(y, x);
        if (v <= 0) continue;
        double a = std::atan2(g.gy(0, 0, y, x), g.gx(0, 0, y, x)) * 180.0 / std::numbers::pi;
        if (a < 0) a += 180.0;
        int dx, dy;
        if (a < 22.5 || a >= 157.5) dx = 1, dy = 0;
        else if (a < 67.5) dx = 1, dy = 1;
        else if (a < 112.5) dx = 0, dy = 1;
        else dx = -1, dy = 1;
        if (v >= m(y - dy, x - dx) && v > m(y + dy, x + dx)) thin[static_cast<std::size_t>(y) * W + x] = v;
      }

    SketchMap out(H, W);
    std::vector<int> stack;
    for (int i = 0; i < H * W; ++i)
      if (thin[static_cast<std::size_t>(i)] >= p_.high && !out.at(i / W, i % W)) {
        out.set(i / W, i % W);
        stack.push_back(i);
        while (!stack.empty()) {
          const int q = stack.back();
          stack.pop_back();
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              const int yy = q / W + dy, xx = q % W + dx;
              if (yy < 0 || yy >= H || xx < 0 || xx >= W || out.at(yy, xx)) continue;
              if (thin[static_cast<std::size_t>(yy) * W + xx] >= p_.low) {
                out.set(yy, xx);
                stack.push_back(yy * W + xx);
              }
            }
        }
      }
    return out;
  }

 private:
  CannyParams p_;
};

struct SketchParams {
  bool equalize = true;
  int closing_size = 3;
  double min_area_fraction = 0.001;
};

/// Equalize, detect edges, close small gaps and drop specks.
inline SketchMap extract_sketch(const ImageTensor& image, const EdgeBackend& backend, const SketchParams& p = {}) {
  require_shape(image.dim(0) == 1 && image.dim(1) == 3, "extract_sketch expects a (1,3,H,W) image");
  if (image.dim(2) < 16 || image.dim(3) < 16) throw std::invalid_argument("extract_sketch needs at least 16x16 pixels");
  Tensor<float> gray = luminance01(image);
  if (p.equalize) gray = equalize_histogram(gray);
  SketchMap edges = backend.detect(gray);
  edges = close(edges, p.closing_size);
  return remove_small_components(edges, p.min_area_fraction * image.dim(2) * image.dim(3));
}

inline SketchMap extract_sketch(const ImageTensor& image) { return extract_sketch(image, CannyEdgeBackend{}); }

}  // namespace fegan::dataprep
