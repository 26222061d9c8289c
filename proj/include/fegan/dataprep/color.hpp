#pragma once

// Color domain: flattened per-segment median colors.

#include <algorithm>
#include <array>
#include <memory>
#include <stdexcept>
#include <vector>

#include "fegan/core/rng.hpp"
#include "fegan/dataprep/filters.hpp"

namespace fegan::dataprep {

/// Per-pixel segment ids over an H x W grid; -1 marks unlabeled pixels.
struct LabelMap {
  int height = 0;
  int width = 0;
  std::vector<int> labels;

  LabelMap() = default;
  LabelMap(int h, int w, int fill = 0) : height(h), width(w), labels(static_cast<std::size_t>(h) * w, fill) {}

  int& at(int y, int x) { return labels[static_cast<std::size_t>(y) * width + x]; }
  int at(int y, int x) const { return labels[static_cast<std::size_t>(y) * width + x]; }
  int segment_count() const {
    int m = -1;
    for (int l : labels) m = std::max(m, l);
    return m + 1;
  }
};

class Segmenter {
 public:
  virtual ~Segmenter() = default;
  virtual LabelMap segment(const ImageTensor& image) const = 0;
};

/// k-means over RGB values with k-means++ seeding from a fixed seed.
class KMeansSegmenter final : public Segmenter {
 public:
  explicit KMeansSegmenter(int k = 8, std::uint64_t seed = 0, int iterations = 20)
      : k_(k), seed_(seed), iterations_(iterations) {
    if (k_ < 1) throw std::invalid_argument("k-means needs k >= 1");
  }

  LabelMap segment(const ImageTensor& image) const override {
    const int H = image.dim(2), W = image.dim(3), n = H * W;
    auto px = [&](int i, int c) { return static_cast<double>(image(0, c, i / W, i % W)); };
    auto dist2 = [&](int i, const std::array<double, 3>& c) {
      double s = 0;
      for (int ch = 0; ch < 3; ++ch) s += (px(i, ch) - c[ch]) * (px(i, ch) - c[ch]);
      return s;
    };
    Rng rng(seed_);
    std::vector<std::array<double, 3>> centers;
    std::vector<double> d2(static_cast<std::size_t>(n), 0.0);
    const int first = rng.below(n);
    centers.push_back({px(first, 0), px(first, 1), px(first, 2)});
    while (static_cast<int>(centers.size()) < k_) {
      double total = 0;
      for (int i = 0; i < n; ++i) {
        double best = dist2(i, centers[0]);
        for (const auto& c : centers) best = std::min(best, dist2(i, c));
        total += d2[static_cast<std::size_t>(i)] = best;
      }
      if (total <= 0) break;  // fewer distinct colors than k
      double pick = rng.uniform() * total;
      int chosen = n - 1;
      for (int i = 0; i < n; ++i) {
        pick -= d2[static_cast<std::size_t>(i)];
        if (pick < 0) {
          chosen = i;
          break;
        }
      }
      centers.push_back({px(chosen, 0), px(chosen, 1), px(chosen, 2)});
    }

    LabelMap out(H, W, 0);
    for (int it = 0; it < iterations_; ++it) {
      bool changed = false;
      for (int i = 0; i < n; ++i) {
        int best = 0;
        double bd = dist2(i, centers[0]);
        for (int c = 1; c < static_cast<int>(centers.size()); ++c)
          if (const double d = dist2(i, centers[static_cast<std::size_t>(c)]); d < bd) bd = d, best = c;
        changed |= out.labels[static_cast<std::size_t>(i)] != best;
        out.labels[static_cast<std::size_t>(i)] = best;
      }
      std::vector<std::array<double, 3>> sum(centers.size(), {0, 0, 0});
      std::vector<int> cnt(centers.size(), 0);
      for (int i = 0; i < n; ++i) {
        const auto l = static_cast<std::size_t>(out.labels[static_cast<std::size_t>(i)]);
        for (int ch = 0; ch < 3; ++ch) sum[l][ch] += px(i, ch);
        ++cnt[l];
      }
      for (std::size_t c = 0; c < centers.size(); ++c)
        if (cnt[c] > 0)
          for (int ch = 0; ch < 3; ++ch) centers[c][ch] = sum[c][ch] / cnt[c];
      if (!changed && it > 0) break;
    }
    // Compact ids so empty clusters leave no gaps.
    std::vector<int> remap(centers.size(), -1);
    int next = 0;
    for (int& l : out.labels) {
      if (remap[static_cast<std::size_t>(l)] < 0) remap[static_cast<std::size_t>(l)] = next++;
      l = remap[static_cast<std::size_t>(l)];
    }
    return out;
  }

 private:
  int k_;
  std::uint64_t seed_;
  int iterations_;
};

struct ColorParams {
  int median_size = 3;  // <= 1 disables
  int bilateral_passes = 20;
  BilateralParams bilateral;
};

/// Median then repeated bilateral smoothing.
inline ImageTensor smooth_for_color(const ImageTensor& image, const ColorParams& p) {
  ImageTensor out = median_filter(image, p.median_size);
  for (int i = 0; i < p.bilateral_passes; ++i) out = bilateral_filter(out, p.bilateral);
  return out;
}

/// Replaces every segment of the smoothed image with its channelwise lower
/// median. Unlabeled pixels are left off the support.
inline ColorMap extract_color_domain(const ImageTensor& image, const LabelMap& labels, const ColorParams& p = {}) {
  require_shape(image.dim(0) == 1 && image.dim(1) == 3, "extract_color_domain expects a (1,3,H,W) image");
  const int H = image.dim(2), W = image.dim(3);
  if (labels.height != H || labels.width != W || labels.labels.size() != static_cast<std::size_t>(H) * W)
    throw std::invalid_argument("segmentation label map does not match the image size");
  const ImageTensor smooth = smooth_for_color(image, p);
  const int segs = labels.segment_count();
  std::vector<std::vector<float>> values(static_cast<std::size_t>(segs) * 3);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      if (const int l = labels.at(y, x); l >= 0)
        for (int c = 0; c < 3; ++c) values[static_cast<std::size_t>(l) * 3 + c].push_back(smooth(0, c, y, x));
  std::vector<float> med(values.size(), 0.0f);
  for (std::size_t i = 0; i < values.size(); ++i)
    if (!values[i].empty()) med[i] = lower_median(values[i]);
  ImageTensor rgb = make_image(H, W);
  MaskMap support(H, W);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      if (const int l = labels.at(y, x); l >= 0) {
        support.set(y, x);
        for (int c = 0; c < 3; ++c) rgb(0, c, y, x) = med[static_cast<std::size_t>(l) * 3 + c];
      }
  return ColorMap(std::move(rgb), std::move(support));
}

inline ColorMap extract_color_domain(const ImageTensor& image, const Segmenter& segmenter, const ColorParams& p = {}) {
  return extract_color_domain(image, segmenter.segment(image), p);
}

}  // namespace fegan::dataprep
