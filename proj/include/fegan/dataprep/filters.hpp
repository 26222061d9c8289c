#pragma once

// Classical image filters on (1, C, H, W) float images. Borders replicate the
// edge pixel unless stated otherwise.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "fegan/core/image.hpp"

namespace fegan::dataprep {

namespace detail {
inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }
}  // namespace detail

/// Histogram equalization of a single-channel map on [0, 1] with 256 bins.
/// A constant map has no spread to redistribute and is returned unchanged.
inline Tensor<float> equalize_histogram(const Tensor<float>& gray01) {
  require_shape(gray01.dim(0) == 1 && gray01.dim(1) == 1, "equalize_histogram expects (1,1,H,W)");
  std::array<std::int64_t, 256> hist{};
  auto bin = [](float v) { return detail::clampi(static_cast<int>(v * 256.0f), 0, 255); };
  for (float v : gray01.values()) ++hist[static_cast<std::size_t>(bin(v))];
  std::array<std::int64_t, 256> cdf{};
  std::int64_t run = 0;
  for (std::size_t i = 0; i < 256; ++i) cdf[i] = run += hist[i];
  std::int64_t cdf_min = 0;
  for (std::int64_t c : cdf)
    if (c > 0) {
      cdf_min = c;
      break;
    }
  const std::int64_t n = gray01.size();
  if (n == cdf_min) return gray01;
  Tensor<float> out(gray01.shape());
  for (std::int64_t i = 0; i < n; ++i)
    out[i] = static_cast<float>(static_cast<double>(cdf[static_cast<std::size_t>(bin(gray01[i]))] - cdf_min) /
                                static_cast<double>(n - cdf_min));
  return out;
}

/// Separable Gaussian blur, kernel radius ceil(2 sigma).
inline Tensor<float> gaussian_blur(const Tensor<float>& img, double sigma) {
  if (sigma <= 0) return img;
  const int r = static_cast<int>(std::ceil(2.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double sum = 0;
  for (int i = -r; i <= r; ++i) sum += k[static_cast<std::size_t>(i + r)] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& v : k) v /= sum;
  const int N = img.dim(0), C = img.dim(1), H = img.dim(2), W = img.dim(3);
  Tensor<float> tmp(img.shape()), out(img.shape());
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          double acc = 0;
          for (int i = -r; i <= r; ++i) acc += k[static_cast<std::size_t>(i + r)] * img(n, c, y, detail::clampi(x + i, 0, W - 1));
          tmp(n, c, y, x) = static_cast<float>(acc);
        }
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          double acc = 0;
          for (int i = -r; i <= r; ++i) acc += k[static_cast<std::size_t>(i + r)] * tmp(n, c, detail::clampi(y + i, 0, H - 1), x);
          out(n, c, y, x) = static_cast<float>(acc);
        }
    }
  return out;
}

struct Gradient {
  Tensor<float> gx;
  Tensor<float> gy;
};

/// Sobel derivatives scaled by 1/4, so a unit ramp gives gx = 2 (the
/// difference I(x+1) - I(x-1)).
inline Gradient sobel(const Tensor<float>& gray) {
  require_shape(gray.dim(0) == 1 && gray.dim(1) == 1, "sobel expects (1,1,H,W)");
  const int H = gray.dim(2), W = gray.dim(3);
  Gradient g{Tensor<float>(gray.shape()), Tensor<float>(gray.shape())};
  auto at = [&](int y, int x) { return gray(0, 0, detail::clampi(y, 0, H - 1), detail::clampi(x, 0, W - 1)); };
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const float gx = (at(y - 1, x + 1) + 2 * at(y, x + 1) + at(y + 1, x + 1)) -
                       (at(y - 1, x - 1) + 2 * at(y, x - 1) + at(y + 1, x - 1));
      const float gy = (at(y + 1, x - 1) + 2 * at(y + 1, x) + at(y + 1, x + 1)) -
                       (at(y - 1, x - 1) + 2 * at(y - 1, x) + at(y - 1, x + 1));
      g.gx(0, 0, y, x) = 0.25f * gx;
      g.gy(0, 0, y, x) = 0.25f * gy;
    }
  return g;
}

/// Lower median of a non-empty buffer (element (n - 1) / 2 of the sorted
/// values). Reorders the buffer.
inline float lower_median(std::vector<float>& v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>((v.size() - 1) / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

/// Channelwise median over a size x size window (size odd).
inline Tensor<float> median_filter(const Tensor<float>& img, int size = 3) {
  if (size <= 1) return img;
  const int r = size / 2;
  const int N = img.dim(0), C = img.dim(1), H = img.dim(2), W = img.dim(3);
  Tensor<float> out(img.shape());
  std::vector<float> win;
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          win.clear();
          for (int dy = -r; dy <= r; ++dy)
            for (int dx = -r; dx <= r; ++dx)
              win.push_back(img(n, c, detail::clampi(y + dy, 0, H - 1), detail::clampi(x + dx, 0, W - 1)));
          out(n, c, y, x) = lower_median(win);
        }
  return out;
}

struct BilateralParams {
  double sigma_space = 3.0;
  double sigma_range = 0.1;
  int window = 7;
};

/// One bilateral pass; the range weight uses the Euclidean distance between
/// the full channel vectors, so colors are smoothed jointly.
inline Tensor<float> bilateral_filter(const Tensor<float>& img, const BilateralParams& p) {
  const int r = p.window / 2;
  const int N = img.dim(0), C = img.dim(1), H = img.dim(2), W = img.dim(3);
  std::vector<double> spatial(static_cast<std::size_t>((2 * r + 1) * (2 * r + 1)));
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx)
      spatial[static_cast<std::size_t>((dy + r) * (2 * r + 1) + dx + r)] =
          std::exp(-0.5 * (dx * dx + dy * dy) / (p.sigma_space * p.sigma_space));
  const double inv_range = 1.0 / (2.0 * p.sigma_range * p.sigma_range);
  Tensor<float> out(img.shape());
  std::vector<double> acc(static_cast<std::size_t>(C));
  for (int n = 0; n < N; ++n)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        std::fill(acc.begin(), acc.end(), 0.0);
        double wsum = 0;
        for (int dy = -r; dy <= r; ++dy) {
          const int yy = detail::clampi(y + dy, 0, H - 1);
          for (int dx = -r; dx <= r; ++dx) {
            const int xx = detail::clampi(x + dx, 0, W - 1);
            double d2 = 0;
            for (int c = 0; c < C; ++c) {
              const double d = img(n, c, yy, xx) - img(n, c, y, x);
              d2 += d * d;
            }
            const double w = spatial[static_cast<std::size_t>((dy + r) * (2 * r + 1) + dx + r)] * std::exp(-d2 * inv_range);
            wsum += w;
            for (int c = 0; c < C; ++c) acc[static_cast<std::size_t>(c)] += w * img(n, c, yy, xx);
          }
        }
        for (int c = 0; c < C; ++c) out(n, c, y, x) = static_cast<float>(acc[static_cast<std::size_t>(c)] / wsum);
      }
  return out;
}

// ------------------------------------------------------------ binary maps

template <class Tag>
BinaryMap<Tag> dilate(const BinaryMap<Tag>& m, int size = 3) {
  const int r = size / 2, H = m.height(), W = m.width();
  BinaryMap<Tag> out(H, W);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      bool on = false;
      for (int dy = -r; dy <= r && !on; ++dy)
        for (int dx = -r; dx <= r && !on; ++dx)
          on = m.at(detail::clampi(y + dy, 0, H - 1), detail::clampi(x + dx, 0, W - 1));
      out.set(y, x, on);
    }
  return out;
}

template <class Tag>
BinaryMap<Tag> erode(const BinaryMap<Tag>& m, int size = 3) {
  const int r = size / 2, H = m.height(), W = m.width();
  BinaryMap<Tag> out(H, W);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      bool on = true;
      for (int dy = -r; dy <= r && on; ++dy)
        for (int dx = -r; dx <= r && on; ++dx)
          on = m.at(detail::clampi(y + dy, 0, H - 1), detail::clampi(x + dx, 0, W - 1));
      out.set(y, x, on);
    }
  return out;
}

/// Dilation followed by erosion; never removes a set pixel.
template <class Tag>
BinaryMap<Tag> close(const BinaryMap<Tag>& m, int size = 3) {
  if (size <= 1) return m;
  return erode(dilate(m, size), size);
}

/// 8-connected component labels; -1 for unset pixels. Returns the labels and
/// the pixel count of each component.
template <class Tag>
std::pair<std::vector<int>, std::vector<std::int64_t>> connected_components(const BinaryMap<Tag>& m) {
  const int H = m.height(), W = m.width();
  std::vector<int> label(static_cast<std::size_t>(H) * W, -1);
  std::vector<std::int64_t> sizes;
  std::vector<int> stack;
  for (int start = 0; start < H * W; ++start) {
    if (label[static_cast<std::size_t>(start)] >= 0 || !m.at(start / W, start % W)) continue;
    const int id = static_cast<int>(sizes.size());
    sizes.push_back(0);
    stack.push_back(start);
    label[static_cast<std::size_t>(start)] = id;
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      ++sizes.back();
      const int py = p / W, px = p % W;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int yy = py + dy, xx = px + dx;
          if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
          const int q = yy * W + xx;
          if (label[static_cast<std::size_t>(q)] >= 0 || !m.at(yy, xx)) continue;
          label[static_cast<std::size_t>(q)] = id;
          stack.push_back(q);
        }
    }
  }
  return {std::move(label), std::move(sizes)};
}

/// Clears 8-connected components with fewer than min_area pixels.
template <class Tag>
BinaryMap<Tag> remove_small_components(const BinaryMap<Tag>& m, double min_area) {
  auto [label, sizes] = connected_components(m);
  BinaryMap<Tag> out = m;
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) {
      const int l = label[static_cast<std::size_t>(y) * m.width() + x];
      if (l >= 0 && static_cast<double>(sizes[static_cast<std::size_t>(l)]) < min_area) out.set(y, x, false);
    }
  return out;
}

}  // namespace fegan::dataprep
