#pragma once

// Procedural face-like images for tests and the overfit run: a skin ellipse,
// two eyes where synthetic_landmarks expects them, a mouth and a hair cap.

#include <cmath>
#include <vector>

#include "fegan/core/rng.hpp"
#include "fegan/dataprep/build.hpp"

namespace fegan::dataprep {

inline ImageTensor fixture_face(int height, int width, std::uint64_t seed) {
  Rng rng(seed);
  auto color = [&](double lo, double hi) {
    return std::array<float, 3>{static_cast<float>(rng.uniform(lo, hi)), static_cast<float>(rng.uniform(lo, hi)),
                                static_cast<float>(rng.uniform(lo, hi))};
  };
  const auto background = color(-1.0, 0.2), skin = color(0.0, 0.8), hair = color(-1.0, -0.2), eye = color(-1.0, -0.6),
             mouth = color(-0.2, 0.6);
  const double cx = 0.5 * (width - 1) + rng.uniform(-0.03, 0.03) * width;
  const double cy = 0.55 * (height - 1);
  const double rx = rng.uniform(0.30, 0.38) * width, ry = rng.uniform(0.38, 0.45) * height;
  const double eye_r = rng.uniform(0.035, 0.055) * std::min(height, width);
  const double ex[2] = {std::round(0.35 * (width - 1)), std::round(0.65 * (width - 1))};
  const double ey = std::round(0.42 * (height - 1));
  const double mouth_y = cy + 0.45 * ry, mouth_w = rng.uniform(0.10, 0.18) * width;
  ImageTensor img = make_image(height, width);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      std::array<float, 3> px = background;
      const double fx = (x - cx) / rx, fy = (y - cy) / ry;
      if (fx * fx + fy * fy <= 1.0) px = skin;
      const double hx = (x - 0.5 * (width - 1)) / (0.45 * width), hy = y / (0.22 * height);
      if (hx * hx + hy * hy <= 1.0) px = hair;
      for (double e : ex)
        if (std::hypot(x - e, y - ey) <= eye_r) px = eye;
      if (std::abs(y - mouth_y) <= 0.02 * height + 0.5 && std::abs(x - cx) <= mouth_w) px = mouth;
      // mild shading so the color domain is not trivially flat
      const float shade = static_cast<float>(0.08 * std::sin(0.2 * x + 0.13 * y + static_cast<double>(seed)));
      for (int c = 0; c < 3; ++c) img(0, c, y, x) = std::clamp(px[c] + shade, -1.0f, 1.0f);
    }
  return img;
}

/// `count` fixture faces with their domains and synthetic landmarks.
inline std::vector<SourceImage> fixture_sources(int count, int height, int width, std::uint64_t seed = 0,
                                                const DomainParams& p = {}) {
  std::vector<SourceImage> out;
  for (int i = 0; i < count; ++i)
    out.push_back(prepare_source(fixture_face(height, width, Rng::derive(seed, static_cast<std::uint64_t>(i))),
                                 maskgen::synthetic_landmarks(height, width), p));
  return out;
}

}  // namespace fegan::dataprep
