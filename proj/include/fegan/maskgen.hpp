#pragma once

// Free-form training masks: random thick polyline chains, eye-anchored
// strokes and an optional hair-region union.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

#include "fegan/core/config.hpp"
#include "fegan/core/image.hpp"
#include "fegan/core/rng.hpp"

namespace fegan::maskgen {

/// Pixel coordinates; x to the right, y downwards, pixel centers on integers.
struct Point {
  double x = 0;
  double y = 0;
};

struct MaskGenParams {
  int max_draw = 6;
  int max_line = 8;
  double max_angle = 45;  // degrees
  int max_length = 21;    // pixels
  int stroke_thickness = 3;
  double hair_mask_probability = 0.2;
  int eye_line_count = 1;

  /// Size-relative defaults: maxLength a third of the short side, stroke
  /// thickness 5% of it (at least 3 px).
  static MaskGenParams defaults_for(int height, int width) {
    MaskGenParams p;
    const int s = std::min(height, width);
    p.max_length = std::max(1, s / 3);
    p.stroke_thickness = std::max(3, static_cast<int>(std::lround(0.05 * s)));
    return p;
  }

  /// Reads `maskgen.maxDraw`, `maskgen.maxLine`, `maskgen.maxAngle`,
  /// `maskgen.maxLength`, `maskgen.strokeThickness`,
  /// `maskgen.hairMaskProbability` and `maskgen.eyeLineCount`, falling back
  /// to `defaults_for(height, width)`.
  static MaskGenParams from_config(const KeyValueConfig& cfg, int height, int width) {
    MaskGenParams p = defaults_for(height, width);
    p.max_draw = cfg.get("maskgen.maxDraw", p.max_draw);
    p.max_line = cfg.get("maskgen.maxLine", p.max_line);
    p.max_angle = cfg.get("maskgen.maxAngle", p.max_angle);
    p.max_length = cfg.get("maskgen.maxLength", p.max_length);
    p.stroke_thickness = cfg.get("maskgen.strokeThickness", p.stroke_thickness);
    p.hair_mask_probability = cfg.get("maskgen.hairMaskProbability", p.hair_mask_probability);
    p.eye_line_count = cfg.get("maskgen.eyeLineCount", p.eye_line_count);
    return p;
  }

  void validate(int height, int width) const {
    if (max_draw < 1 || max_line < 1 || max_length < 1) throw std::invalid_argument("maxDraw, maxLine and maxLength must be positive");
    if (!(max_angle > 0 && max_angle <= 180)) throw std::invalid_argument("maxAngle must be in (0, 180]");
    if (max_length >= std::min(height, width)) throw std::invalid_argument("maxLength must be below min(H, W)");
    if (stroke_thickness < 1) throw std::invalid_argument("strokeThickness must be >= 1");
    if (!(hair_mask_probability >= 0 && hair_mask_probability <= 1))
      throw std::invalid_argument("hairMaskProbability must be in [0, 1]");
    if (eye_line_count < 0) throw std::invalid_argument("eyeLineCount must be non-negative");
  }
};

struct Landmarks {
  std::vector<Point> eye_positions;
  std::optional<MaskMap> hair_mask;
};

/// Stand-in landmarks for fixture images: two eyes on a horizontal line and
/// an elliptical hair blob across the top of the frame.
inline Landmarks synthetic_landmarks(int height, int width) {
  Landmarks lm;
  lm.eye_positions = {{std::round(0.35 * (width - 1)), std::round(0.42 * (height - 1))},
                      {std::round(0.65 * (width - 1)), std::round(0.42 * (height - 1))}};
  MaskMap hair(height, width);
  const double cx = 0.5 * (width - 1), rx = 0.45 * width, ry = 0.22 * height;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double dx = (x - cx) / rx, dy = y / ry;
      if (dx * dx + dy * dy <= 1.0) hair.set(y, x);
    }
  lm.hair_mask = std::move(hair);
  return lm;
}

namespace detail {

inline double point_segment_distance(Point p, Point a, Point b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

inline double point_box_distance(Point p, double x0, double y0, double x1, double y1) {
  const double dx = std::max({x0 - p.x, 0.0, p.x - x1});
  const double dy = std::max({y0 - p.y, 0.0, p.y - y1});
  return std::hypot(dx, dy);
}

// Liang-Barsky test against the closed box.
inline bool segment_hits_box(Point a, Point b, double x0, double y0, double x1, double y1) {
  double t0 = 0.0, t1 = 1.0;
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double p[4] = {-dx, dx, -dy, dy};
  const double q[4] = {a.x - x0, x1 - a.x, a.y - y0, y1 - a.y};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return false;
      continue;
    }
    const double r = q[i] / p[i];
    if (p[i] < 0.0)
      t0 = std::max(t0, r);
    else
      t1 = std::min(t1, r);
    if (t0 > t1) return false;
  }
  return true;
}

inline double segment_box_distance(Point a, Point b, double x0, double y0, double x1, double y1) {
  if (segment_hits_box(a, b, x0, y0, x1, y1)) return 0.0;
  double d = std::min(point_box_distance(a, x0, y0, x1, y1), point_box_distance(b, x0, y0, x1, y1));
  for (Point c : {Point{x0, y0}, Point{x1, y0}, Point{x0, y1}, Point{x1, y1}})
    d = std::min(d, point_segment_distance(c, a, b));
  return d;
}

inline void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw std::invalid_argument(std::string("non-finite ") + what);
}

}  // namespace detail

/// Stroke end point for a direction in degrees: x advances by sin, y by cos.
inline Point stroke_end(Point start, double angle_deg, double length) {
  const double a = angle_deg * std::numbers::pi / 180.0;
  return {start.x + length * std::sin(a), start.y + length * std::cos(a)};
}

/// Sets every pixel whose unit square lies within (thickness - 1) / 2 of the
/// segment. Thickness 1 is the supercover of the segment; length 0 stamps a
/// disc at `start`. Pixels outside the map are clipped.
inline void draw_stroke(MaskMap& mask, Point start, double angle_deg, double length, int thickness) {
  detail::check_finite(start.x, "stroke start x");
  detail::check_finite(start.y, "stroke start y");
  detail::check_finite(angle_deg, "stroke angle");
  detail::check_finite(length, "stroke length");
  if (thickness < 1) throw std::invalid_argument("stroke thickness must be >= 1");
  if (length < 0) throw std::invalid_argument("stroke length must be non-negative");
  if (start.x < 0 || start.y < 0 || start.x > mask.width() - 1 || start.y > mask.height() - 1)
    throw std::invalid_argument("stroke start outside the mask");

  const Point end = stroke_end(start, angle_deg, length);
  const double radius = 0.5 * (thickness - 1);
  constexpr double kTouch = 1e-9;
  const int xa = std::max(0, static_cast<int>(std::floor(std::min(start.x, end.x) - radius - 0.5)));
  const int xb = std::min(mask.width() - 1, static_cast<int>(std::ceil(std::max(start.x, end.x) + radius + 0.5)));
  const int ya = std::max(0, static_cast<int>(std::floor(std::min(start.y, end.y) - radius - 0.5)));
  const int yb = std::min(mask.height() - 1, static_cast<int>(std::ceil(std::max(start.y, end.y) + radius + 0.5)));
  for (int y = ya; y <= yb; ++y)
    for (int x = xa; x <= xb; ++x)
      if (detail::segment_box_distance(start, end, x - 0.5, y - 0.5, x + 0.5, y + 0.5) <= radius + kTouch)
        mask.set(y, x);
}

inline MaskMap rasterize_stroke(MaskMap mask, Point start, double angle_deg, double length, int thickness) {
  draw_stroke(mask, start, angle_deg, length, thickness);
  return mask;
}

/// Free-form mask with eye-anchored strokes.
///
/// The parent stream supplies a base seed, the number of outer draws and the
/// hair decision; each outer draw then runs on its own derived stream, so
/// raising maxDraw only ever appends draws.
inline MaskMap generate_free_form_mask(Rng& rng, int height, int width, const Landmarks& landmarks,
                                       const MaskGenParams& params) {
  params.validate(height, width);
  if (params.eye_line_count > 0 && landmarks.eye_positions.empty())
    throw std::invalid_argument("eye-anchored strokes requested but no eye positions given");
  for (const Point& e : landmarks.eye_positions)
    if (e.x < 0 || e.y < 0 || e.x > width - 1 || e.y > height - 1)
      throw std::invalid_argument("eye position outside the image");
  if (landmarks.hair_mask && (landmarks.hair_mask->height() != height || landmarks.hair_mask->width() != width))
    throw std::invalid_argument("hair mask size does not match the image");

  MaskMap mask(height, width);
  const std::uint64_t base = rng.next_u64();
  const int num_line = rng.below(params.max_draw);
  const bool add_hair = rng.uniform() < params.hair_mask_probability;

  for (int i = 0; i < num_line; ++i) {
    Rng draw(Rng::derive(base, static_cast<std::uint64_t>(i)));
    Point p{static_cast<double>(draw.below(width)), static_cast<double>(draw.below(height))};
    const double start_angle = draw.uniform(0.0, 360.0);
    const int num_v = draw.below(params.max_line);
    for (int j = 0; j < num_v; ++j) {
      const double angle_p = draw.uniform(-params.max_angle, params.max_angle);
      const double angle = start_angle + angle_p + (j % 2 == 1 ? 180.0 : 0.0);
      const double length = draw.below(params.max_length);
      draw_stroke(mask, p, angle, length, params.stroke_thickness);
      const Point next = stroke_end(p, angle, length);
      p = {std::clamp(next.x, 0.0, width - 1.0), std::clamp(next.y, 0.0, height - 1.0)};
    }
    for (int e = 0; e < params.eye_line_count; ++e) {
      const Point& eye = landmarks.eye_positions[static_cast<std::size_t>(
          draw.below(static_cast<int>(landmarks.eye_positions.size())))];
      const double angle = draw.uniform(0.0, 360.0);
      const double length = 1 + draw.below(params.max_length);
      draw_stroke(mask, eye, angle, length, params.stroke_thickness);
    }
  }
  if (add_hair && landmarks.hair_mask) mask |= *landmarks.hair_mask;
  return mask;
}

}  // namespace fegan::maskgen
