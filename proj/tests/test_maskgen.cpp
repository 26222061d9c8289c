#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "fegan/maskgen.hpp"
#include "maskgen_golden.hpp"

using namespace fegan;
using namespace fegan::maskgen;

namespace {

// Supercover walk between integer end points (every pixel the segment
// touches, both neighbours on exact corner crossings). Independent of the
// distance-based rasterizer under test.
std::set<std::pair<int, int>> supercover(int x1, int y1, int x2, int y2) {
  std::set<std::pair<int, int>> pts;
  auto put = [&](int x, int y) { pts.insert({x, y}); };
  int x = x1, y = y1;
  int dx = x2 - x1, dy = y2 - y1;
  const int xstep = dx < 0 ? -1 : 1, ystep = dy < 0 ? -1 : 1;
  dx = std::abs(dx);
  dy = std::abs(dy);
  const int ddx = 2 * dx, ddy = 2 * dy;
  put(x, y);
  if (ddx >= ddy) {
    int error = dx, errorprev = dx;
    for (int i = 0; i < dx; ++i) {
      x += xstep;
      error += ddy;
      if (error > ddx) {
        y += ystep;
        error -= ddx;
        if (error + errorprev < ddx)
          put(x, y - ystep);
        else if (error + errorprev > ddx)
          put(x - xstep, y);
        else {
          put(x, y - ystep);
          put(x - xstep, y);
        }
      }
      put(x, y);
      errorprev = error;
    }
  } else {
    int error = dy, errorprev = dy;
    for (int i = 0; i < dy; ++i) {
      y += ystep;
      error += ddx;
      if (error > ddy) {
        x += xstep;
        error -= ddy;
        if (error + errorprev < ddy)
          put(x - xstep, y);
        else if (error + errorprev > ddy)
          put(x, y - ystep);
        else {
          put(x - xstep, y);
          put(x, y - ystep);
        }
      }
      put(x, y);
      errorprev = error;
    }
  }
  return pts;
}

std::set<std::pair<int, int>> set_pixels(const MaskMap& m) {
  std::set<std::pair<int, int>> s;
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      if (m.at(y, x)) s.insert({x, y});
  return s;
}

bool is_binary(const MaskMap& m) {
  return std::all_of(m.tensor().values().begin(), m.tensor().values().end(),
                     [](float v) { return v == 0.0f || v == 1.0f; });
}

}  // namespace

TEST(RasterizeStroke, ZeroLengthStampsDisc) {
  MaskMap m = rasterize_stroke(MaskMap(32, 32), {10, 10}, 33.0, 0.0, 1);
  EXPECT_EQ(m.count(), 1);
  EXPECT_TRUE(m.at(10, 10));
  MaskMap thick = rasterize_stroke(MaskMap(32, 32), {10, 10}, 0.0, 0.0, 5);
  EXPECT_TRUE(thick.at(10, 12));
  EXPECT_TRUE(thick.at(8, 10));
  EXPECT_FALSE(thick.at(13, 10));
}

TEST(RasterizeStroke, HorizontalSegmentMatchesSupercover) {
  MaskMap m = rasterize_stroke(MaskMap(32, 32), {0, 0}, 90.0, 10.0, 1);
  EXPECT_EQ(set_pixels(m), supercover(0, 0, 10, 0));
  EXPECT_EQ(m.count(), 11);
}

TEST(RasterizeStroke, RandomSegmentsMatchSupercover) {
  Rng rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    const int x1 = rng.below(32), y1 = rng.below(32), x2 = rng.below(32), y2 = rng.below(32);
    const double dx = x2 - x1, dy = y2 - y1;
    const double angle = std::atan2(dx, dy) * 180.0 / std::numbers::pi;
    MaskMap m = rasterize_stroke(MaskMap(32, 32), {double(x1), double(y1)}, angle, std::hypot(dx, dy), 1);
    ASSERT_EQ(set_pixels(m), supercover(x1, y1, x2, y2)) << x1 << "," << y1 << " -> " << x2 << "," << y2;
  }
}

TEST(RasterizeStroke, RepeatedStrokeIsIdempotent) {
  MaskMap once = rasterize_stroke(MaskMap(32, 32), {5, 7}, 40.0, 12.0, 3);
  MaskMap twice = rasterize_stroke(once, {5, 7}, 40.0, 12.0, 3);
  EXPECT_EQ(once, twice);
}

TEST(RasterizeStroke, ClipsOutOfBounds) {
  MaskMap m = rasterize_stroke(MaskMap(16, 16), {15, 15}, 45.0, 40.0, 3);
  EXPECT_TRUE(m.at(15, 15));
  EXPECT_TRUE(is_binary(m));
}

TEST(RasterizeStroke, RejectsBadArguments) {
  EXPECT_THROW(rasterize_stroke(MaskMap(8, 8), {NAN, 1}, 0, 1, 1), std::invalid_argument);
  EXPECT_THROW(rasterize_stroke(MaskMap(8, 8), {1, 1}, INFINITY, 1, 1), std::invalid_argument);
  EXPECT_THROW(rasterize_stroke(MaskMap(8, 8), {1, 1}, 0, 1, 0), std::invalid_argument);
  EXPECT_THROW(rasterize_stroke(MaskMap(8, 8), {1, 1}, 0, -1, 1), std::invalid_argument);
  EXPECT_THROW(rasterize_stroke(MaskMap(8, 8), {9, 1}, 0, 1, 1), std::invalid_argument);
}

TEST(FreeFormMask, NoDrawNoHairIsEmpty) {
  MaskGenParams p = MaskGenParams::defaults_for(64, 64);
  p.max_draw = 1;  // numLine = range(1) = 0
  p.hair_mask_probability = 0;
  const Landmarks lm = synthetic_landmarks(64, 64);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    EXPECT_EQ(generate_free_form_mask(rng, 64, 64, lm, p).count(), 0);
  }
}

TEST(FreeFormMask, HairAlwaysIncludedAtProbabilityOne) {
  MaskGenParams p = MaskGenParams::defaults_for(64, 64);
  const Landmarks lm = synthetic_landmarks(64, 64);
  Landmarks no_hair = lm;
  no_hair.hair_mask.reset();
  p.hair_mask_probability = 1;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng a(seed), b(seed);
    const MaskMap with = generate_free_form_mask(a, 64, 64, lm, p);
    const MaskMap strokes = generate_free_form_mask(b, 64, 64, no_hair, p);
    EXPECT_TRUE(lm.hair_mask->subset_of(with));
    EXPECT_EQ(with, strokes | *lm.hair_mask);
  }
}

TEST(FreeFormMask, DeterministicAndBinary) {
  const MaskGenParams p = MaskGenParams::defaults_for(48, 64);
  const Landmarks lm = synthetic_landmarks(48, 64);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng a(seed), b(seed);
    const MaskMap m = generate_free_form_mask(a, 48, 64, lm, p);
    EXPECT_EQ(m, generate_free_form_mask(b, 48, 64, lm, p));
    EXPECT_TRUE(is_binary(m));
    EXPECT_EQ(m.height(), 48);
    EXPECT_EQ(m.width(), 64);
  }
}

TEST(FreeFormMask, MoreDrawsNeverRemovePixels) {
  const Landmarks lm = synthetic_landmarks(64, 64);
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    MaskGenParams p = MaskGenParams::defaults_for(64, 64);
    MaskMap previous(64, 64);
    for (int max_draw = 1; max_draw <= 12; ++max_draw) {
      p.max_draw = max_draw;
      Rng rng(seed);
      const MaskMap m = generate_free_form_mask(rng, 64, 64, lm, p);
      EXPECT_TRUE(previous.subset_of(m));
      previous = m;
    }
  }
}

TEST(FreeFormMask, RejectsMissingEyes) {
  const MaskGenParams p = MaskGenParams::defaults_for(64, 64);
  Rng rng(1);
  EXPECT_THROW(generate_free_form_mask(rng, 64, 64, Landmarks{}, p), std::invalid_argument);
  MaskGenParams no_eyes = p;
  no_eyes.eye_line_count = 0;
  EXPECT_NO_THROW(generate_free_form_mask(rng, 64, 64, Landmarks{}, no_eyes));
}

TEST(FreeFormMask, ValidatesParams) {
  MaskGenParams p = MaskGenParams::defaults_for(64, 64);
  p.max_angle = 200;
  EXPECT_THROW(p.validate(64, 64), std::invalid_argument);
  p = MaskGenParams::defaults_for(64, 64);
  p.max_length = 64;
  EXPECT_THROW(p.validate(64, 64), std::invalid_argument);
  p = MaskGenParams::defaults_for(64, 64);
  p.stroke_thickness = 0;
  EXPECT_THROW(p.validate(64, 64), std::invalid_argument);
}

TEST(FreeFormMask, ParamsFromConfig) {
  const auto cfg = KeyValueConfig::parse("maskgen.maxDraw = 3\nmaskgen.maxAngle = 30.5\n");
  const MaskGenParams p = MaskGenParams::from_config(cfg, 64, 64);
  EXPECT_EQ(p.max_draw, 3);
  EXPECT_DOUBLE_EQ(p.max_angle, 30.5);
  EXPECT_EQ(p.max_length, 21);
}

TEST(FreeFormMask, EyeStrokeTouchesEyeDisc) {
  const MaskGenParams p = MaskGenParams::defaults_for(64, 64);
  Landmarks lm = synthetic_landmarks(64, 64);
  lm.hair_mask.reset();
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    Rng probe(seed);
    probe.next_u64();
    const int num_line = probe.below(p.max_draw);
    Rng rng(seed);
    const MaskMap m = generate_free_form_mask(rng, 64, 64, lm, p);
    if (num_line < 1) continue;
    ++checked;
    bool hit = false;
    for (int y = 0; y < 64 && !hit; ++y)
      for (int x = 0; x < 64 && !hit; ++x)
        if (m.at(y, x))
          for (const Point& e : lm.eye_positions)
            if (std::hypot(x - e.x, y - e.y) <= p.max_length) hit = true;
    EXPECT_TRUE(hit) << "seed " << seed;
  }
  EXPECT_GT(checked, 700);
}

TEST(FreeFormMask, CoverageMatchesGoldenStatistics) {
  const auto s = fegan::testing::measure_coverage();
  EXPECT_TRUE(fegan::testing::within_relative(s.mean, fegan::testing::kCoverageMean, 0.10)) << s.mean;
  EXPECT_TRUE(fegan::testing::within_relative(s.p5, fegan::testing::kCoverageP5, 0.10)) << s.p5;
  EXPECT_TRUE(fegan::testing::within_relative(s.p95, fegan::testing::kCoverageP95, 0.10)) << s.p95;
}
