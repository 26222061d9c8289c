#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <sstream>

#include "fegan/dataprep.hpp"

using namespace fegan;
using namespace fegan::dataprep;

namespace {

ImageTensor random_image(int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  ImageTensor t = make_image(h, w);
  for (float& v : t.values()) v = static_cast<float>(rng.uniform(-1, 1));
  return t;
}

ImageTensor step_image(int h, int w, int column, float left, float right) {
  ImageTensor t = make_image(h, w);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) t(0, c, y, x) = x < column ? left : right;
  return t;
}

// Smooth blobs standing in for a face photo.
ImageTensor blob_image(int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  ImageTensor t = make_image(h, w);
  for (int k = 0; k < 5; ++k) {
    const double cx = rng.uniform(0, w), cy = rng.uniform(0, h), r = rng.uniform(4, 0.4 * w);
    const float col[3] = {float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1))};
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (std::hypot(x - cx, y - cy) < r) {
          for (int c = 0; c < 3; ++c) t(0, c, y, x) = col[c];
        }
  }
  return t;
}

}  // namespace

TEST(Filters, EqualizeLeavesConstantAlone) {
  Tensor<float> g(Shape{1, 1, 8, 8}, 0.3f);
  EXPECT_EQ(equalize_histogram(g), g);
}

TEST(Filters, EqualizeSpreadsToUnitRange) {
  const Tensor<float> g = luminance01(random_image(20, 20, 1));
  const Tensor<float> e = equalize_histogram(g);
  EXPECT_FLOAT_EQ(*std::max_element(e.values().begin(), e.values().end()), 1.0f);
  EXPECT_FLOAT_EQ(*std::min_element(e.values().begin(), e.values().end()), 0.0f);
  for (std::int64_t i = 0; i < g.size(); ++i)
    for (std::int64_t j = 0; j < g.size(); ++j)
      if (g[i] < g[j]) {
        ASSERT_LE(e[i], e[j]);
      }
}

TEST(Filters, LowerMedianMatchesSortOracle) {
  Rng rng(5);
  for (int n = 1; n < 40; ++n) {
    std::vector<float> v(static_cast<std::size_t>(n));
    for (float& f : v) f = static_cast<float>(rng.below(7));
    std::vector<float> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    EXPECT_EQ(lower_median(v), sorted[static_cast<std::size_t>((n - 1) / 2)]);
  }
}

TEST(Filters, MedianRemovesImpulse) {
  ImageTensor t = make_image(9, 9, 3, 0.25f);
  t(0, 1, 4, 4) = 1.0f;
  EXPECT_EQ(median_filter(t, 3), make_image(9, 9, 3, 0.25f));
}

TEST(Filters, BilateralKeepsConstantAndSharpStep) {
  const ImageTensor c = make_image(10, 10, 3, -0.4f);
  const ImageTensor out = bilateral_filter(c, {});
  for (float v : out.values()) EXPECT_NEAR(v, -0.4f, 1e-6);
  const ImageTensor s = bilateral_filter(step_image(12, 12, 6, -1.0f, 1.0f), {});
  EXPECT_NEAR(s(0, 0, 5, 5), -1.0f, 1e-4);
  EXPECT_NEAR(s(0, 0, 5, 6), 1.0f, 1e-4);
}

TEST(Filters, ClosingIsExtensiveAndFillsGaps) {
  MaskMap m(10, 10);
  for (int x = 0; x < 10; ++x)
    if (x != 5) m.set(4, x);
  const MaskMap closed = close(m, 3);
  EXPECT_TRUE(m.subset_of(closed));
  EXPECT_TRUE(closed.at(4, 5));
}

TEST(Filters, RemovesOnlySmallComponents) {
  MaskMap m(20, 20);
  m.set(2, 2);
  m.set(3, 3);  // diagonal: one 8-connected component of 2
  for (int x = 5; x < 15; ++x) m.set(10, x);
  const MaskMap out = remove_small_components(m, 3);
  EXPECT_FALSE(out.at(2, 2));
  EXPECT_FALSE(out.at(3, 3));
  EXPECT_EQ(out.count(), 10);
  EXPECT_EQ(connected_components(m).second.size(), 2u);
}

TEST(Sketch, ConstantImageHasNoEdges) {
  for (float v : {-1.0f, 0.0f, 0.7f}) EXPECT_EQ(extract_sketch(make_image(32, 32, 3, v)).count(), 0);
}

TEST(Sketch, VerticalStepMatchesGradientOracle) {
  const int H = 32, W = 32;
  for (int col : {8, 15, 23}) {
    const ImageTensor img = step_image(H, W, col, -0.8f, 0.6f);
    const SketchMap s = extract_sketch(img);
    // Oracle: columns where the central difference of the equalized luma
    // clears the low hysteresis threshold.
    const Tensor<float> eq = equalize_histogram(luminance01(img));
    std::set<int> oracle;
    for (int x = 0; x < W; ++x) {
      const float d = eq(0, 0, 0, std::min(W - 1, x + 1)) - eq(0, 0, 0, std::max(0, x - 1));
      if (std::abs(d) >= CannyParams{}.low) oracle.insert(x);
    }
    ASSERT_TRUE(oracle.contains(col));
    const auto [labels, sizes] = connected_components(s);
    EXPECT_EQ(sizes.size(), 1u) << "column " << col;
    for (int y = 0; y < H; ++y) {
      int in_row = 0;
      for (int x = 0; x < W; ++x)
        if (s.at(y, x)) {
          EXPECT_TRUE(oracle.contains(x)) << "edge pixel at column " << x;
          ++in_row;
        }
      EXPECT_GE(in_row, 1) << "row " << y;
    }
  }
}

TEST(Sketch, OutputIsFixedPointOfBinarization) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const SketchMap s = extract_sketch(blob_image(40, 48, seed));
    EXPECT_EQ(SketchMap::threshold(s.tensor(), 0.5f), s);
    EXPECT_NO_THROW(SketchMap::from_tensor(s.tensor()));
  }
}

TEST(Sketch, RejectsTinyImages) {
  EXPECT_THROW(extract_sketch(make_image(15, 32)), std::invalid_argument);
  EXPECT_THROW(extract_sketch(make_image(32, 8)), std::invalid_argument);
}

TEST(Segmentation, KMeansSeparatesFlatRegionsDeterministically) {
  const ImageTensor img = step_image(16, 16, 8, -0.5f, 0.5f);
  const LabelMap a = KMeansSegmenter(8, 3).segment(img);
  EXPECT_EQ(a.segment_count(), 2);
  EXPECT_NE(a.at(0, 0), a.at(0, 15));
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) EXPECT_EQ(a.at(y, x), a.at(0, x < 8 ? 0 : 15));
  EXPECT_EQ(a.labels, KMeansSegmenter(8, 3).segment(img).labels);
}

TEST(ColorDomain, ConstantImageGivesUniformMap) {
  const ImageTensor img = make_image(16, 16, 3, 0.375f);
  const ColorMap m = extract_color_domain(img, LabelMap(16, 16, 0));
  for (float v : m.rgb().values()) EXPECT_NEAR(v, 0.375f, 1e-6);
  EXPECT_EQ(m.support().count(), 256);
}

TEST(ColorDomain, TwoSegmentsMatchBruteForceLowerMedian) {
  const int H = 16, W = 16;
  const ImageTensor img = random_image(H, W, 11);
  LabelMap labels(H, W);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) labels.at(y, x) = x < W / 2 ? 0 : 1;
  const ColorParams identity{1, 0, {}};
  const ColorMap m = extract_color_domain(img, labels, identity);
  for (int seg = 0; seg < 2; ++seg)
    for (int c = 0; c < 3; ++c) {
      std::vector<float> v;
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
          if (labels.at(y, x) == seg) v.push_back(img(0, c, y, x));
      ASSERT_EQ(v.size() % 2, 0u);
      std::sort(v.begin(), v.end());
      const float expected = v[(v.size() - 1) / 2];
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
          if (labels.at(y, x) == seg) {
            ASSERT_EQ(m.rgb()(0, c, y, x), expected);
          }
    }
}

TEST(ColorDomain, RejectsMismatchedLabels) {
  EXPECT_THROW(extract_color_domain(make_image(16, 16), LabelMap(16, 15, 0)), std::invalid_argument);
}

TEST(ColorDomain, SupportWithinSegmentationAndStrokes) {
  const ImageTensor img = blob_image(32, 32, 4);
  LabelMap labels = KMeansSegmenter(4, 0).segment(img);
  for (int x = 0; x < 32; ++x) labels.at(3, x) = -1;
  MaskMap seg_support(32, 32);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) seg_support.set(y, x, labels.at(y, x) >= 0);
  const ColorMap domain = extract_color_domain(img, labels, ColorParams{3, 2, {}});
  Rng rng(9);
  const ColorMap strokes = synthesize_color_strokes(rng, domain, maskgen::MaskGenParams::defaults_for(32, 32));
  EXPECT_TRUE(domain.support().subset_of(seg_support));
  EXPECT_TRUE(strokes.support().subset_of(seg_support));
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x)
        if (!strokes.support().at(y, x)) {
          EXPECT_EQ(strokes.rgb()(0, c, y, x), 0.0f);
        }
}

class AssembleBatch : public ::testing::Test {
 protected:
  const int H = 16, W = 16;
  ImageTensor image = random_image(16, 16, 2);
  SketchMap sketch = SketchMap::threshold(random_image(16, 16, 3).channels(0, 1), 0.0f);
  ColorMap color{random_image(16, 16, 4), MaskMap::ones(16, 16)};
};

TEST_F(AssembleBatch, NothingErased) {
  Rng rng(1);
  const EditBatch b = assemble_batch(image, MaskMap(H, W), sketch, color, rng);
  EXPECT_EQ(b.tensor().dim(1), 9);
  EXPECT_EQ(b.incomplete(), image);
  const std::vector<Tensor<float>> rest = {b.sketch(), b.color(), b.mask(), b.noise()};
  for (const auto& t : rest)
    for (float v : t.values()) EXPECT_EQ(v, 0.0f);
}

TEST_F(AssembleBatch, EverythingErased) {
  Rng rng(1);
  const EditBatch b = assemble_batch(image, MaskMap::ones(H, W), sketch, color, rng);
  const Tensor<float> incomplete = b.incomplete();
  for (float v : incomplete.values()) EXPECT_EQ(v, 0.0f);
  EXPECT_EQ(b.sketch(), sketch.tensor());
  EXPECT_EQ(b.color(), color.rgb());
}

TEST_F(AssembleBatch, RandomMaskPixelScan) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const MaskMap m = MaskMap::threshold(random_image(H, W, 100 + seed).channels(0, 1), 0.0f);
    Rng rng(seed);
    const EditBatch b = assemble_batch(image, m, sketch, color, rng);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x)
        for (int c = 0; c < 3; ++c) {
          if (m.at(y, x)) {
            ASSERT_EQ(b.tensor()(0, channel::kIncomplete + c, y, x), 0.0f);
          } else {
            ASSERT_EQ(b.tensor()(0, channel::kIncomplete + c, y, x), image(0, c, y, x));
            ASSERT_EQ(b.tensor()(0, channel::kColor + c, y, x), 0.0f);
            ASSERT_EQ(b.tensor()(0, channel::kNoise, y, x), 0.0f);
            ASSERT_EQ(b.tensor()(0, channel::kSketch, y, x), 0.0f);
          }
        }
    Rng again(seed);
    EXPECT_EQ(assemble_batch(image, m, sketch, color, again).tensor(), b.tensor());
  }
}

TEST_F(AssembleBatch, NoiseIsStandardNormalInsideMask) {
  Rng rng(5);
  const ImageTensor big = random_image(128, 128, 1);
  const EditBatch b = assemble_batch(big, MaskMap::ones(128, 128), SketchMap(128, 128), ColorMap::empty(128, 128), rng);
  double s = 0, s2 = 0;
  const Tensor<float> noise = b.noise();
  for (float v : noise.values()) s += v, s2 += double(v) * v;
  const double n = 128.0 * 128.0;
  EXPECT_NEAR(s / n, 0.0, 0.03);
  EXPECT_NEAR(s2 / n, 1.0, 0.05);
}

TEST_F(AssembleBatch, RejectsNonBinaryMaskAndSizeMismatch) {
  Rng rng(1);
  Tensor<float> bad(Shape{1, 1, H, W}, 0.0f);
  bad[3] = 0.5f;
  EXPECT_THROW(assemble_batch(image, bad, sketch, color, rng), std::invalid_argument);
  EXPECT_THROW(assemble_batch(image, MaskMap(H, W + 1), sketch, color, rng), ShapeError);
}

TEST(Record, LayoutAndRoundTrip) {
  Rng rng(7);
  const ImageTensor image = random_image(5, 6, 1);
  const MaskMap m = MaskMap::threshold(random_image(5, 6, 2).channels(0, 1), 0.0f);
  const EditBatch b = assemble_batch(image, m, SketchMap(5, 6), ColorMap::empty(5, 6), rng);
  std::stringstream ss;
  write_record(ss, b, image);
  const std::string bytes = ss.str();
  ASSERT_EQ(bytes.size(), 12u + 4u * 12u * 5u * 6u);
  EXPECT_EQ(bytes.substr(0, 4), "FEB1");
  EXPECT_EQ(bytes.substr(4, 8), std::string("\x05\0\0\0\x06\0\0\0", 8));
  float first;
  std::memcpy(&first, bytes.data() + 12, 4);  // little-endian host
  EXPECT_EQ(first, b.tensor()[0]);
  const Record r = read_record(ss);
  EXPECT_EQ(r.batch.tensor(), b.tensor());
  EXPECT_EQ(r.target, image);
  std::stringstream bad("FEB2xxxxxxxx");
  EXPECT_THROW(read_record(bad), std::runtime_error);
}

TEST(Build, WritesRecordsAndLayers) {
  const auto dir = std::filesystem::temp_directory_path() / "fegan_dataprep_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir / "in");
  for (int i = 0; i < 2; ++i) png::write_file(dir / "in" / ("img" + std::to_string(i) + ".png"), png::from_image(blob_image(40, 40, i)));
  const auto params = maskgen::MaskGenParams::defaults_for(32, 32);
  EXPECT_EQ(build_dataset(dir / "in", dir / "out", 32, 32, 5, params), 2);
  for (int i = 0; i < 2; ++i) {
    const std::string stem = "img" + std::to_string(i);
    const Record r = read_record(dir / "out" / (stem + ".feb"));
    EXPECT_EQ(r.batch.height(), 32);
    const MaskMap mask = png::to_binary<MaskTag>(png::read_file(dir / "out" / (stem + "_mask.png")));
    EXPECT_EQ(mask.tensor(), r.batch.mask());
    EXPECT_TRUE(std::filesystem::exists(dir / "out" / (stem + "_color.png")));
  }
  std::filesystem::remove_all(dir);
}
