#pragma once

// Directory-level preparation: load source images with their landmarks,
// precompute domains, and write records plus PNG layers.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fegan/core/png.hpp"
#include "fegan/dataprep/batch.hpp"
#include "fegan/dataprep/color.hpp"
#include "fegan/dataprep/sketch.hpp"

namespace fegan::dataprep {

struct DomainParams {
  SketchParams sketch;
  CannyParams edges;
  ColorParams color;
  int segments = 8;
  std::uint64_t segment_seed = 0;
};

inline SourceImage prepare_source(ImageTensor image, maskgen::Landmarks landmarks, const DomainParams& p = {}) {
  SourceImage s;
  s.sketch = extract_sketch(image, CannyEdgeBackend(p.edges), p.sketch);
  s.color = extract_color_domain(image, KMeansSegmenter(p.segments, p.segment_seed), p.color);
  s.image = std::move(image);
  s.landmarks = std::move(landmarks);
  return s;
}

/// Nearest-neighbour resampling of a binary map.
template <class Tag>
BinaryMap<Tag> resize_nearest(const BinaryMap<Tag>& m, int height, int width) {
  BinaryMap<Tag> out(height, width);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      out.set(y, x, m.at(std::min(m.height() - 1, y * m.height() / height), std::min(m.width() - 1, x * m.width() / width)));
  return out;
}

/// Sidecars next to `image.png`: `image.eyes` with one "x y" pair per line in
/// source pixel coordinates, and `image_hair.png`. Missing eyes fall back to
/// synthetic landmarks; a missing hair file means no hair region.
inline maskgen::Landmarks load_landmarks(const std::filesystem::path& image_path, int src_h, int src_w, int height,
                                         int width) {
  const auto eyes = std::filesystem::path(image_path).replace_extension(".eyes");
  const auto hair = image_path.parent_path() / (image_path.stem().string() + "_hair.png");
  if (!std::filesystem::exists(eyes)) {
    maskgen::Landmarks lm = maskgen::synthetic_landmarks(height, width);
    if (std::filesystem::exists(hair)) lm.hair_mask = resize_nearest(png::to_binary<MaskTag>(png::read_file(hair)), height, width);
    return lm;
  }
  maskgen::Landmarks lm;
  std::ifstream in(eyes);
  double x, y;
  while (in >> x >> y)
    lm.eye_positions.push_back({std::clamp(std::round(x * width / src_w), 0.0, width - 1.0),
                                std::clamp(std::round(y * height / src_h), 0.0, height - 1.0)});
  if (std::filesystem::exists(hair)) lm.hair_mask = resize_nearest(png::to_binary<MaskTag>(png::read_file(hair)), height, width);
  return lm;
}

/// Source PNGs in a directory, sorted by name; sidecar hair masks are skipped.
inline std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().extension() != ".png") continue;
    const std::string stem = e.path().stem().string();
    if (stem.size() > 5 && stem.ends_with("_hair")) continue;
    out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline SourceImage load_source(const std::filesystem::path& path, int height, int width, const DomainParams& p = {}) {
  const png::Raster r = png::read_file(path);
  ImageTensor image = resize_bilinear(png::to_image(r), height, width);
  return prepare_source(std::move(image), load_landmarks(path, r.height, r.width, height, width), p);
}

inline std::vector<SourceImage> load_source_dir(const std::filesystem::path& dir, int height, int width,
                                                const DomainParams& p = {}) {
  std::vector<SourceImage> out;
  for (const auto& path : list_images(dir)) out.push_back(load_source(path, height, width, p));
  if (out.empty()) throw std::runtime_error("no PNG images in " + dir.string());
  return out;
}

/// Per image: `<stem>.feb` plus `<stem>_mask.png` (1-bit), `<stem>_sketch.png`
/// (1-bit) and `<stem>_color.png` (RGBA strokes). Image i draws its sample
/// from a stream derived from (seed, i). Returns the number of images.
inline int build_dataset(const std::filesystem::path& input_dir, const std::filesystem::path& out_dir, int height,
                         int width, std::uint64_t seed, const maskgen::MaskGenParams& mask_params,
                         const DomainParams& p = {}) {
  std::filesystem::create_directories(out_dir);
  const auto paths = list_images(input_dir);
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const SourceImage src = load_source(paths[i], height, width, p);
    Rng rng(Rng::derive(seed, i));
    const TrainingExample ex = make_training_example(rng, src, mask_params);
    const std::string stem = paths[i].stem().string();
    write_record(out_dir / (stem + ".feb"), ex.batch, ex.target);
    png::write_file(out_dir / (stem + "_mask.png"), png::from_binary(ex.mask), 1);
    png::write_file(out_dir / (stem + "_sketch.png"), png::from_binary(SketchMap::from_tensor(ex.batch.sketch())), 1);
    png::write_file(out_dir / (stem + "_color.png"), png::from_color_map(ex.strokes));
  }
  return static_cast<int>(paths.size());
}

}  // namespace fegan::dataprep
