#pragma once

// The 9-channel generator input and its on-disk record.

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "fegan/core/rng.hpp"
#include "fegan/maskgen.hpp"

namespace fegan::dataprep {

/// Channel layout of the (N, 9, H, W) input stack.
namespace channel {
inline constexpr int kIncomplete = 0;  // 3 channels
inline constexpr int kSketch = 3;
inline constexpr int kColor = 4;  // 3 channels
inline constexpr int kMask = 7;
inline constexpr int kNoise = 8;
inline constexpr int kCount = 9;
}  // namespace channel

class EditBatch {
 public:
  EditBatch() = default;
  explicit EditBatch(Tensor<float> stack) : stack_(std::move(stack)) {
    require_shape(stack_.dim(1) == channel::kCount, "edit batch needs 9 channels, got " + to_string(stack_.shape()));
  }

  const Tensor<float>& tensor() const { return stack_; }
  int batch() const { return stack_.dim(0); }
  int height() const { return stack_.dim(2); }
  int width() const { return stack_.dim(3); }

  Tensor<float> incomplete() const { return stack_.channels(channel::kIncomplete, 3); }
  Tensor<float> sketch() const { return stack_.channels(channel::kSketch, 1); }
  Tensor<float> color() const { return stack_.channels(channel::kColor, 3); }
  Tensor<float> mask() const { return stack_.channels(channel::kMask, 1); }
  Tensor<float> noise() const { return stack_.channels(channel::kNoise, 1); }

 private:
  Tensor<float> stack_;
};

/// incomplete = image * (1 - M); sketch, color and a standard normal noise
/// plane are multiplied by M. Noise is drawn in row-major pixel order.
inline EditBatch assemble_batch(const ImageTensor& image, const MaskMap& mask, const SketchMap& sketch,
                                const ColorMap& color, Rng& rng) {
  const int H = mask.height(), W = mask.width();
  require_shape(image.dim(0) == 1 && image.dim(1) == 3 && image.dim(2) == H && image.dim(3) == W,
                "assemble_batch: image " + to_string(image.shape()) + " does not match the mask");
  require_shape(sketch.height() == H && sketch.width() == W, "assemble_batch: sketch size mismatch");
  require_shape(color.height() == H && color.width() == W, "assemble_batch: color size mismatch");
  Tensor<float> s(Shape{1, channel::kCount, H, W});
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const bool m = mask.at(y, x);
      for (int c = 0; c < 3; ++c) {
        s(0, channel::kIncomplete + c, y, x) = m ? 0.0f : image(0, c, y, x);
        s(0, channel::kColor + c, y, x) = m && color.support().at(y, x) ? color.rgb()(0, c, y, x) : 0.0f;
      }
      s(0, channel::kSketch, y, x) = m && sketch.at(y, x) ? 1.0f : 0.0f;
      s(0, channel::kMask, y, x) = m ? 1.0f : 0.0f;
      const float z = static_cast<float>(rng.normal());
      s(0, channel::kNoise, y, x) = m ? z : 0.0f;
    }
  return EditBatch(std::move(s));
}

/// Same, for a mask given as a raw tensor; rejects values other than 0 and 1.
inline EditBatch assemble_batch(const ImageTensor& image, const Tensor<float>& mask, const SketchMap& sketch,
                                const ColorMap& color, Rng& rng) {
  return assemble_batch(image, MaskMap::from_tensor(mask), sketch, color, rng);
}

/// Precomputed per-image domains.
struct SourceImage {
  ImageTensor image;
  SketchMap sketch;
  ColorMap color;
  maskgen::Landmarks landmarks;
};

struct TrainingExample {
  EditBatch batch;
  ImageTensor target;
  MaskMap mask;
  ColorMap strokes;  // already restricted to the mask
};

/// Color strokes as a user would brush them: the color domain restricted to
/// thinner free-form strokes.
inline ColorMap synthesize_color_strokes(Rng& rng, const ColorMap& domain, const maskgen::MaskGenParams& mask_params) {
  maskgen::MaskGenParams p = mask_params;
  p.stroke_thickness = std::max(1, mask_params.stroke_thickness / 2);
  p.eye_line_count = 0;
  p.hair_mask_probability = 0;
  const MaskMap strokes = maskgen::generate_free_form_mask(rng, domain.height(), domain.width(), {}, p);
  return domain.masked(strokes);
}

/// Fresh mask, color strokes and noise for one sample, in that rng order.
inline TrainingExample make_training_example(Rng& rng, const SourceImage& src, const maskgen::MaskGenParams& mask_params) {
  const int H = src.image.dim(2), W = src.image.dim(3);
  const MaskMap mask = maskgen::generate_free_form_mask(rng, H, W, src.landmarks, mask_params);
  const ColorMap strokes = synthesize_color_strokes(rng, src.color, mask_params).masked(mask);
  EditBatch batch = assemble_batch(src.image, mask, src.sketch, strokes, rng);
  return {std::move(batch), src.image, mask, strokes};
}

// ------------------------------------------------------------------ record
// "FEB1", H and W as u32, the 9 input planes then the 3 target planes, all
// little-endian, float32.

struct Record {
  EditBatch batch;
  ImageTensor target;
};

namespace detail {
inline void put_u32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}
inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("truncated record");
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}
inline void put_floats(std::ostream& os, const Tensor<float>& t) {
  for (float f : t.values()) put_u32(os, std::bit_cast<std::uint32_t>(f));
}
inline void get_floats(std::istream& is, Tensor<float>& t) {
  for (float& f : t.values()) f = std::bit_cast<float>(get_u32(is));
}
}  // namespace detail

inline void write_record(std::ostream& os, const EditBatch& batch, const ImageTensor& target) {
  require_shape(batch.batch() == 1, "records hold a single sample");
  require_shape(target.shape() == Shape{1, 3, batch.height(), batch.width()}, "record target size mismatch");
  os.write("FEB1", 4);
  detail::put_u32(os, static_cast<std::uint32_t>(batch.height()));
  detail::put_u32(os, static_cast<std::uint32_t>(batch.width()));
  detail::put_floats(os, batch.tensor());
  detail::put_floats(os, target);
  if (!os) throw std::runtime_error("record write failed");
}

inline Record read_record(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "FEB1", 4) != 0) throw std::runtime_error("not a FEB1 record");
  const auto h = detail::get_u32(is), w = detail::get_u32(is);
  if (h == 0 || w == 0 || h > 16384 || w > 16384) throw std::runtime_error("implausible record size");
  Tensor<float> stack(Shape{1, channel::kCount, static_cast<int>(h), static_cast<int>(w)});
  ImageTensor target = make_image(static_cast<int>(h), static_cast<int>(w));
  detail::get_floats(is, stack);
  detail::get_floats(is, target);
  return {EditBatch(std::move(stack)), std::move(target)};
}

inline void write_record(const std::filesystem::path& path, const EditBatch& batch, const ImageTensor& target) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  write_record(os, batch, target);
}

inline Record read_record(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return read_record(is);
}

}  // namespace fegan::dataprep
