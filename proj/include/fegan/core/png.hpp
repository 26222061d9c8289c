#pragma once

#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fegan/core/image.hpp"

namespace fegan::png {

class PngError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 8-bit interleaved pixels; channels is 1 (gray), 3 (RGB) or 4 (RGBA).
struct Raster {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

namespace detail {

struct ReadCursor {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
};

inline void on_error(png_structp p, png_const_charp msg) {
  auto* buf = static_cast<char*>(png_get_error_ptr(p));
  std::strncpy(buf, msg, 255);
  buf[255] = '\0';
  png_longjmp(p, 1);
}
inline void on_warning(png_structp, png_const_charp) {}

inline void read_bytes(png_structp p, png_bytep out, png_size_t n) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(p));
  if (cur->pos + n > cur->bytes.size()) png_error(p, "truncated PNG data");
  std::memcpy(out, cur->bytes.data() + cur->pos, n);
  cur->pos += n;
}

inline void write_bytes(png_structp p, png_bytep in, png_size_t n) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(p));
  out->insert(out->end(), in, in + n);
}
inline void flush_bytes(png_structp) {}

}  // namespace detail

/// Decodes any PNG into 8-bit gray, RGB or RGBA (palette and low bit depths
/// are expanded; 16-bit is reduced).
inline Raster decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw PngError("not a PNG stream");
  char message[256] = "PNG decode failed";
  png_structp p = png_create_read_struct(PNG_LIBPNG_VER_STRING, message, detail::on_error, detail::on_warning);
  if (!p) throw PngError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(p);
  detail::ReadCursor cursor{bytes, 0};
  Raster r;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(p))) {
    png_destroy_read_struct(&p, &info, nullptr);
    throw PngError(message);
  }
  png_set_read_fn(p, &cursor, detail::read_bytes);
  png_read_info(p, info);
  const png_byte color = png_get_color_type(p, info);
  const png_byte depth = png_get_bit_depth(p, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(p);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(p);
  if (png_get_valid(p, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(p);
  if (depth == 16) png_set_strip_16(p);
  if (color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_strip_alpha(p);
  png_read_update_info(p, info);
  r.width = static_cast<int>(png_get_image_width(p, info));
  r.height = static_cast<int>(png_get_image_height(p, info));
  r.channels = png_get_channels(p, info);
  r.pixels.resize(static_cast<std::size_t>(r.width) * r.height * r.channels);
  rows.resize(static_cast<std::size_t>(r.height));
  for (int y = 0; y < r.height; ++y) rows[static_cast<std::size_t>(y)] = r.pixels.data() + static_cast<std::size_t>(y) * r.width * r.channels;
  png_read_image(p, rows.data());
  png_read_end(p, nullptr);
  png_destroy_read_struct(&p, &info, nullptr);
  return r;
}

/// Encodes 8-bit pixels. With bit_depth 1 (gray only) a pixel is white when
/// its value is >= 128.
inline std::vector<std::uint8_t> encode(const Raster& r, int bit_depth = 8) {
  if (r.channels != 1 && r.channels != 3 && r.channels != 4) throw PngError("unsupported channel count");
  if (bit_depth != 8 && !(bit_depth == 1 && r.channels == 1)) throw PngError("1-bit output needs a gray raster");
  std::vector<std::uint8_t> out;
  char message[256] = "PNG encode failed";
  png_structp p = png_create_write_struct(PNG_LIBPNG_VER_STRING, message, detail::on_error, detail::on_warning);
  if (!p) throw PngError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(p);
  std::vector<std::uint8_t> packed;
  std::vector<png_bytep> rows(static_cast<std::size_t>(r.height));
  if (setjmp(png_jmpbuf(p))) {
    png_destroy_write_struct(&p, &info);
    throw PngError(message);
  }
  png_set_write_fn(p, &out, detail::write_bytes, detail::flush_bytes);
  const int color = r.channels == 1 ? PNG_COLOR_TYPE_GRAY : r.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_RGBA;
  png_set_IHDR(p, info, static_cast<png_uint_32>(r.width), static_cast<png_uint_32>(r.height), bit_depth, color,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(p, info);
  if (bit_depth == 1) {
    const std::size_t stride = (static_cast<std::size_t>(r.width) + 7) / 8;
    packed.assign(stride * r.height, 0);
    for (int y = 0; y < r.height; ++y)
      for (int x = 0; x < r.width; ++x)
        if (r.at(y, x, 0) >= 128) packed[y * stride + x / 8] |= static_cast<std::uint8_t>(0x80u >> (x % 8));
    for (int y = 0; y < r.height; ++y) rows[static_cast<std::size_t>(y)] = packed.data() + y * stride;
  } else {
    for (int y = 0; y < r.height; ++y)
      rows[static_cast<std::size_t>(y)] =
          const_cast<png_bytep>(r.pixels.data() + static_cast<std::size_t>(y) * r.width * r.channels);
  }
  png_write_image(p, rows.data());
  png_write_end(p, nullptr);
  png_destroy_write_struct(&p, &info);
  return out;
}

inline Raster read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PngError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode(bytes);
}

inline void write_file(const std::filesystem::path& path, const Raster& r, int bit_depth = 8) {
  const auto bytes = encode(r, bit_depth);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PngError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// ------------------------------------------------------------- conversions
// 8-bit values map linearly onto [-1, 1]: v / 127.5 - 1.

inline float to_unit(std::uint8_t v) { return static_cast<float>(v) / 127.5f - 1.0f; }
inline std::uint8_t from_unit(float v) {
  const float s = std::round((std::clamp(v, -1.0f, 1.0f) + 1.0f) * 127.5f);
  return static_cast<std::uint8_t>(s);
}

/// RGB (or gray replicated to RGB) image in [-1, 1]; alpha is ignored.
inline ImageTensor to_image(const Raster& r) {
  ImageTensor t = make_image(r.height, r.width, 3);
  for (int y = 0; y < r.height; ++y)
    for (int x = 0; x < r.width; ++x)
      for (int c = 0; c < 3; ++c) t(0, c, y, x) = to_unit(r.at(y, x, r.channels >= 3 ? c : 0));
  return t;
}

inline Raster from_image(const ImageTensor& t) {
  Raster r{t.dim(3), t.dim(2), 3, {}};
  r.pixels.resize(static_cast<std::size_t>(r.width) * r.height * 3);
  for (int y = 0; y < r.height; ++y)
    for (int x = 0; x < r.width; ++x)
      for (int c = 0; c < 3; ++c) r.pixels[(static_cast<std::size_t>(y) * r.width + x) * 3 + c] = from_unit(t(0, c, y, x));
  return r;
}

/// Gray (first channel) thresholded at 128.
template <class Tag>
BinaryMap<Tag> to_binary(const Raster& r) {
  BinaryMap<Tag> m(r.height, r.width);
  for (int y = 0; y < r.height; ++y)
    for (int x = 0; x < r.width; ++x) m.set(y, x, r.at(y, x, 0) >= 128);
  return m;
}

template <class Tag>
Raster from_binary(const BinaryMap<Tag>& m) {
  Raster r{m.width(), m.height(), 1, {}};
  r.pixels.resize(static_cast<std::size_t>(r.width) * r.height);
  for (int y = 0; y < r.height; ++y)
    for (int x = 0; x < r.width; ++x) r.pixels[static_cast<std::size_t>(y) * r.width + x] = m.at(y, x) ? 255 : 0;
  return r;
}

/// RGBA color strokes: alpha > 0 marks stroke support.
inline ColorMap to_color_map(const Raster& r) {
  ImageTensor rgb = make_image(r.height, r.width, 3);
  MaskMap support(r.height, r.width);
  for (int y = 0; y < r.height; ++y)
    for (int x = 0; x < r.width; ++x) {
      const bool on = r.channels == 4 ? r.at(y, x, 3) > 0 : true;
      support.set(y, x, on);
      for (int c = 0; c < 3; ++c) rgb(0, c, y, x) = to_unit(r.at(y, x, r.channels >= 3 ? c : 0));
    }
  return ColorMap(std::move(rgb), std::move(support));
}

inline Raster from_color_map(const ColorMap& m) {
  Raster r{m.width(), m.height(), 4, {}};
  r.pixels.resize(static_cast<std::size_t>(r.width) * r.height * 4);
  for (int y = 0; y < r.height; ++y)
    for (int x = 0; x < r.width; ++x) {
      std::uint8_t* px = &r.pixels[(static_cast<std::size_t>(y) * r.width + x) * 4];
      const bool on = m.support().at(y, x);
      for (int c = 0; c < 3; ++c) px[c] = on ? from_unit(m.rgb()(0, c, y, x)) : 0;
      px[3] = on ? 255 : 0;
    }
  return r;
}

}  // namespace fegan::png
