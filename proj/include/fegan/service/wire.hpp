#pragma once

// Request wire format. Layers are PNG files, either as multipart form
// fields or base64 strings in a JSON object:
//
//   image   RGB 8-bit (alpha ignored)                       required
//   mask    gray 1- or 8-bit, >= 128 erases                 required
//   sketch  gray 8-bit, >= 128 is a stroke                  optional
//   color   RGBA, alpha > 0 marks stroke support            optional
//   seed    unsigned integer noise seed                     optional
//
// Pixel values map linearly onto [-1, 1].

#include <string>
#include <string_view>
#include <vector>

#include "fegan/core/png.hpp"
#include "fegan/service/model.hpp"
#include "json.hpp"

namespace fegan::service {

inline std::string base64_decode(std::string_view in) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+' || c == '-') return 62;
    if (c == '/' || c == '_') return 63;
    return -1;
  };
  // accept data URLs
  if (in.starts_with("data:")) {
    const auto comma = in.find(',');
    if (comma == std::string_view::npos) throw ServiceError(ErrorKind::kBadRequest, "malformed data URL");
    in.remove_prefix(comma + 1);
  }
  std::string out;
  unsigned buffer = 0;
  int bits = 0;
  for (char c : in) {
    if (c == '=' || c == '\n' || c == '\r' || c == ' ') continue;
    const int v = value(c);
    if (v < 0) throw ServiceError(ErrorKind::kBadRequest, "invalid base64 payload");
    buffer = (buffer << 6) | static_cast<unsigned>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<char>((buffer >> bits) & 0xFFu));
    }
  }
  return out;
}

inline std::string base64_encode(std::string_view in) {
  static constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  std::size_t i = 0;
  for (; i + 2 < in.size(); i += 3) {
    const unsigned v = (static_cast<unsigned char>(in[i]) << 16) | (static_cast<unsigned char>(in[i + 1]) << 8) |
                       static_cast<unsigned char>(in[i + 2]);
    for (int s : {18, 12, 6, 0}) out.push_back(kAlphabet[(v >> s) & 63]);
  }
  if (i < in.size()) {
    unsigned v = static_cast<unsigned char>(in[i]) << 16;
    if (i + 1 < in.size()) v |= static_cast<unsigned char>(in[i + 1]) << 8;
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(i + 1 < in.size() ? kAlphabet[(v >> 6) & 63] : '=');
    out.push_back('=');
  }
  return out;
}

/// Raw PNG bytes per layer; empty means absent.
struct WireLayers {
  std::string image, mask, sketch, color;
  std::optional<std::uint64_t> seed;
};

inline WireLayers layers_from_json(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw ServiceError(ErrorKind::kBadRequest, std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw ServiceError(ErrorKind::kBadRequest, "request body must be a JSON object");
  WireLayers w;
  auto layer = [&](const char* key) -> std::string {
    if (!j.contains(key) || j[key].is_null()) return {};
    if (!j[key].is_string()) throw ServiceError(ErrorKind::kBadRequest, std::string(key) + " must be a base64 string");
    return base64_decode(j[key].get<std::string>());
  };
  w.image = layer("image");
  w.mask = layer("mask");
  w.sketch = layer("sketch");
  w.color = layer("color");
  if (j.contains("seed") && !j["seed"].is_null()) {
    if (!j["seed"].is_number_unsigned() && !(j["seed"].is_number_integer() && j["seed"].get<std::int64_t>() >= 0))
      throw ServiceError(ErrorKind::kBadRequest, "seed must be a non-negative integer");
    w.seed = j["seed"].get<std::uint64_t>();
  }
  return w;
}

inline png::Raster decode_layer(const std::string& bytes, const char* name) {
  try {
    return png::decode(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
  } catch (const png::PngError& e) {
    throw ServiceError(ErrorKind::kBadRequest, std::string(name) + ": " + e.what());
  }
}

/// Decodes the layers. Missing sketch and color default to empty layers of
/// the image's size.
inline EditRequest request_from_layers(const WireLayers& w) {
  if (w.image.empty()) throw ServiceError(ErrorKind::kBadRequest, "missing image layer");
  if (w.mask.empty()) throw ServiceError(ErrorKind::kBadRequest, "missing mask layer");
  EditRequest r;
  const png::Raster img = decode_layer(w.image, "image");
  r.image = png::to_image(img);
  r.mask = png::to_binary<MaskTag>(decode_layer(w.mask, "mask"));
  r.sketch = w.sketch.empty() ? SketchMap(img.height, img.width) : png::to_binary<SketchTag>(decode_layer(w.sketch, "sketch"));
  r.color = w.color.empty() ? ColorMap::empty(img.height, img.width) : png::to_color_map(decode_layer(w.color, "color"));
  r.seed = w.seed;
  return r;
}

inline std::string encode_png(const ImageTensor& image) {
  const auto bytes = png::encode(png::from_image(image));
  return {bytes.begin(), bytes.end()};
}

}  // namespace fegan::service
