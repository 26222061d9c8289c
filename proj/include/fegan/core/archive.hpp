#pragma once

// Named float32 tensor container used for checkpoints and weight files.
//
//   magic      "FEGANCKPT\x01" (10 bytes)
//   u64 LE     header length in bytes
//   header     UTF-8 JSON: {"meta": {...}, "tensors": [{"name", "shape",
//              "offset", "count"}, ...]}; offsets count floats from the
//              start of the blob section
//   blobs      float32 little-endian, in header order

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "fegan/core/tensor.hpp"

namespace fegan {

class ArchiveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kArchiveMagic[10] = {'F', 'E', 'G', 'A', 'N', 'C', 'K', 'P', 'T', '\x01'};

class TensorArchive {
 public:
  nlohmann::json meta = nlohmann::json::object();

  void put(const std::string& name, const Tensor<float>& t) {
    if (index_.contains(name)) throw ArchiveError("duplicate tensor " + name);
    index_[name] = tensors_.size();
    tensors_.emplace_back(name, t);
  }
  bool has(const std::string& name) const { return index_.contains(name); }
  const Tensor<float>& get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ArchiveError("missing tensor " + name);
    return tensors_[it->second].second;
  }
  const std::vector<std::pair<std::string, Tensor<float>>>& tensors() const { return tensors_; }

  void write(std::ostream& os) const {
    nlohmann::json index = nlohmann::json::array();
    std::int64_t offset = 0;
    for (const auto& [name, t] : tensors_) {
      index.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}, {"count", t.size()}});
      offset += t.size();
    }
    const std::string header = nlohmann::json{{"meta", meta}, {"tensors", index}}.dump();
    os.write(kArchiveMagic, sizeof kArchiveMagic);
    put_u64(os, header.size());
    os.write(header.data(), static_cast<std::streamsize>(header.size()));
    std::vector<char> buf;
    for (const auto& [name, t] : tensors_) {
      buf.resize(static_cast<std::size_t>(t.size()) * 4);
      for (std::int64_t i = 0; i < t.size(); ++i) store_le(buf.data() + 4 * i, std::bit_cast<std::uint32_t>(t[i]));
      os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    }
    if (!os) throw ArchiveError("archive write failed");
  }

  static TensorArchive read(std::istream& is) {
    char magic[sizeof kArchiveMagic];
    if (!is.read(magic, sizeof magic) || std::memcmp(magic, kArchiveMagic, sizeof magic) != 0)
      throw ArchiveError("bad archive magic");
    const std::uint64_t len = get_u64(is);
    if (len > (1ull << 30)) throw ArchiveError("archive header too large");
    std::string header(len, '\0');
    if (!is.read(header.data(), static_cast<std::streamsize>(len))) throw ArchiveError("truncated archive header");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(header);
    } catch (const nlohmann::json::exception& e) {
      throw ArchiveError(std::string("archive header is not JSON: ") + e.what());
    }
    TensorArchive a;
    a.meta = j.value("meta", nlohmann::json::object());
    std::int64_t expected = 0;
    std::vector<char> buf;
    for (const auto& e : j.at("tensors")) {
      const Shape s = e.at("shape").get<Shape>();
      const std::int64_t count = e.at("count").get<std::int64_t>();
      if (e.at("offset").get<std::int64_t>() != expected || count != numel(s))
        throw ArchiveError("inconsistent archive index at " + e.at("name").get<std::string>());
      Tensor<float> t(s);
      buf.resize(static_cast<std::size_t>(count) * 4);
      if (!is.read(buf.data(), static_cast<std::streamsize>(buf.size()))) throw ArchiveError("truncated archive blobs");
      for (std::int64_t i = 0; i < count; ++i) t[i] = std::bit_cast<float>(load_le(buf.data() + 4 * i));
      a.put(e.at("name").get<std::string>(), t);
      expected += count;
    }
    return a;
  }

  void save(const std::filesystem::path& path) const {
    // Write to a sibling file first so a crash never leaves a torn archive.
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
      std::ofstream os(tmp, std::ios::binary);
      if (!os) throw ArchiveError("cannot write " + tmp.string());
      write(os);
    }
    std::filesystem::rename(tmp, path);
  }

  static TensorArchive load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ArchiveError("cannot open " + path.string());
    return read(is);
  }

 private:
  static void store_le(char* p, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) p[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  }
  static std::uint32_t load_le(const char* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
  }
  static void put_u64(std::ostream& os, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 8);
  }
  static std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) throw ArchiveError("truncated archive");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }

  std::vector<std::pair<std::string, Tensor<float>>> tensors_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace fegan
