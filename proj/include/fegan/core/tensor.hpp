#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fegan {

/// Every tensor in the library is rank 4 (N, C, H, W). Lower-rank data uses
/// leading singleton dimensions, e.g. a matrix is (1, 1, rows, cols).
using Shape = std::array<int, 4>;

inline std::int64_t numel(const Shape& s) {
  return static_cast<std::int64_t>(s[0]) * s[1] * s[2] * s[3];
}

inline std::string to_string(const Shape& s) {
  std::ostringstream os;
  os << '(' << s[0] << ',' << s[1] << ',' << s[2] << ',' << s[3] << ')';
  return os.str();
}

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

/// Dense contiguous row-major NCHW storage.
template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() : shape_{0, 0, 0, 0} {}

  explicit Tensor(const Shape& shape, T fill = T(0)) : shape_(shape) {
    for (int d : shape) require_shape(d >= 0, "negative dimension in " + to_string(shape));
    data_.assign(static_cast<std::size_t>(numel(shape)), fill);
  }

  Tensor(const Shape& shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    require_shape(static_cast<std::int64_t>(data_.size()) == numel(shape),
                  "data size mismatch for shape " + to_string(shape));
  }

  static Tensor zeros(const Shape& s) { return Tensor(s, T(0)); }
  static Tensor ones(const Shape& s) { return Tensor(s, T(1)); }
  static Tensor scalar(T v) { return Tensor(Shape{1, 1, 1, 1}, v); }

  const Shape& shape() const noexcept { return shape_; }
  int dim(int i) const noexcept { return shape_[static_cast<std::size_t>(i)]; }
  std::int64_t size() const noexcept { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const noexcept { return data_.empty(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  std::int64_t offset(int n, int c, int h, int w) const noexcept {
    return ((static_cast<std::int64_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
  }
  T& operator()(int n, int c, int h, int w) noexcept { return data_[offset(n, c, h, w)]; }
  const T& operator()(int n, int c, int h, int w) const noexcept {
    return data_[offset(n, c, h, w)];
  }
  T& operator[](std::int64_t i) noexcept { return data_[static_cast<std::size_t>(i)]; }
  const T& operator[](std::int64_t i) const noexcept { return data_[static_cast<std::size_t>(i)]; }

  T item() const {
    require_shape(data_.size() == 1, "item() on non-scalar tensor " + to_string(shape_));
    return data_[0];
  }

  Tensor reshaped(const Shape& s) const {
    require_shape(numel(s) == size(), "cannot reshape " + to_string(shape_) + " to " + to_string(s));
    return Tensor(s, data_);
  }

  template <class U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.size());
    std::transform(data_.begin(), data_.end(), out.begin(), [](T v) { return static_cast<U>(v); });
    return Tensor<U>(shape_, std::move(out));
  }

  /// Copy of sample n as a (1, C, H, W) tensor.
  Tensor sample(int n) const {
    const std::int64_t per = static_cast<std::int64_t>(shape_[1]) * shape_[2] * shape_[3];
    Shape s{1, shape_[1], shape_[2], shape_[3]};
    return Tensor(s, std::vector<T>(data_.begin() + n * per, data_.begin() + (n + 1) * per));
  }

  /// Copy of channels [start, start + count).
  Tensor channels(int start, int count) const {
    require_shape(start >= 0 && count >= 0 && start + count <= shape_[1], "channel range out of bounds");
    Tensor out(Shape{shape_[0], count, shape_[2], shape_[3]});
    const std::int64_t plane = static_cast<std::int64_t>(shape_[2]) * shape_[3];
    for (int n = 0; n < shape_[0]; ++n)
      std::copy_n(data_.begin() + offset(n, start, 0, 0), count * plane,
                  out.data_.begin() + out.offset(n, 0, 0, 0));
    return out;
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

/// Concatenate along the batch dimension.
template <class T>
Tensor<T> stack_batch(std::span<const Tensor<T>> parts) {
  require_shape(!parts.empty(), "stack_batch of nothing");
  Shape s = parts.front().shape();
  s[0] = 0;
  std::vector<T> data;
  for (const auto& p : parts) {
    require_shape(p.dim(1) == s[1] && p.dim(2) == s[2] && p.dim(3) == s[3],
                  "stack_batch shape mismatch " + to_string(p.shape()));
    s[0] += p.dim(0);
    data.insert(data.end(), p.storage().begin(), p.storage().end());
  }
  return Tensor<T>(s, std::move(data));
}

/// Concatenate along the channel dimension.
template <class T>
Tensor<T> concat_channels(std::span<const Tensor<T>> parts) {
  require_shape(!parts.empty(), "concat_channels of nothing");
  Shape s = parts.front().shape();
  s[1] = 0;
  for (const auto& p : parts) {
    require_shape(p.dim(0) == s[0] && p.dim(2) == s[2] && p.dim(3) == s[3],
                  "concat_channels shape mismatch " + to_string(p.shape()));
    s[1] += p.dim(1);
  }
  Tensor<T> out(s);
  const std::int64_t plane = static_cast<std::int64_t>(s[2]) * s[3];
  for (int n = 0; n < s[0]; ++n) {
    int c0 = 0;
    for (const auto& p : parts) {
      std::copy_n(p.data() + p.offset(n, 0, 0, 0), p.dim(1) * plane, out.data() + out.offset(n, c0, 0, 0));
      c0 += p.dim(1);
    }
  }
  return out;
}

}  // namespace fegan
