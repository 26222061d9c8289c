#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "fegan/core/autograd.hpp"
#include "fegan/core/kernels.hpp"
#include "fegan/core/rng.hpp"

namespace fegan::nn {

using ag::Var;
using kernels::ConvGeometry;

/// Named trainable tensors in insertion order. Names are stable so they can
/// key checkpoint blobs.
template <class T>
class ParamStore {
 public:
  Var<T> add(const std::string& name, Tensor<T> value) {
    if (index_.contains(name)) throw std::logic_error("duplicate parameter name " + name);
    index_[name] = vars_.size();
    names_.push_back(name);
    vars_.push_back(ag::parameter(std::move(value)));
    return vars_.back();
  }

  const Var<T>& get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
    return vars_[it->second];
  }
  bool has(const std::string& name) const { return index_.contains(name); }

  const std::vector<std::string>& names() const { return names_; }
  const std::vector<Var<T>>& vars() const { return vars_; }
  std::size_t size() const { return vars_.size(); }

  std::int64_t scalar_count() const {
    std::int64_t n = 0;
    for (const auto& v : vars_) n += v.size();
    return n;
  }

  /// Overwrites a parameter's value in place; the shape must match.
  void assign(const std::string& name, const Tensor<T>& value) {
    Var<T> v = get(name);
    require_shape(v.shape() == value.shape(), "parameter " + name + " expects " + to_string(v.shape()) + ", got " +
                                                   to_string(value.shape()));
    v.mutable_value() = value;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Var<T>> vars_;
  std::map<std::string, std::size_t> index_;
};

/// Normal weights scaled by sqrt(2 / fan_in).
template <class T>
Tensor<T> he_normal(Rng& rng, const Shape& shape, int fan_in) {
  Tensor<T> t(shape);
  const double std = std::sqrt(2.0 / std::max(1, fan_in));
  for (auto& v : t.values()) v = static_cast<T>(std * rng.normal());
  return t;
}

}  // namespace fegan::nn
