#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "fegan/core/archive.hpp"
#include "fegan/networks/params.hpp"
#include "fegan/trainer/config.hpp"

namespace fegan::train {

/// Adaptive moment estimation with bias correction, one moment pair per
/// parameter tensor of a ParamStore.
class Adam {
 public:
  Adam() = default;
  Adam(const AdamConfig& cfg, const nn::ParamStore<float>& params) : cfg_(cfg) {
    for (const auto& v : params.vars()) {
      m_.emplace_back(v.shape());
      v_.emplace_back(v.shape());
    }
  }

  const AdamConfig& config() const { return cfg_; }
  std::int64_t steps() const { return t_; }

  void step(nn::ParamStore<float>& params, const std::vector<ag::Var<float>>& grads) {
    require_shape(grads.size() == params.size() && m_.size() == params.size(), "optimizer/parameter count mismatch");
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const float b1 = static_cast<float>(cfg_.beta1), b2 = static_cast<float>(cfg_.beta2);
    const float step = static_cast<float>(cfg_.lr / c1), inv_c2 = static_cast<float>(1.0 / c2);
    const float eps = static_cast<float>(cfg_.eps);
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor<float>& p = ag::Var<float>(params.vars()[i]).mutable_value();
      const Tensor<float>& g = grads[i].value();
      require_shape(g.shape() == p.shape(), "gradient shape mismatch for " + params.names()[i]);
      Tensor<float>& m = m_[i];
      Tensor<float>& v = v_[i];
      for (std::int64_t k = 0; k < p.size(); ++k) {
        m[k] = b1 * m[k] + (1.0f - b1) * g[k];
        v[k] = b2 * v[k] + (1.0f - b2) * g[k] * g[k];
        p[k] -= step * m[k] / (std::sqrt(v[k] * inv_c2) + eps);
      }
    }
  }

  void save(TensorArchive& ar, const std::string& prefix, const nn::ParamStore<float>& params) const {
    for (std::size_t i = 0; i < m_.size(); ++i) {
      ar.put(prefix + "." + params.names()[i] + ".m", m_[i]);
      ar.put(prefix + "." + params.names()[i] + ".v", v_[i]);
    }
    ar.meta[prefix + ".t"] = t_;
  }

  void load(const TensorArchive& ar, const std::string& prefix, const nn::ParamStore<float>& params) {
    for (std::size_t i = 0; i < m_.size(); ++i) {
      m_[i] = checked(ar.get(prefix + "." + params.names()[i] + ".m"), m_[i].shape(), params.names()[i]);
      v_[i] = checked(ar.get(prefix + "." + params.names()[i] + ".v"), v_[i].shape(), params.names()[i]);
    }
    t_ = ar.meta.at(prefix + ".t").get<std::int64_t>();
  }

 private:
  static const Tensor<float>& checked(const Tensor<float>& t, const Shape& s, const std::string& name) {
    if (t.shape() != s) throw ArchiveError("optimizer state shape mismatch for " + name);
    return t;
  }

  AdamConfig cfg_;
  std::vector<Tensor<float>> m_, v_;
  std::int64_t t_ = 0;
};

}  // namespace fegan::train
