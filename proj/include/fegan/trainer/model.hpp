#pragma once

// Trainable state (both networks, their optimizers and the step counter) and
// its checkpoint form.

#include <filesystem>
#include <string>

#include "fegan/core/archive.hpp"
#include "fegan/networks.hpp"
#include "fegan/trainer/adam.hpp"
#include "fegan/trainer/config.hpp"

namespace fegan::train {

inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public ArchiveError {
 public:
  using ArchiveError::ArchiveError;
};

inline nlohmann::json to_json(const nn::GeneratorConfig& g) {
  return {{"baseWidth", g.base_width},  {"widthCap", g.width_cap},         {"depth", g.depth},
          {"dilationRates", g.dilation_rates}, {"leakySlope", g.leaky_slope}};
}
inline nlohmann::json to_json(const nn::DiscriminatorConfig& d) {
  return {{"baseWidth", d.base_width}, {"widthCap", d.width_cap}, {"layers", d.layers}, {"leakySlope", d.leaky_slope},
          {"powerIterations", d.power_iterations}};
}
inline nn::GeneratorConfig generator_config_from_json(const nlohmann::json& j) {
  nn::GeneratorConfig g;
  g.base_width = j.at("baseWidth");
  g.width_cap = j.at("widthCap");
  g.depth = j.at("depth");
  g.dilation_rates = j.at("dilationRates").get<std::vector<int>>();
  g.leaky_slope = j.at("leakySlope");
  return g;
}
inline nn::DiscriminatorConfig discriminator_config_from_json(const nlohmann::json& j) {
  nn::DiscriminatorConfig d;
  d.base_width = j.at("baseWidth");
  d.width_cap = j.at("widthCap");
  d.layers = j.at("layers");
  d.leaky_slope = j.at("leakySlope");
  d.power_iterations = j.at("powerIterations");
  return d;
}

struct Model {
  nn::Generator<float> gen;
  nn::Discriminator<float> dis;
  Adam opt_g, opt_d;
  std::int64_t step = 0;
  int height = 0, width = 0;  // training resolution

  explicit Model(const TrainConfig& cfg)
      : gen(cfg.generator, Rng::derive(cfg.seed, 101)),
        dis(cfg.discriminator, Rng::derive(cfg.seed, 102)),
        opt_g(cfg.adam_g, gen.params()),
        opt_d(cfg.adam_d, dis.params()),
        height(cfg.height),
        width(cfg.width) {}

  Model(const nn::GeneratorConfig& g, const nn::DiscriminatorConfig& d, const AdamConfig& ag_cfg,
        const AdamConfig& ad_cfg, int h, int w)
      : gen(g), dis(d), opt_g(ag_cfg, gen.params()), opt_d(ad_cfg, dis.params()), height(h), width(w) {}
};

namespace detail {
inline void assign_checked(nn::ParamStore<float>& store, const TensorArchive& ar) {
  for (const auto& name : store.names()) {
    const Tensor<float>& t = ar.get(name);
    if (t.shape() != store.get(name).shape())
      throw CheckpointError("checkpoint tensor " + name + " has shape " + to_string(t.shape()) + ", expected " +
                            to_string(store.get(name).shape()));
    store.assign(name, t);
  }
}
}  // namespace detail

/// Writes parameters, spectral vectors, optimizer moments, the step and an
/// echo of the training config. `config_text` may be empty.
inline TensorArchive to_archive(const Model& m, const std::string& config_text = {}) {
  TensorArchive ar;
  ar.meta["format"] = "fegan-model";
  ar.meta["version"] = kCheckpointVersion;
  ar.meta["step"] = m.step;
  ar.meta["imageSize"] = {m.height, m.width};
  ar.meta["generator"] = to_json(m.gen.config());
  ar.meta["discriminator"] = to_json(m.dis.config());
  ar.meta["config"] = config_text;
  for (const nn::ParamStore<float>* store : {&m.gen.params(), &m.dis.params()})
    for (std::size_t i = 0; i < store->size(); ++i) ar.put(store->names()[i], store->vars()[i].value());
  nlohmann::json updates = nlohmann::json::array();
  for (std::size_t i = 0; i < m.dis.spectral_state().size(); ++i) {
    const auto& s = m.dis.spectral_state()[i];
    ar.put(m.dis.layer_name(i) + ".sn_u", s.u);
    ar.put(m.dis.layer_name(i) + ".sn_v", s.v);
    updates.push_back(s.updates);
  }
  ar.meta["spectralUpdates"] = updates;
  m.opt_g.save(ar, "adam.g", m.gen.params());
  m.opt_d.save(ar, "adam.d", m.dis.params());
  const auto& ag_cfg = m.opt_g.config();
  const auto& ad_cfg = m.opt_d.config();
  ar.meta["adam"] = {{"g", {ag_cfg.lr, ag_cfg.beta1, ag_cfg.beta2, ag_cfg.eps}},
                     {"d", {ad_cfg.lr, ad_cfg.beta1, ad_cfg.beta2, ad_cfg.eps}}};
  return ar;
}

inline void check_header(const TensorArchive& ar) {
  if (ar.meta.value("format", std::string()) != "fegan-model") throw CheckpointError("not a model checkpoint");
  const int version = ar.meta.value("version", -1);
  if (version != kCheckpointVersion)
    throw CheckpointError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
}

inline Model from_archive(const TensorArchive& ar) {
  check_header(ar);
  try {
    auto adam_cfg = [&](const char* which) {
      const auto& a = ar.meta.at("adam").at(which);
      return AdamConfig{a.at(0), a.at(1), a.at(2), a.at(3)};
    };
    const auto size = ar.meta.at("imageSize");
    Model m(generator_config_from_json(ar.meta.at("generator")),
            discriminator_config_from_json(ar.meta.at("discriminator")), adam_cfg("g"), adam_cfg("d"), size.at(0),
            size.at(1));
    detail::assign_checked(m.gen.params(), ar);
    detail::assign_checked(m.dis.params(), ar);
    const auto& updates = ar.meta.at("spectralUpdates");
    for (std::size_t i = 0; i < m.dis.spectral_state().size(); ++i) {
      auto& s = m.dis.spectral_state()[i];
      const Tensor<float>& u = ar.get(m.dis.layer_name(i) + ".sn_u");
      const Tensor<float>& v = ar.get(m.dis.layer_name(i) + ".sn_v");
      if (u.shape() != s.u.shape() || v.shape() != s.v.shape())
        throw CheckpointError("spectral state shape mismatch in " + m.dis.layer_name(i));
      s.u = u;
      s.v = v;
      s.updates = updates.at(i);
    }
    m.opt_g.load(ar, "adam.g", m.gen.params());
    m.opt_d.load(ar, "adam.d", m.dis.params());
    m.step = ar.meta.at("step");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("checkpoint does not match its config: ") + e.what());
  }
}

inline void save_checkpoint(const Model& m, const std::filesystem::path& path, const std::string& config_text = {}) {
  to_archive(m, config_text).save(path);
}

/// Throws ArchiveError (bad magic, truncation) or CheckpointError.
inline Model load_checkpoint(const std::filesystem::path& path) { return from_archive(TensorArchive::load(path)); }

}  // namespace fegan::train
