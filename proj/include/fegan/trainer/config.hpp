#pragma once

// Training configuration read from a flat key-value file.
//
//   train.imageSize            H,W or S (64)
//   train.batchSize            8
//   train.steps                2000
//   train.dStepsPerGStep       1
//   train.seed                 0
//   train.checkpointInterval   500
//   train.runRoot              runs
//   train.driftInDiscriminator true: eps * mean(D(gt)^2) also enters the D loss
//   train.queueCapacity        4
//   optim.lrG / optim.lrD      1e-4
//   optim.beta1G / beta2G      0.5 / 0.9 (likewise beta1D / beta2D)
//   data.path                  PNG directory, or fixture:N for N procedural faces
//   loss.featureExtractor      random | identity | vgg16:<path>
//   loss.*, maskgen.*, generator.*, discriminator.*  see the respective modules

#include <filesystem>
#include <stdexcept>
#include <string>

#include "fegan/core/config.hpp"
#include "fegan/losses/losses.hpp"
#include "fegan/maskgen.hpp"
#include "fegan/networks.hpp"

namespace fegan::train {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double eps = 1e-8;
};

struct TrainConfig {
  int height = 64;
  int width = 64;
  int batch_size = 8;
  int steps = 2000;
  int d_steps_per_g_step = 1;
  std::uint64_t seed = 0;
  int checkpoint_interval = 500;
  int queue_capacity = 4;
  bool drift_in_discriminator = true;
  std::string dataset_path = "fixture:8";
  std::string feature_extractor = "random";
  std::filesystem::path run_root = "runs";
  AdamConfig adam_g, adam_d;
  loss::LossWeights weights;
  maskgen::MaskGenParams mask = maskgen::MaskGenParams::defaults_for(64, 64);
  nn::GeneratorConfig generator = nn::GeneratorConfig::toy();
  nn::DiscriminatorConfig discriminator = nn::DiscriminatorConfig::toy();
  KeyValueConfig source;  // the parsed file, echoed into checkpoints

  static TrainConfig from_config(const KeyValueConfig& cfg) {
    TrainConfig c;
    c.source = cfg;
    std::tie(c.height, c.width) = parse_size(cfg.get_string("train.imageSize", "64"));
    c.batch_size = cfg.get("train.batchSize", c.batch_size);
    c.steps = cfg.get("train.steps", c.steps);
    c.d_steps_per_g_step = cfg.get("train.dStepsPerGStep", c.d_steps_per_g_step);
    c.seed = cfg.get("train.seed", c.seed);
    c.checkpoint_interval = cfg.get("train.checkpointInterval", c.checkpoint_interval);
    c.queue_capacity = cfg.get("train.queueCapacity", c.queue_capacity);
    c.drift_in_discriminator = cfg.get_bool("train.driftInDiscriminator", c.drift_in_discriminator);
    c.run_root = cfg.get_string("train.runRoot", c.run_root.string());
    c.dataset_path = cfg.get_string("data.path", c.dataset_path);
    c.feature_extractor = cfg.get_string("loss.featureExtractor", c.feature_extractor);
    for (auto [opt, suffix] : {std::pair{&c.adam_g, "G"}, std::pair{&c.adam_d, "D"}}) {
      const std::string s = suffix;
      opt->lr = cfg.get("optim.lr" + s, opt->lr);
      opt->beta1 = cfg.get("optim.beta1" + s, opt->beta1);
      opt->beta2 = cfg.get("optim.beta2" + s, opt->beta2);
      opt->eps = cfg.get("optim.eps" + s, opt->eps);
    }
    c.weights = loss::LossWeights::from_config(cfg);
    c.mask = maskgen::MaskGenParams::from_config(cfg, c.height, c.width);
    c.generator = nn::GeneratorConfig::from_config(cfg);
    c.discriminator = nn::DiscriminatorConfig::from_config(cfg);
    c.validate(true);
    return c;
  }

  static TrainConfig load(const std::filesystem::path& path) { return from_config(KeyValueConfig::load(path)); }

  /// `allow_zero_steps` admits steps = 0, which writes only the initial
  /// checkpoint.
  void validate(bool allow_zero_steps = false) const {
    generator.validate();
    discriminator.validate();
    weights.validate();
    mask.validate(height, width);
    const int m = generator.size_multiple();
    if (height % m != 0 || width % m != 0)
      throw ConfigError("imageSize " + std::to_string(height) + "x" + std::to_string(width) + " must be divisible by " +
                        std::to_string(m));
    if (steps < 0 || (steps == 0 && !allow_zero_steps)) throw ConfigError("steps must be positive");
    if (batch_size < 1) throw ConfigError("batchSize must be positive");
    if (d_steps_per_g_step < 1) throw ConfigError("dStepsPerGStep must be positive");
    if (checkpoint_interval < 1) throw ConfigError("checkpointInterval must be positive");
    if (queue_capacity < 1) throw ConfigError("queueCapacity must be positive");
    for (const AdamConfig* a : {&adam_g, &adam_d})
      if (!(a->lr >= 0) || !(a->beta1 >= 0 && a->beta1 < 1) || !(a->beta2 >= 0 && a->beta2 < 1) || !(a->eps > 0))
        throw ConfigError("invalid optimizer settings");
  }
};

}  // namespace fegan::train
