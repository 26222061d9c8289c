#pragma once

// Run driver: data producer -> train_step -> loss CSV and checkpoints.
//
// A run directory <runRoot>/<YYYYmmdd-HHMMSS>_seed<seed> holds config.txt,
// losses.csv and ckpt_<step>.fegan files. Checkpoints are written every
// checkpointInterval steps and after the last step; steps = 0 writes only
// the initial checkpoint. Resuming continues in the checkpoint's directory.

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fegan/trainer/evaluate.hpp"

namespace fegan::train {

inline constexpr const char* kLossCsvHeader = "step,L_per-pixel,L_percept,L_G_SN,L_style,L_tv,L_D,L_GP,total,L_drift,masked_l1";

inline std::string csv_row(const LossReport& r) {
  std::ostringstream os;
  os << std::setprecision(17) << r.step << ',' << r.per_pixel << ',' << r.perceptual << ',' << r.adversarial << ','
     << r.style() << ',' << r.tv << ',' << r.d_loss << ',' << r.gp << ',' << r.total << ',' << r.drift << ','
     << r.masked_l1;
  return os.str();
}

/// Steps after which a checkpoint is written.
inline std::vector<std::int64_t> checkpoint_schedule(std::int64_t steps, std::int64_t interval) {
  if (steps == 0) return {0};
  std::vector<std::int64_t> out;
  for (std::int64_t s = interval; s < steps; s += interval) out.push_back(s);
  out.push_back(steps);
  return out;
}

inline std::string checkpoint_name(std::int64_t step) {
  std::ostringstream os;
  os << "ckpt_" << std::setw(6) << std::setfill('0') << step << ".fegan";
  return os.str();
}

inline std::filesystem::path new_run_dir(const std::filesystem::path& root, std::uint64_t seed) {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  localtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y%m%d-%H%M%S") << "_seed" << seed;
  std::filesystem::path dir = root / os.str();
  for (int k = 1; std::filesystem::exists(dir); ++k) dir = root / (os.str() + "-" + std::to_string(k));
  std::filesystem::create_directories(dir);
  return dir;
}

struct TrainResult {
  std::filesystem::path run_dir;
  std::filesystem::path final_checkpoint;
  std::vector<std::filesystem::path> checkpoints;  // written by this invocation
  std::vector<LossReport> history;                 // steps run by this invocation
};

struct LoopHooks {
  std::function<void(const LossReport&)> on_step;
  /// Stop after this many steps of this invocation (simulated interruption).
  std::optional<std::int64_t> stop_after;
};

namespace detail {

inline void rewrite_csv(const std::filesystem::path& path, std::int64_t keep_through) {
  std::vector<std::string> rows;
  if (std::ifstream in(path); in) {
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (std::stoll(line.substr(0, line.find(','))) <= keep_through) rows.push_back(line);
    }
  }
  std::ofstream out(path, std::ios::trunc);
  out << kLossCsvHeader << '\n';
  for (const auto& r : rows) out << r << '\n';
}

inline void check_resumable(const Model& m, const TrainConfig& cfg) {
  if (to_json(m.gen.config()) != to_json(cfg.generator) || to_json(m.dis.config()) != to_json(cfg.discriminator) ||
      m.height != cfg.height || m.width != cfg.width)
    throw CheckpointError("checkpoint architecture does not match the config");
}

}  // namespace detail

/// Trains from scratch or from `resume`. Throws DatasetError, CheckpointError
/// or NonFiniteLossError.
inline TrainResult train_loop(const TrainConfig& cfg, const std::optional<std::filesystem::path>& resume = {},
                              const LoopHooks& hooks = {}) {
  cfg.validate(true);
  const auto data = load_dataset(cfg.dataset_path, cfg.height, cfg.width);
  const auto features = loss::make_feature_extractor<float>(cfg.feature_extractor);
  TrainResult result;
  std::optional<Model> model;
  if (resume) {
    model.emplace(load_checkpoint(*resume));
    detail::check_resumable(*model, cfg);
    result.run_dir = resume->parent_path();
  } else {
    model.emplace(cfg);
    result.run_dir = new_run_dir(cfg.run_root, cfg.seed);
    std::ofstream(result.run_dir / "config.txt") << cfg.source.to_text();
  }
  Model& m = *model;
  const std::string config_text = cfg.source.to_text();
  const auto csv_path = result.run_dir / "losses.csv";
  detail::rewrite_csv(csv_path, m.step);

  const auto schedule = checkpoint_schedule(cfg.steps, cfg.checkpoint_interval);
  auto save = [&] {
    const auto path = result.run_dir / checkpoint_name(m.step);
    save_checkpoint(m, path, config_text);
    result.checkpoints.push_back(path);
    result.final_checkpoint = path;
  };
  if (cfg.steps == 0) {
    save();
    return result;
  }
  std::int64_t last = cfg.steps;
  if (hooks.stop_after) last = std::min<std::int64_t>(last, m.step + *hooks.stop_after);
  if (m.step >= last) {
    result.final_checkpoint = result.run_dir / checkpoint_name(m.step);
    return result;
  }
  std::ofstream csv(csv_path, std::ios::app);
  BatchProducer producer(data, cfg, m.step, last);
  while (m.step < last) {
    const LossReport r = train_step(m, producer.next(), cfg, *features);
    csv << csv_row(r) << '\n' << std::flush;
    result.history.push_back(r);
    if (hooks.on_step) hooks.on_step(r);
    if (std::find(schedule.begin(), schedule.end(), m.step) != schedule.end()) save();
  }
  if (result.final_checkpoint != result.run_dir / checkpoint_name(m.step)) save();
  return result;
}

}  // namespace fegan::train
