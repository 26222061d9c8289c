// Command-line entry point: maskgen previews, dataset preparation, training,
// evaluation, offline edits and the HTTP service.

#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "fegan/dataprep.hpp"
#include "fegan/maskgen.hpp"
#include "fegan/service.hpp"
#include "fegan/trainer.hpp"

using namespace fegan;
namespace fs = std::filesystem;

namespace {

KeyValueConfig load_or_empty(const std::string& path) {
  return path.empty() ? KeyValueConfig() : KeyValueConfig::load(path);
}

int run_maskgen(const std::string& config, const std::string& size, std::uint64_t seed, int count,
                const std::string& out) {
  const auto [h, w] = parse_size(size);
  const auto params = maskgen::MaskGenParams::from_config(load_or_empty(config), h, w);
  const auto landmarks = maskgen::synthetic_landmarks(h, w);
  fs::create_directories(out);
  Rng rng(seed);
  double coverage = 0;
  for (int i = 0; i < count; ++i) {
    const MaskMap m = maskgen::generate_free_form_mask(rng, h, w, landmarks, params);
    coverage += m.coverage();
    char name[32];
    std::snprintf(name, sizeof name, "mask_%04d.png", i);
    png::write_file(fs::path(out) / name, png::from_binary(m), 1);
  }
  std::cout << "wrote " << count << " masks to " << out << ", mean coverage " << coverage / std::max(count, 1) << "\n";
  return 0;
}

int run_fixture(const std::string& out, int count, const std::string& size, std::uint64_t seed) {
  const auto [h, w] = parse_size(size);
  fs::create_directories(out);
  for (int i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "face_%03d.png", i);
    png::write_file(fs::path(out) / name,
                    png::from_image(dataprep::fixture_face(h, w, Rng::derive(seed, static_cast<std::uint64_t>(i)))));
  }
  std::cout << "wrote " << count << " fixture faces to " << out << "\n";
  return 0;
}

int run_dataprep(const std::string& in, const std::string& out, const std::string& size, std::uint64_t seed,
                 const std::string& config) {
  const auto [h, w] = parse_size(size);
  const auto params = maskgen::MaskGenParams::from_config(load_or_empty(config), h, w);
  const int n = dataprep::build_dataset(in, out, h, w, seed, params);
  std::cout << "prepared " << n << " images into " << out << "\n";
  return 0;
}

int run_train(const std::string& config, const std::string& resume) {
  const auto cfg = train::TrainConfig::load(config);
  train::LoopHooks hooks;
  const auto t0 = std::chrono::steady_clock::now();
  hooks.on_step = [&](const train::LossReport& r) {
    if (r.step % 50 == 0 || r.step == cfg.steps) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::cout << "step " << r.step << "  total " << r.total << "  L_D " << r.d_loss << "  masked L1 "
                << r.masked_l1 << "  (" << secs << " s)" << std::endl;
    }
  };
  const auto result = train::train_loop(cfg, resume.empty() ? std::nullopt : std::optional<fs::path>(resume), hooks);
  std::cout << "run directory " << result.run_dir.string() << "\nfinal checkpoint "
            << result.final_checkpoint.string() << "\n";
  return 0;
}

nlohmann::json report_json(const train::EvalReport& r) {
  const auto& l = r.losses;
  return {{"samples", r.samples},
          {"masked_l1", r.masked_l1},
          {"masked_psnr", std::isinf(r.masked_psnr) ? nlohmann::json("inf") : nlohmann::json(r.masked_psnr)},
          {"L_per-pixel", l.per_pixel},
          {"L_percept", l.perceptual},
          {"L_G_SN", l.adversarial},
          {"L_style", l.style()},
          {"L_tv", l.tv},
          {"L_drift", l.drift},
          {"L_D", l.d_loss},
          {"L_GP", l.gp},
          {"total", l.total}};
}

int run_evaluate(const std::string& checkpoint, const std::string& config, const std::string& records, int batches) {
  const train::Model m = train::load_checkpoint(checkpoint);
  const auto cfg = train::TrainConfig::load(config);
  const auto fx = loss::make_feature_extractor<float>(cfg.feature_extractor);
  std::vector<train::Batch> val;
  if (!records.empty()) {
    std::vector<dataprep::Record> recs;
    for (const auto& e : fs::directory_iterator(records))
      if (e.path().extension() == ".feb") recs.push_back(dataprep::read_record(e.path()));
    val = train::batches_from_records(recs, cfg.batch_size);
  } else {
    val = train::validation_batches(train::load_dataset(cfg.dataset_path, cfg.height, cfg.width), cfg, batches);
  }
  std::cout << report_json(train::evaluate(m, val, cfg, *fx)).dump(2) << "\n";
  return 0;
}

int run_edit(const std::string& checkpoint, const std::string& image, const std::string& mask,
             const std::string& sketch, const std::string& color, const std::string& out,
             std::optional<std::uint64_t> seed) {
  auto read = [](const std::string& p) {
    if (p.empty()) return std::string();
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + p);
    return std::string((std::istreambuf_iterator<char>(in)), {});
  };
  service::WireLayers w{read(image), read(mask), read(sketch), read(color), seed};
  const auto result = service::edit(service::load_model(checkpoint), service::request_from_layers(w));
  std::ofstream(out, std::ios::binary) << service::encode_png(result.composite);
  std::cout << "wrote " << out << " (seed " << result.seed << ", " << result.milliseconds << " ms)\n";
  return 0;
}

service::EditServer* g_server = nullptr;

int run_serve(const std::string& checkpoint, const std::string& host, int port, const std::string& ui) {
  service::ModelHandle model;
  if (!checkpoint.empty()) model = service::load_model(checkpoint);
  service::EditServer server(model, ui);
  const int bound = server.bind(host, port);
  if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  std::cout << "serving on http://" << host << ":" << bound << (model ? "" : " (no model loaded)") << std::endl;
  server.listen_after_bind();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Free-form image editing GAN: data preparation, training and inference"};
  app.require_subcommand(1);

  std::string config, size = "64", out, in, resume, checkpoint, records, image, mask, sketch, color, host = "0.0.0.0",
                      ui;
  std::uint64_t seed = 0;
  int count = 8, batches = 4, port = 8080;
  std::optional<std::uint64_t> edit_seed;

  auto* mg = app.add_subcommand("maskgen", "Write free-form mask previews");
  mg->add_option("--config", config, "Key-value config (maskgen.* keys)");
  mg->add_option("--size", size, "H,W or S");
  mg->add_option("--seed", seed);
  mg->add_option("--count", count);
  mg->add_option("--out", out)->required();

  auto* fx = app.add_subcommand("fixture", "Write procedural face images");
  fx->add_option("--out", out)->required();
  fx->add_option("--count", count);
  fx->add_option("--size", size);
  fx->add_option("--seed", seed);

  auto* dp = app.add_subcommand("dataprep", "Build records and layer PNGs from an image directory");
  dp->add_option("--input", in)->required();
  dp->add_option("--output", out)->required();
  dp->add_option("--size", size);
  dp->add_option("--seed", seed);
  dp->add_option("--config", config);

  auto* tr = app.add_subcommand("train", "Train from a config, optionally resuming a checkpoint");
  tr->add_option("--config", config)->required();
  tr->add_option("--resume", resume);

  auto* ev = app.add_subcommand("evaluate", "Print masked-region metrics and loss components as JSON");
  ev->add_option("--checkpoint", checkpoint)->required();
  ev->add_option("--config", config)->required();
  ev->add_option("--records", records, "Directory of .feb records (default: held-out batches from data.path)");
  ev->add_option("--batches", batches);

  auto* ed = app.add_subcommand("edit", "Run one edit offline");
  ed->add_option("--checkpoint", checkpoint)->required();
  ed->add_option("--image", image)->required();
  ed->add_option("--mask", mask)->required();
  ed->add_option("--sketch", sketch);
  ed->add_option("--color", color);
  ed->add_option("--out", out)->required();
  ed->add_option("--seed", edit_seed);

  auto* sv = app.add_subcommand("serve", "Serve POST /edit, GET /health, GET /meta and the editor bundle");
  sv->add_option("--checkpoint", checkpoint);
  sv->add_option("--host", host);
  sv->add_option("--port", port);
  sv->add_option("--ui", ui, "Directory with the built editor bundle");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*mg) return run_maskgen(config, size, seed, count, out);
    if (*fx) return run_fixture(out, count, size, seed);
    if (*dp) return run_dataprep(in, out, size, seed, config);
    if (*tr) return run_train(config, resume);
    if (*ev) return run_evaluate(checkpoint, config, records, batches);
    if (*ed) return run_edit(checkpoint, image, mask, sketch, color, out, edit_seed);
    if (*sv) return run_serve(checkpoint, host, port, ui);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
