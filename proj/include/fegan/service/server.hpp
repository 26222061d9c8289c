#pragma once

// HTTP front end.
//
//   POST /edit    layers (JSON base64 or multipart/form-data) -> image/png
//                 composite; X-Fegan-Seed and X-Fegan-Millis headers
//   GET  /health  {"status", "version", "step", "config"}
//   GET  /meta    {"sizeMultiple", "trainingSize", "layers", ...}
//   GET  /        static editor bundle when a UI directory is given
//
// Example JSON request:
//   {"image": "<base64 PNG>", "mask": "<base64 PNG>", "seed": 7}
// Errors are JSON {"error": "..."} with 400, 422 (layer sizes disagree)
// or 503 (no model loaded).

#include <filesystem>
#include <memory>
#include <string>

#include "fegan/service/wire.hpp"
#include "httplib.h"

namespace fegan::service {

inline nlohmann::json meta_json(const ModelHandle& model) {
  nlohmann::json j;
  j["layers"] = {{"image", "RGB PNG, 8-bit"},
                 {"mask", "gray PNG, 1- or 8-bit, >= 128 erases"},
                 {"sketch", "gray PNG, >= 128 is a stroke (optional)"},
                 {"color", "RGBA PNG, alpha > 0 marks strokes (optional)"},
                 {"seed", "unsigned integer (optional)"}};
  j["valueRange"] = {-1, 1};
  j["modelLoaded"] = static_cast<bool>(model);
  if (model) {
    j["sizeMultiple"] = model->size_multiple();
    j["trainingSize"] = {model->train_height(), model->train_width()};
    j["padding"] = "reflect to the next multiple, then crop";
  }
  return j;
}

inline nlohmann::json health_json(const ModelHandle& model) {
  if (!model) return {{"status", "no-model"}};
  return {{"status", "ok"},
          {"version", model->version()},
          {"step", model->step()},
          {"generator", model->meta().value("generator", nlohmann::json::object())},
          {"config", model->meta().value("config", std::string())}};
}

class EditServer {
 public:
  /// `model` may be null: /edit then answers 503.
  explicit EditServer(ModelHandle model, std::filesystem::path ui_dir = {})
      : model_(std::move(model)), ui_dir_(std::move(ui_dir)) {
    routes();
  }

  httplib::Server& http() { return server_; }

  /// Binds on `host`; port 0 picks a free port. Returns the bound port or -1.
  int bind(const std::string& host, int port) {
    return port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
  }
  bool listen_after_bind() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  void wait_until_ready() { server_.wait_until_ready(); }

 private:
  static void json_error(httplib::Response& res, int status, const std::string& message) {
    res.status = status;
    res.set_content(nlohmann::json{{"error", message}}.dump(), "application/json");
  }

  static WireLayers layers_from_multipart(const httplib::Request& req) {
    WireLayers w;
    auto field = [&](const char* name) { return req.has_file(name) ? req.get_file_value(name).content : std::string(); };
    w.image = field("image");
    w.mask = field("mask");
    w.sketch = field("sketch");
    w.color = field("color");
    if (req.has_file("seed")) {
      const std::string s = req.get_file_value("seed").content;
      try {
        std::size_t used = 0;
        w.seed = std::stoull(s, &used);
        if (used != s.size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw ServiceError(ErrorKind::kBadRequest, "seed must be a non-negative integer");
      }
    }
    return w;
  }

  void routes() {
    server_.Post("/edit", [this](const httplib::Request& req, httplib::Response& res) {
      try {
        if (!model_) throw ServiceError(ErrorKind::kModelNotLoaded, "no model loaded");
        const WireLayers w = req.is_multipart_form_data() ? layers_from_multipart(req) : layers_from_json(req.body);
        const EditResult r = edit(model_, request_from_layers(w));
        res.set_header("X-Fegan-Seed", std::to_string(r.seed));
        res.set_header("X-Fegan-Millis", std::to_string(r.milliseconds));
        res.set_content(encode_png(r.composite), "image/png");
      } catch (const ServiceError& e) {
        json_error(res, e.status(), e.what());
      } catch (const std::exception& e) {
        json_error(res, 500, e.what());
      }
    });
    server_.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(health_json(model_).dump(), "application/json");
    });
    server_.Get("/meta", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(meta_json(model_).dump(), "application/json");
    });
    if (!ui_dir_.empty() && std::filesystem::is_directory(ui_dir_)) {
      server_.set_mount_point("/", ui_dir_.string());
    } else {
      server_.Get("/", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(
            "<!doctype html><title>fegan</title><p>Editor bundle not installed. Endpoints: POST /edit, GET /health, "
            "GET /meta.</p>",
            "text/html");
      });
    }
  }

  ModelHandle model_;
  std::filesystem::path ui_dir_;
  httplib::Server server_;
};

}  // namespace fegan::service
