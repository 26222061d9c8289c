#pragma once

// Inference handle and the edit operation.

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>

#include "fegan/dataprep/batch.hpp"
#include "fegan/trainer/model.hpp"

namespace fegan::service {

enum class ErrorKind { kBadRequest, kDimensionMismatch, kModelNotLoaded };

class ServiceError : public std::runtime_error {
 public:
  ServiceError(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }
  /// HTTP status for the error class.
  int status() const {
    switch (kind_) {
      case ErrorKind::kDimensionMismatch: return 422;
      case ErrorKind::kModelNotLoaded: return 503;
      default: return 400;
    }
  }

 private:
  ErrorKind kind_;
};

/// Immutable generator plus checkpoint metadata. The discriminator and
/// optimizer state are dropped; nothing here changes after loading.
class InferenceModel {
 public:
  explicit InferenceModel(const TensorArchive& ar)
      : model_(train::from_archive(ar)), meta_(ar.meta) {}

  const nn::Generator<float>& generator() const { return model_.gen; }
  int size_multiple() const { return model_.gen.config().size_multiple(); }
  int train_height() const { return model_.height; }
  int train_width() const { return model_.width; }
  std::int64_t step() const { return model_.step; }
  const nlohmann::json& meta() const { return meta_; }
  std::string version() const {
    return "fegan-model/v" + std::to_string(meta_.value("version", 0)) + " step " + std::to_string(step());
  }

 private:
  train::Model model_;
  nlohmann::json meta_;
};

using ModelHandle = std::shared_ptr<const InferenceModel>;

/// Throws ArchiveError or CheckpointError; never returns a partial handle.
inline ModelHandle load_model(const std::filesystem::path& checkpoint) {
  return std::make_shared<const InferenceModel>(TensorArchive::load(checkpoint));
}

struct EditRequest {
  ImageTensor image;  // (1, 3, H, W) in [-1, 1]
  MaskMap mask;
  SketchMap sketch;
  ColorMap color;
  std::optional<std::uint64_t> seed;  // absent: fresh noise
};

struct EditResult {
  ImageTensor composite;
  std::uint64_t seed = 0;
  double milliseconds = 0;
};

namespace detail {

template <class Tag>
BinaryMap<Tag> pad_binary(const BinaryMap<Tag>& m, int height, int width) {
  return BinaryMap<Tag>::threshold(reflect_pad(m.tensor(), height, width), 0.5f);
}

inline int round_up(int v, int m) { return (v + m - 1) / m * m; }

}  // namespace detail

/// Runs the generator on the request and returns compose(output, image,
/// mask). Sizes that are not multiples of the model's size multiple are
/// reflect-padded for the forward pass and cropped back.
inline EditResult edit(const ModelHandle& model, const EditRequest& req) {
  if (!model) throw ServiceError(ErrorKind::kModelNotLoaded, "no model loaded");
  const auto t0 = std::chrono::steady_clock::now();
  if (req.image.dim(0) != 1 || req.image.dim(1) != 3)
    throw ServiceError(ErrorKind::kBadRequest, "image must be a single RGB image");
  const int H = req.image.dim(2), W = req.image.dim(3);
  auto same = [&](int h, int w, const char* layer) {
    if (h != H || w != W)
      throw ServiceError(ErrorKind::kDimensionMismatch, std::string(layer) + " is " + std::to_string(h) + "x" +
                                                            std::to_string(w) + " but the image is " +
                                                            std::to_string(H) + "x" + std::to_string(W));
  };
  same(req.mask.height(), req.mask.width(), "mask");
  same(req.sketch.height(), req.sketch.width(), "sketch");
  same(req.color.height(), req.color.width(), "color");

  const int m = model->size_multiple();
  const int PH = detail::round_up(H, m), PW = detail::round_up(W, m);
  const ImageTensor image = reflect_pad(req.image, PH, PW);
  const MaskMap mask = detail::pad_binary(req.mask, PH, PW);
  const SketchMap sketch = detail::pad_binary(req.sketch, PH, PW);
  const ColorMap color(reflect_pad(req.color.rgb(), PH, PW), detail::pad_binary(req.color.support(), PH, PW));

  EditResult out;
  out.seed = req.seed ? *req.seed : std::random_device{}();
  Rng rng(out.seed);
  const dataprep::EditBatch batch = dataprep::assemble_batch(image, mask, sketch, color.masked(mask), rng);
  const Tensor<float> gen = crop(model->generator().infer(batch.tensor()), H, W);
  out.composite = nn::compose(gen, req.image, req.mask.tensor());
  out.milliseconds = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace fegan::service
