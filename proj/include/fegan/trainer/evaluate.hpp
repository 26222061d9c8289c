#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "fegan/trainer/step.hpp"

namespace fegan::train {

struct EvalReport {
  double masked_l1 = 0;
  double masked_psnr = 0;  // +infinity when the masked region is reproduced exactly
  LossReport losses;       // sample-weighted means of the per-batch components
  int samples = 0;
};

/// Replaces the generator output during evaluation (oracle injection).
using GeneratorOverride = std::function<Tensor<float>(const Batch&)>;

/// Held-out batches drawn from a stream disjoint from the training steps.
inline std::vector<Batch> validation_batches(const std::vector<dataprep::SourceImage>& data, const TrainConfig& cfg,
                                             int count) {
  TrainConfig v = cfg;
  v.seed = Rng::derive(cfg.seed, 0xe7a1);
  std::vector<Batch> out;
  for (int i = 0; i < count; ++i) out.push_back(make_step_batch(data, v, i));
  return out;
}

/// Batches from prepared records; the mask is the input's mask plane.
inline std::vector<Batch> batches_from_records(const std::vector<dataprep::Record>& records, int batch_size) {
  std::vector<Batch> out;
  for (std::size_t i = 0; i < records.size(); i += static_cast<std::size_t>(batch_size)) {
    std::vector<Tensor<float>> in, gt, mask;
    for (std::size_t j = i; j < std::min(records.size(), i + batch_size); ++j) {
      in.push_back(records[j].batch.tensor());
      gt.push_back(records[j].target);
      mask.push_back(records[j].batch.tensor().channels(dataprep::channel::kMask, 1));
    }
    out.push_back({stack_batch<float>(in), stack_batch<float>(gt), stack_batch<float>(mask)});
  }
  return out;
}

/// Read-only evaluation: the spectral state is not advanced and no
/// parameter changes. Interpolation weights for the penalty come from a
/// fixed stream per batch position.
inline EvalReport evaluate(const Model& m, const std::vector<Batch>& validation, const TrainConfig& cfg,
                           const loss::FeatureExtractor<float>& features, const GeneratorOverride& override_gen = {}) {
  if (validation.empty()) throw std::invalid_argument("evaluate: empty validation set");
  ag::NoGrad off;
  MaskedError err;
  EvalReport out;
  LossReport& acc = out.losses;
  for (std::size_t i = 0; i < validation.size(); ++i) {
    const Batch& b = validation[i];
    const Tensor<float> gen = override_gen ? override_gen(b) : m.gen.infer(b.input);
    require_shape(gen.shape() == b.gt.shape(), "evaluate: generator output shape mismatch");
    err.add(gen, b.gt, b.mask);
    const GeneratorSide g = generator_side(m, b, ag::constant(gen), cfg, features);
    Rng gp_rng(Rng::derive(0x5eed, i));
    const CriticSide d = critic_side(m.dis, b, gen, cfg, gp_rng);
    const double w = b.size();
    acc.per_pixel += w * g.terms.per_pixel.value().item();
    acc.perceptual += w * g.terms.perceptual.value().item();
    acc.adversarial += w * g.terms.adversarial.value().item();
    acc.style_gen += w * g.terms.style_gen.value().item();
    acc.style_comp += w * g.terms.style_comp.value().item();
    acc.tv += w * g.terms.tv.value().item();
    acc.drift += w * g.terms.drift.value().item();
    acc.total += w * g.total.value().item();
    acc.d_loss += w * d.d_loss.value().item();
    acc.gp += w * d.gp.value().item();
    out.samples += b.size();
  }
  const double n = out.samples;
  for (double* v : {&acc.per_pixel, &acc.perceptual, &acc.adversarial, &acc.style_gen, &acc.style_comp, &acc.tv,
                    &acc.drift, &acc.total, &acc.d_loss, &acc.gp})
    *v /= n;
  acc.step = m.step;
  out.masked_l1 = acc.masked_l1 = err.l1();
  out.masked_psnr = err.psnr();
  return out;
}

}  // namespace fegan::train
