#pragma once

// One training iteration: dStepsPerGStep critic updates on ground truth and
// detached composites with the masked gradient penalty, then one generator
// update on the weighted objective.

#include <cmath>
#include <memory>
#include <string>
#include <type_traits>
#include <utility>

#include "fegan/losses.hpp"
#include "fegan/trainer/data.hpp"
#include "fegan/trainer/model.hpp"

namespace fegan::train {

class NonFiniteLossError : public std::runtime_error {
 public:
  NonFiniteLossError(std::string component, std::int64_t step)
      : std::runtime_error("non-finite " + component + " at step " + std::to_string(step)),
        component_(std::move(component)) {}
  const std::string& component() const { return component_; }

 private:
  std::string component_;
};

struct LossReport {
  std::int64_t step = 0;
  double per_pixel = 0;
  double perceptual = 0;
  double adversarial = 0;  // -mean D(I_comp)
  double style_gen = 0;
  double style_comp = 0;
  double tv = 0;
  double drift = 0;  // mean D(I_gt)^2
  double d_loss = 0;
  double gp = 0;
  double total = 0;  // weighted generator objective
  double masked_l1 = 0;

  double style() const { return style_gen + style_comp; }
  friend bool operator==(const LossReport&, const LossReport&) = default;
};

/// Sums for masked-region error metrics over the erased pixels.
struct MaskedError {
  double abs_sum = 0;
  double sq_sum = 0;  // on the [0, 1] intensity scale
  double count = 0;   // masked pixels times channels

  void add(const Tensor<float>& gen, const Tensor<float>& gt, const Tensor<float>& mask) {
    require_shape(gen.shape() == gt.shape(), "masked error: image shapes differ");
    const int N = gt.dim(0), C = gt.dim(1), H = gt.dim(2), W = gt.dim(3);
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y)
          for (int x = 0; x < W; ++x) {
            if (mask(n, 0, y, x) == 0.0f) continue;
            const double d = static_cast<double>(gen(n, c, y, x)) - gt(n, c, y, x);
            abs_sum += std::abs(d);
            sq_sum += 0.25 * d * d;
            count += 1;
          }
  }
  MaskedError& operator+=(const MaskedError& o) {
    abs_sum += o.abs_sum;
    sq_sum += o.sq_sum;
    count += o.count;
    return *this;
  }
  /// Mean absolute error on the [-1, 1] scale; 0 without masked pixels.
  double l1() const { return count > 0 ? abs_sum / count : 0.0; }
  /// 10 log10(1 / MSE) on [0, 1]; +infinity for an exact match.
  double psnr() const {
    if (count == 0 || sq_sum == 0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(count / sq_sum);
  }
};

inline double masked_l1(const Tensor<float>& gen, const Tensor<float>& gt, const Tensor<float>& mask) {
  MaskedError e;
  e.add(gen, gt, mask);
  return e.l1();
}

namespace detail {

inline void require_finite(double v, const char* component, std::int64_t step) {
  if (!std::isfinite(v)) throw NonFiniteLossError(component, step);
}

}  // namespace detail

/// Evaluated generator-side terms for a batch; differentiable in the
/// generator when grad mode is on.
struct GeneratorSide {
  loss::GeneratorTerms<ag::Var<float>> terms;
  ag::Var<float> total;
  Tensor<float> gen;
};

/// `gen` is the generator output for `b`, normally m.gen.forward(input).
inline GeneratorSide generator_side(const Model& m, const Batch& b, const ag::Var<float>& gen, const TrainConfig& cfg,
                                    const loss::FeatureExtractor<float>& features) {
  using namespace ag;
  const Tensor<float> cond = nn::conditioning_from_batch(b.input);
  const Var<float> comp = nn::compose(gen, b.gt, b.mask);
  const Var<float> gt = constant(b.gt);
  std::vector<Var<float>> f_gt;
  Var<float> s_gt;
  {
    NoGrad off;
    f_gt = features.features(gt);
    s_gt = m.dis.forward(gt, constant(cond));
  }
  const auto f_gen = features.features(gen), f_comp = features.features(comp);
  loss::GeneratorTerms<Var<float>> t;
  t.per_pixel = loss::per_pixel_loss(gen, gt, b.mask, cfg.weights.alpha);
  t.perceptual = loss::perceptual_loss(f_gen, f_comp, f_gt);
  t.adversarial = loss::gan_generator_loss(m.dis.forward(comp, constant(cond)));
  t.style_gen = loss::style_loss(f_gen, f_gt);
  t.style_comp = loss::style_loss(f_comp, f_gt);
  t.tv = loss::tv_loss(comp, b.mask);
  t.drift = loss::drift_term(s_gt);
  const Var<float> total = loss::total_generator_loss(t, cfg.weights);
  return {t, total, gen.value()};
}

struct CriticSide {
  ag::Var<float> d_loss, gp;
};

/// Critic objective on ground truth and the detached composite of `gen`.
/// A mutable discriminator scores in training mode (one spectral update);
/// a const one in eval mode.
template <class Dis>
CriticSide critic_side(Dis& dis, const Batch& b, const Tensor<float>& gen, const TrainConfig& cfg, Rng& gp_rng) {
  using namespace ag;
  const int N = b.size();
  const Tensor<float> cond = nn::conditioning_from_batch(b.input);
  const Tensor<float> comp = nn::compose(gen, b.gt, b.mask);
  const std::vector<Tensor<float>> images{b.gt, comp}, conds{cond, cond};
  const Var<float> img = constant(stack_batch<float>(images)), c2 = constant(stack_batch<float>(conds));
  Var<float> scores;
  if constexpr (std::is_const_v<Dis>)
    scores = dis.forward(img, c2);
  else
    scores = dis.forward_train(img, c2);
  const Var<float> s_gt = narrow(scores, 0, 0, N), s_comp = narrow(scores, 0, N, N);
  const Var<float> c = constant(cond);
  const loss::Critic<float> critic = [&](const Var<float>& u) { return std::as_const(dis).forward(u, c); };
  const Var<float> gp = loss::gradient_penalty(critic, comp, b.gt, b.mask, gp_rng).penalty;
  Var<float> d_loss = loss::discriminator_loss(s_gt, s_comp, gp, cfg.weights.theta);
  if (cfg.drift_in_discriminator)
    d_loss = add(d_loss, scale(loss::drift_term(s_gt), static_cast<float>(cfg.weights.epsilon)));
  return {d_loss, gp};
}

/// Updates `m` in place and advances m.step.
inline LossReport train_step(Model& m, const Batch& b, const TrainConfig& cfg,
                             const loss::FeatureExtractor<float>& features) {
  require_shape(b.input.dim(1) == 9 && b.input.dim(2) == cfg.height && b.input.dim(3) == cfg.width &&
                    b.gt.dim(0) == b.input.dim(0) && b.mask.dim(0) == b.input.dim(0),
                "batch " + to_string(b.input.shape()) + " does not match the configured " + std::to_string(cfg.height) +
                    "x" + std::to_string(cfg.width) + " training size");
  ag::GradModeGuard on(true);
  LossReport r;
  r.step = m.step + 1;
  for (int i = 0; i < cfg.d_steps_per_g_step; ++i) {
    const Tensor<float> gen = m.gen.infer(b.input);
    Rng gp_rng = penalty_rng(cfg.seed, m.step, i);
    const CriticSide d = critic_side(m.dis, b, gen, cfg, gp_rng);
    r.gp = d.gp.value().item();
    r.d_loss = d.d_loss.value().item();
    detail::require_finite(r.gp, "L_GP", r.step);
    detail::require_finite(r.d_loss, "L_D", r.step);
    m.opt_d.step(m.dis.params(), ag::gradients(d.d_loss, m.dis.params().vars()));
  }

  const GeneratorSide g = generator_side(m, b, m.gen.forward(ag::constant(b.input)), cfg, features);
  r.per_pixel = g.terms.per_pixel.value().item();
  r.perceptual = g.terms.perceptual.value().item();
  r.adversarial = g.terms.adversarial.value().item();
  r.style_gen = g.terms.style_gen.value().item();
  r.style_comp = g.terms.style_comp.value().item();
  r.tv = g.terms.tv.value().item();
  r.drift = g.terms.drift.value().item();
  r.total = g.total.value().item();
  r.masked_l1 = masked_l1(g.gen, b.gt, b.mask);
  detail::require_finite(r.per_pixel, "L_per-pixel", r.step);
  detail::require_finite(r.perceptual, "L_percept", r.step);
  detail::require_finite(r.adversarial, "L_G_SN", r.step);
  detail::require_finite(r.style(), "L_style", r.step);
  detail::require_finite(r.tv, "L_tv", r.step);
  detail::require_finite(r.drift, "L_drift", r.step);
  detail::require_finite(r.total, "total", r.step);
  m.opt_g.step(m.gen.params(), ag::gradients(g.total, m.gen.params().vars()));
  ++m.step;
  return r;
}

}  // namespace fegan::train
