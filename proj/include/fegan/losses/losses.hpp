#pragma once

// Reconstruction, adversarial and penalty terms of the training objective.
// Images are (N, C, H, W); masks are (N, 1, H, W) with 1 on the erased
// region. Every normalizing count includes the batch, so batched values are
// means of the per-sample values.

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include "fegan/core/config.hpp"
#include "fegan/core/ops.hpp"
#include "fegan/losses/features.hpp"

namespace fegan::loss {

struct LossWeights {
  double sigma = 0.05;     // perceptual
  double beta = 0.001;     // generator adversarial
  double gamma = 120;      // style
  double upsilon = 0.1;    // total variation
  double epsilon = 0.001;  // D(I_gt)^2 drift term
  double theta = 10;       // gradient penalty
  double alpha = 6;        // erased-region pixel weight

  static LossWeights from_config(const KeyValueConfig& cfg) {
    LossWeights w;
    w.sigma = cfg.get("loss.sigma", w.sigma);
    w.beta = cfg.get("loss.beta", w.beta);
    w.gamma = cfg.get("loss.gamma", w.gamma);
    w.upsilon = cfg.get("loss.upsilon", w.upsilon);
    w.epsilon = cfg.get("loss.epsilon", w.epsilon);
    w.theta = cfg.get("loss.theta", w.theta);
    w.alpha = cfg.get("loss.alpha", w.alpha);
    w.validate();
    return w;
  }

  void validate() const {
    for (double v : {sigma, beta, gamma, upsilon, epsilon, theta, alpha})
      if (!(v >= 0) || !std::isfinite(v)) throw std::invalid_argument("loss weights must be finite and non-negative");
    if (!(alpha > 1)) throw std::invalid_argument("alpha must exceed 1");
  }
};

namespace detail {
template <class T>
void same_shape(const Var<T>& a, const Var<T>& b, const char* what) {
  require_shape(a.shape() == b.shape(), std::string(what) + ": " + to_string(a.shape()) + " vs " + to_string(b.shape()));
}
template <class T>
void check_mask(const Tensor<T>& m, const Shape& image) {
  require_shape(m.dim(0) == image[0] && m.dim(1) == 1 && m.dim(2) == image[2] && m.dim(3) == image[3],
                "mask " + to_string(m.shape()) + " does not match images " + to_string(image));
}
}  // namespace detail

/// (1/N) |(1 - M)(gen - gt)|_1 + alpha (1/N) |M (gen - gt)|_1.
template <class T>
Var<T> per_pixel_loss(const Var<T>& gen, const Var<T>& gt, const Tensor<T>& mask, double alpha) {
  if (!(alpha > 0)) throw std::invalid_argument("per_pixel_loss: alpha must be positive");
  detail::same_shape(gen, gt, "per_pixel_loss");
  detail::check_mask(mask, gen.shape());
  Tensor<T> w = ag::detail::expand(mask, gen.shape());
  for (auto& v : w.values()) v = v != T(0) ? static_cast<T>(alpha) : T(1);
  return ag::mean(ag::mul(ag::abs(ag::sub(gen, gt)), ag::constant(w)));
}

template <class T>
Var<T> l1_mean(const Var<T>& a, const Var<T>& b) {
  detail::same_shape(a, b, "l1");
  return ag::mean(ag::abs(ag::sub(a, b)));
}

/// Pass precomputed ground-truth features to avoid recomputing them.
template <class T>
Var<T> perceptual_loss(const std::vector<Var<T>>& f_gen, const std::vector<Var<T>>& f_comp,
                       const std::vector<Var<T>>& f_gt) {
  require_shape(f_gen.size() == f_gt.size() && f_comp.size() == f_gt.size(), "perceptual_loss: level count mismatch");
  Var<T> total = ag::constant(Tensor<T>::scalar(T(0)));
  for (std::size_t q = 0; q < f_gt.size(); ++q)
    total = ag::add(total, ag::add(l1_mean(f_gen[q], f_gt[q]), l1_mean(f_comp[q], f_gt[q])));
  return total;
}

template <class T>
Var<T> perceptual_loss(const Var<T>& gen, const Var<T>& comp, const Var<T>& gt, const FeatureExtractor<T>& f) {
  return perceptual_loss(f.features(gen), f.features(comp), f.features(gt));
}

/// Per-sample F F^T of the (C, H*W) flattening: (N, C, H, W) -> (N, 1, C, C).
template <class T>
Var<T> gram_matrix(const Var<T>& feature) {
  const Shape s = feature.shape();
  const Var<T> flat = ag::reshape(feature, Shape{s[0], 1, s[1], s[2] * s[3]});
  return ag::bmm(flat, flat, false, true);
}

/// sum_q (1 / C_q^2) |(G_q(I) - G_q(gt)) / N_q|_1 with N_q = H_q W_q C_q;
/// averaged over the batch.
template <class T>
Var<T> style_loss(const std::vector<Var<T>>& f_img, const std::vector<Var<T>>& f_gt) {
  require_shape(f_img.size() == f_gt.size(), "style_loss: level count mismatch");
  Var<T> total = ag::constant(Tensor<T>::scalar(T(0)));
  for (std::size_t q = 0; q < f_gt.size(); ++q) {
    detail::same_shape(f_img[q], f_gt[q], "style_loss");
    const Shape s = f_gt[q].shape();
    const double c = s[1], n = static_cast<double>(s[1]) * s[2] * s[3];
    const Var<T> d = ag::abs(ag::sub(gram_matrix(f_img[q]), gram_matrix(f_gt[q])));
    // sum over the C x C entries, mean over the batch
    total = ag::add(total, ag::scale(ag::sum(d), static_cast<T>(1.0 / (c * c * n * s[0]))));
  }
  return total;
}

template <class T>
Var<T> style_loss(const Var<T>& image, const Var<T>& gt, const FeatureExtractor<T>& f) {
  return style_loss(f.features(image), f.features(gt));
}

/// Sum over positions (i, j) in `region` of |I(i, j+1) - I(i, j)|_1 and
/// |I(i+1, j) - I(i, j)|_1, each over N = element count of the image.
/// Differences that would leave the image are skipped.
template <class T>
Var<T> tv_loss(const Var<T>& comp, const Tensor<T>& region) {
  detail::check_mask(region, comp.shape());
  const Shape s = comp.shape();
  const T inv_n = T(1) / static_cast<T>(comp.size());
  Var<T> total = ag::constant(Tensor<T>::scalar(T(0)));
  if (s[3] > 1) {
    const Var<T> d = ag::abs(ag::sub(ag::narrow(comp, 3, 1, s[3] - 1), ag::narrow(comp, 3, 0, s[3] - 1)));
    const Tensor<T> r = ag::detail::narrow(region, 3, 0, s[3] - 1);
    total = ag::add(total, ag::scale(ag::sum(ag::mul(d, ag::constant(r))), inv_n));
  }
  if (s[2] > 1) {
    const Var<T> d = ag::abs(ag::sub(ag::narrow(comp, 2, 1, s[2] - 1), ag::narrow(comp, 2, 0, s[2] - 1)));
    const Tensor<T> r = ag::detail::narrow(region, 2, 0, s[2] - 1);
    total = ag::add(total, ag::scale(ag::sum(ag::mul(d, ag::constant(r))), inv_n));
  }
  return total;
}

/// -mean(D(I_comp)).
template <class T>
Var<T> gan_generator_loss(const Var<T>& scores_comp) {
  return ag::neg(ag::mean(scores_comp));
}

/// mean(1 - D(I_gt)) + mean(1 + D(I_comp)) + theta * gp, unclipped.
template <class T>
Var<T> discriminator_loss(const Var<T>& scores_gt, const Var<T>& scores_comp, const Var<T>& gp, double theta) {
  return ag::add(ag::add(ag::rsub_scalar(T(1), ag::mean(scores_gt)), ag::add_scalar(ag::mean(scores_comp), T(1))),
                 ag::scale(gp, static_cast<T>(theta)));
}

/// mean(D(I_gt)^2).
template <class T>
Var<T> drift_term(const Var<T>& scores_gt) {
  return ag::mean(ag::square(scores_gt));
}

/// Per-sample L2 norm over (C, H, W) as (N, 1, 1, 1). The value is exact at
/// zero and its gradient there is taken as 0.
template <class T>
Var<T> sample_norm(const Var<T>& x) {
  const Var<T> ss = ag::sum_to(ag::square(x), Shape{x.dim(0), 1, 1, 1});
  Tensor<T> positive = ss.value();
  for (auto& v : positive.values()) v = v > T(0) ? T(1) : T(0);
  return ag::select(positive, ag::sqrt(ag::clamp_min(ss, std::numeric_limits<T>::min())),
                    ag::constant(Tensor<T>(ss.shape())));
}

/// Scalar-valued critic of an image batch (conditioning already bound).
template <class T>
using Critic = std::function<Var<T>(const Var<T>&)>;

template <class T>
struct PenaltyResult {
  Var<T> penalty;
  Tensor<T> t;  // (N, 1, 1, 1) interpolation weights used
};

/// E[(|grad_U D(U) * M|_2 - 1)^2] over the batch with one t ~ U(0, 1) per
/// sample and U = t I_comp + (1 - t) I_gt. For a patch critic, D(U) is the
/// sum of its scores. The result stays differentiable in the critic's
/// parameters.
template <class T>
PenaltyResult<T> gradient_penalty(const Critic<T>& critic, const Tensor<T>& comp, const Tensor<T>& gt,
                                  const Tensor<T>& mask, Rng& rng) {
  require_shape(comp.shape() == gt.shape(), "gradient_penalty: image shapes differ");
  detail::check_mask(mask, gt.shape());
  Tensor<T> t(Shape{gt.dim(0), 1, 1, 1});
  for (auto& v : t.values()) v = static_cast<T>(rng.uniform());
  Tensor<T> u(gt.shape());
  for (int n = 0; n < gt.dim(0); ++n)
    for (std::int64_t i = 0, per = gt.size() / gt.dim(0); i < per; ++i) {
      const std::int64_t k = n * per + i;
      u[k] = t[n] * comp[k] + (T(1) - t[n]) * gt[k];
    }
  // The input-gradient is needed even when the caller records no graph;
  // it only stays differentiable when the caller does.
  const bool outer = ag::GradMode::enabled();
  Var<T> g;
  {
    ag::GradModeGuard on(true);
    const Var<T> uv = ag::parameter(u);
    const Var<T> scores = critic(uv);
    if (!scores.requires_grad()) throw std::logic_error("gradient_penalty: critic output does not depend on its input");
    g = ag::gradients(ag::sum(scores), {uv}, {}, outer)[0];
  }
  const Var<T> norm = sample_norm(ag::mul(g, ag::constant(mask)));
  return {ag::mean(ag::square(ag::add_scalar(norm, T(-1)))), t};
}

/// The weighted generator objective.
template <class N>
struct GeneratorTerms {
  N per_pixel{};
  N perceptual{};
  N adversarial{};
  N style_gen{};
  N style_comp{};
  N tv{};
  N drift{};  // mean(D(I_gt)^2)
};

inline double total_generator_loss(const GeneratorTerms<double>& c, const LossWeights& w) {
  return c.per_pixel + w.sigma * c.perceptual + w.beta * c.adversarial + w.gamma * (c.style_gen + c.style_comp) +
         w.upsilon * c.tv + w.epsilon * c.drift;
}

template <class T>
Var<T> total_generator_loss(const GeneratorTerms<Var<T>>& c, const LossWeights& w) {
  Var<T> total = c.per_pixel;
  total = ag::add(total, ag::scale(c.perceptual, static_cast<T>(w.sigma)));
  total = ag::add(total, ag::scale(c.adversarial, static_cast<T>(w.beta)));
  total = ag::add(total, ag::scale(ag::add(c.style_gen, c.style_comp), static_cast<T>(w.gamma)));
  total = ag::add(total, ag::scale(c.tv, static_cast<T>(w.upsilon)));
  total = ag::add(total, ag::scale(c.drift, static_cast<T>(w.epsilon)));
  return total;
}

}  // namespace fegan::loss
