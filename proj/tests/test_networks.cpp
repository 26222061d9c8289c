#include <gtest/gtest.h>

#include <Eigen/SVD>
#include <cmath>

#include "fegan/networks.hpp"
#include "grad_check.hpp"
#include "param_check.hpp"

using namespace fegan;
using namespace fegan::nn;
using fegan::testing::random_tensor;
using fegan::testing::random_tensor_f;

namespace {

double sigma_max(const Tensor<double>& w) {
  const int rows = w.dim(0);
  const int cols = static_cast<int>(w.size() / rows);
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = w[static_cast<std::int64_t>(r) * cols + c];
  return Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues()(0);
}

GatedConvParams<double> gated_layer(ParamStore<double>& store, int in, int out, std::uint64_t seed) {
  Rng rng(seed);
  return make_gated_conv(store, rng, "g", in, out, false);
}

}  // namespace

TEST(GatedConv, ZeroInputZeroBiasGivesZero) {
  ParamStore<double> store;
  const auto p = gated_layer(store, 4, 6, 1);
  const auto y = gated_conv(ag::constant(Tensor<double>(Shape{1, 4, 8, 8})), p, {});
  for (double v : y.value().values()) EXPECT_EQ(v, 0.0);
}

TEST(GatedConv, SaturatedGatePassesFeature) {
  ParamStore<double> store;
  Rng rng(2);
  const auto p = gated_layer(store, 4, 6, 1);
  for (auto& v : p.gate_b.shared()->value.values()) v = 60.0;
  const auto x = ag::constant(random_tensor(Shape{1, 4, 8, 8}, rng));
  const auto parts = gated_conv_parts(x, p, {});
  const auto y = gated_conv(x, p, {});
  for (std::int64_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y.value()[i], parts.feature.value()[i], 1e-15);
}

TEST(GatedConv, GateStrictlyInsideUnitInterval) {
  ParamStore<double> store;
  Rng rng(3);
  const auto p = gated_layer(store, 4, 4, 7);
  for (int trial = 0; trial < 10; ++trial) {
    const auto parts = gated_conv_parts(ag::constant(random_tensor(Shape{1, 4, 8, 8}, rng, -3, 3)), p, {});
    for (double g : parts.gate.value().values()) {
      ASSERT_GT(g, 0.0);
      ASSERT_LT(g, 1.0);
    }
  }
}

TEST(GatedConv, FeatureNormalizationMatchesDefinition) {
  ParamStore<double> store;
  Rng rng(4);
  const auto p = gated_layer(store, 3, 5, 9);
  const auto x = ag::constant(random_tensor(Shape{1, 3, 6, 6}, rng));
  GatedConvOptions raw;
  raw.normalize = false;
  raw.activation = Activation::kIdentity;
  GatedConvOptions normed = raw;
  normed.normalize = true;
  const auto a = gated_conv_parts(x, p, raw).feature.value();
  const auto b = gated_conv_parts(x, p, normed).feature.value();
  for (int y = 0; y < 6; ++y)
    for (int xx = 0; xx < 6; ++xx) {
      double ms = 0;
      for (int c = 0; c < 5; ++c) ms += a(0, c, y, xx) * a(0, c, y, xx) / 5.0;
      for (int c = 0; c < 5; ++c) EXPECT_NEAR(b(0, c, y, xx), a(0, c, y, xx) / std::sqrt(ms + 1e-8), 1e-12);
    }
}

TEST(GatedConv, RejectsBadDilationAndChannels) {
  ParamStore<double> store;
  const auto p = gated_layer(store, 4, 4, 1);
  const auto x = ag::constant(Tensor<double>(Shape{1, 4, 8, 8}));
  GatedConvOptions o;
  o.dilation = 0;
  EXPECT_THROW(gated_conv(x, p, o), std::invalid_argument);
  EXPECT_THROW(gated_conv(ag::constant(Tensor<double>(Shape{1, 3, 8, 8})), p, {}), ShapeError);
}

TEST(GatedConv, InputGradientMatchesFiniteDifferences) {
  ParamStore<double> store;
  Rng rng(5);
  const auto p = gated_layer(store, 3, 4, 11);
  const Tensor<double> x0 = random_tensor(Shape{1, 3, 6, 6}, rng);
  const Tensor<double> wts = random_tensor(Shape{1, 4, 3, 3}, rng);
  GatedConvOptions o{2, 1, false, true, Activation::kLeakyRelu, 0.2};
  auto f = [&](const Tensor<double>& x) {
    ag::NoGrad off;
    return ag::sum(ag::mul(gated_conv(ag::constant(x), p, o), ag::constant(wts))).item();
  };
  const auto xv = ag::parameter(x0);
  const auto g = ag::gradients(ag::sum(ag::mul(gated_conv(xv, p, o), ag::constant(wts))), {xv})[0].value();
  EXPECT_LT(fegan::testing::max_relative_error(g, fegan::testing::numeric_gradient(f, x0), 1e-6), 1e-5);
}

TEST(Generator, FullConfigHasSixteenConvLayers) {
  EXPECT_EQ(GeneratorConfig::full().conv_layer_count(), 16);
  EXPECT_EQ(GeneratorConfig::full().depth, 7);
  const Generator<float> g(GeneratorConfig::full());
  int weights = 0;
  for (const auto& n : g.params().names())
    if (n.ends_with(".feature.w")) ++weights;
  EXPECT_EQ(weights, 16);
}

TEST(Generator, FullScaleShape) {
  const Generator<float> g(GeneratorConfig::full(), 3);
  Rng rng(1);
  const Tensor<float> out = g.infer(random_tensor_f(Shape{1, 9, 512, 512}, rng));
  EXPECT_EQ(out.shape(), (Shape{1, 3, 512, 512}));
  for (float v : out.values()) ASSERT_TRUE(std::isfinite(v) && std::abs(v) < 1.0f);
}

TEST(Generator, ToyScaleShapeAndRange) {
  const Generator<float> g(GeneratorConfig::toy(), 4);
  Rng rng(2);
  for (int trial = 0; trial < 3; ++trial) {
    const Tensor<float> out = g.infer(random_tensor_f(Shape{2, 9, 64, 64}, rng, -3, 3));
    EXPECT_EQ(out.shape(), (Shape{2, 3, 64, 64}));
    for (float v : out.values()) ASSERT_TRUE(std::isfinite(v) && std::abs(v) < 1.0f);
  }
}

TEST(Generator, UnetSkipsAlignForAnyValidSize) {
  const Generator<double> g(GeneratorConfig::tiny());
  for (auto [h, w] : {std::pair{16, 16}, std::pair{8, 20}, std::pair{12, 4}}) {
    UnetTrace trace;
    Rng rng(1);
    ag::NoGrad off;
    const auto out = g.forward(ag::constant(random_tensor(Shape{1, 9, h, w}, rng)), &trace);
    EXPECT_EQ(out.shape(), (Shape{1, 3, h, w}));
    ASSERT_EQ(trace.encoder.size(), trace.decoder_input.size());
    for (std::size_t j = 0; j < trace.decoder_input.size(); ++j) {
      const Shape& e = trace.encoder[trace.encoder.size() - 1 - j];
      EXPECT_EQ(e[2], trace.decoder_input[j][2]);
      EXPECT_EQ(e[3], trace.decoder_input[j][3]);
    }
  }
}

TEST(Generator, RejectsBadInputs) {
  const Generator<double> g(GeneratorConfig::tiny());
  EXPECT_THROW(g.forward(ag::constant(Tensor<double>(Shape{1, 8, 16, 16}))), ShapeError);
  EXPECT_THROW(g.forward(ag::constant(Tensor<double>(Shape{1, 9, 18, 16}))), std::invalid_argument);
  GeneratorConfig bad = GeneratorConfig::tiny();
  bad.dilation_rates = {0};
  EXPECT_THROW(Generator<double>{bad}, std::invalid_argument);
}

TEST(Generator, SameSeedSameWeightsAcrossPrecisions) {
  const Generator<float> a(GeneratorConfig::tiny(), 9);
  const Generator<double> b(GeneratorConfig::tiny(), 9);
  for (std::size_t i = 0; i < a.params().size(); ++i)
    for (std::int64_t j = 0; j < a.params().vars()[i].size(); ++j)
      ASSERT_NEAR(a.params().vars()[i].value()[j], b.params().vars()[i].value()[j], 1e-6);
}

TEST(Generator, ParameterGradientsMatchFiniteDifferences) {
  Generator<double> g(GeneratorConfig::tiny(), 5);
  Rng rng(6);
  const Tensor<double> x = random_tensor(Shape{1, 9, 16, 16}, rng);
  const Tensor<double> w = random_tensor(Shape{1, 3, 16, 16}, rng);
  auto loss = [&] { return ag::sum(ag::mul(g.forward(ag::constant(x)), ag::constant(w))); };
  const auto entries = fegan::testing::check_param_gradients(loss, g.params(), 20, rng);
  for (const auto& e : entries) EXPECT_LT(e.rel_error, 1e-2) << e.name << "[" << e.index << "] " << e.analytic << " vs " << e.numeric;
}

TEST(Compose, ExactOutsideMask) {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor<float> gen = random_tensor_f(Shape{2, 3, 8, 8}, rng), gt = random_tensor_f(Shape{2, 3, 8, 8}, rng);
    Tensor<float> m(Shape{2, 1, 8, 8});
    for (auto& v : m.values()) v = rng.uniform() < 0.5 ? 1.0f : 0.0f;
    const Tensor<float> out = compose(gen, gt, m);
    for (int n = 0; n < 2; ++n)
      for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 8; ++y)
          for (int x = 0; x < 8; ++x)
            ASSERT_EQ(out(n, c, y, x), m(n, 0, y, x) != 0 ? gen(n, c, y, x) : gt(n, c, y, x));
  }
  const Tensor<float> gen = random_tensor_f(Shape{1, 3, 4, 4}, rng), gt = random_tensor_f(Shape{1, 3, 4, 4}, rng);
  EXPECT_EQ(compose(gen, gt, Tensor<float>(Shape{1, 1, 4, 4}, 0.0f)), gt);
  EXPECT_EQ(compose(gen, gt, Tensor<float>(Shape{1, 1, 4, 4}, 1.0f)), gen);
}

TEST(Compose, GradientOnlyInsideMask) {
  Rng rng(8);
  const auto gen = ag::parameter(random_tensor(Shape{1, 3, 4, 4}, rng));
  Tensor<double> m(Shape{1, 1, 4, 4});
  for (auto& v : m.values()) v = rng.uniform() < 0.5 ? 1.0 : 0.0;
  const auto y = compose(gen, random_tensor(Shape{1, 3, 4, 4}, rng), m);
  const auto g = ag::gradients(ag::sum(y), {gen})[0].value();
  for (int c = 0; c < 3; ++c)
    for (int yy = 0; yy < 4; ++yy)
      for (int x = 0; x < 4; ++x) EXPECT_EQ(g(0, c, yy, x), m(0, 0, yy, x));
}

TEST(Spectral, ScaledIdentityNormalizesToIdentity) {
  Tensor<double> w(Shape{5, 5, 1, 1});
  for (int i = 0; i < 5; ++i) w(i, i, 0, 0) = 3.5;
  Rng rng(1);
  auto s = SpectralState<double>::random(rng, 5, 5);
  const auto r = spectral_normalize(w, s, 1);
  EXPECT_NEAR(r.sigma, 3.5, 1e-12);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) EXPECT_NEAR(r.weight(i, j, 0, 0), i == j ? 1.0 : 0.0, 1e-12);
}

std::pair<double, double> top_two_singular_values(const Tensor<double>& w) {
  const int rows = w.dim(0);
  const int cols = static_cast<int>(w.size() / rows);
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = w[static_cast<std::int64_t>(r) * cols + c];
  const auto sv = Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues();
  return {sv(0), sv(1)};
}

// Power iteration converges like (s2 / s1)^(2k); 50 steps reach 1e-3 when the
// top gap is clear. Near-degenerate draws only have to stay below s1.
TEST(Spectral, PowerIterationMatchesDenseSvd) {
  int separated = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    Tensor<double> w(Shape{16, 8, 1, 1});
    for (auto& v : w.values()) v = rng.normal();
    auto s = SpectralState<double>::random(rng, 16, 8);
    const auto r = spectral_normalize(w, s, 50);
    const auto [s1, s2] = top_two_singular_values(w);
    EXPECT_LE(r.sigma, s1 * (1 + 1e-12));
    if (s2 / s1 <= 0.9) {
      ++separated;
      EXPECT_LT(fegan::testing::relative_error(r.sigma, s1), 1e-3) << "seed " << seed;
      EXPECT_NEAR(sigma_max(r.weight), 1.0, 1e-3);
    }
    EXPECT_NEAR(SpectralState<double>::norm(s.u), 1.0, 1e-12);
    EXPECT_NEAR(SpectralState<double>::norm(s.v), 1.0, 1e-12);
  }
  EXPECT_GT(separated, 120);
}

TEST(Spectral, NormalizedWeightIsFixedPoint) {
  Rng rng(3);
  const Tensor<double> w = random_tensor(Shape{6, 4, 3, 3}, rng);
  auto s = SpectralState<double>::random(rng, 6, 36);
  const auto once = spectral_normalize(w, s, 200);
  const auto twice = spectral_normalize(once.weight, s, 200);
  for (std::int64_t i = 0; i < w.size(); ++i) EXPECT_NEAR(twice.weight[i], once.weight[i], 1e-6);
}

TEST(Spectral, ZeroMatrixFlaggedAndUnchanged) {
  Rng rng(4);
  const Tensor<double> w(Shape{3, 2, 3, 3});
  auto s = SpectralState<double>::random(rng, 3, 18);
  const auto before = s.u;
  const auto r = spectral_normalize(w, s, 5);
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.weight, w);
  EXPECT_EQ(s.u, before);
  EXPECT_THROW(spectral_normalize(w, s, 0), std::invalid_argument);
  EXPECT_EQ(spectral_weight(ag::constant(w), s).value(), w);
}

TEST(Discriminator, PatchMapShapes) {
  Rng rng(1);
  const Discriminator<float> toy(DiscriminatorConfig::toy());
  const auto img = ag::constant(random_tensor_f(Shape{2, 3, 64, 64}, rng));
  const auto cond = ag::constant(random_tensor_f(Shape{2, 5, 64, 64}, rng));
  ag::NoGrad off;
  EXPECT_EQ(toy.forward(img, cond).shape(), (Shape{2, 1, 4, 4}));
  const Discriminator<float> full(DiscriminatorConfig::full());
  EXPECT_EQ(full.forward(img, cond).shape(), (Shape{2, 1, 1, 1}));
  EXPECT_THROW(toy.forward(img, ag::constant(random_tensor_f(Shape{2, 5, 32, 64}, rng))), ShapeError);
  EXPECT_THROW(toy.forward(img, ag::constant(random_tensor_f(Shape{2, 4, 64, 64}, rng))), ShapeError);
}

TEST(Discriminator, EvalForwardIsDeterministic) {
  Rng rng(2);
  const Discriminator<float> d(DiscriminatorConfig::toy());
  const auto img = ag::constant(random_tensor_f(Shape{1, 3, 32, 32}, rng));
  const auto cond = ag::constant(random_tensor_f(Shape{1, 5, 32, 32}, rng));
  ag::NoGrad off;
  const auto a = d.forward(img, cond).value();
  EXPECT_EQ(a, d.forward(img, cond).value());
  for (float v : a.values()) EXPECT_TRUE(std::isfinite(v));
}

TEST(Discriminator, NormalizedLayersHaveUnitSpectralNorm) {
  Discriminator<double> d(DiscriminatorConfig::toy(), 3);
  for (int i = 0; i < 60; ++i) d.update_spectral_state();
  for (std::size_t l = 0; l < d.spectral_state().size(); ++l) {
    const double s = sigma_max(d.normalized_weight(l));
    EXPECT_GE(s, 0.95) << d.layer_name(l);
    EXPECT_LE(s, 1.05) << d.layer_name(l);
    EXPECT_NEAR(SpectralState<double>::norm(d.spectral_state()[l].u), 1.0, 1e-12);
  }
}
