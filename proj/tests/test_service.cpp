#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <thread>

#include "fegan/service.hpp"
#include "fegan/trainer.hpp"

using namespace fegan;
using namespace fegan::service;
namespace fs = std::filesystem;

namespace {

train::TrainConfig tiny_config() {
  train::TrainConfig c;
  c.height = c.width = 16;
  c.batch_size = 2;
  c.generator = nn::GeneratorConfig::tiny();
  c.discriminator = nn::DiscriminatorConfig::tiny();
  c.mask = maskgen::MaskGenParams::defaults_for(16, 16);
  c.dataset_path = "fixture:2";
  c.validate();
  return c;
}

const fs::path& checkpoint() {
  static const fs::path path = [] {
    const fs::path dir = fs::temp_directory_path() / "fegan_service_test";
    fs::create_directories(dir);
    const auto c = tiny_config();
    train::Model m(c);
    const auto data = train::load_dataset(c.dataset_path, 16, 16);
    const auto fx = loss::make_feature_extractor<float>("random");
    train::train_step(m, train::make_step_batch(data, c, 0), c, *fx);
    train::save_checkpoint(m, dir / "tiny.fegan", "train.imageSize = 16\n");
    return dir / "tiny.fegan";
  }();
  return path;
}

ImageTensor quantized_image(int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  ImageTensor img = make_image(h, w);
  for (auto& v : img.values()) v = png::to_unit(static_cast<std::uint8_t>(rng.below(256)));
  return img;
}

MaskMap random_mask(int h, int w, std::uint64_t seed, double p = 0.3) {
  Rng rng(seed);
  MaskMap m(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.set(y, x, rng.uniform() < p);
  return m;
}

EditRequest request(int h, int w, const MaskMap& mask, std::optional<std::uint64_t> seed = 5) {
  EditRequest r;
  r.image = quantized_image(h, w, 1);
  r.mask = mask;
  r.sketch = SketchMap(h, w);
  r.color = ColorMap::empty(h, w);
  r.seed = seed;
  return r;
}

std::string png_bytes(const png::Raster& r, int depth = 8) {
  const auto b = png::encode(r, depth);
  return {b.begin(), b.end()};
}

struct RunningServer {
  explicit RunningServer(ModelHandle model, fs::path ui = {}) : server(std::move(model), std::move(ui)) {
    port = server.bind("127.0.0.1", 0);
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~RunningServer() {
    server.stop();
    thread.join();
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(60);
    return c;
  }
  EditServer server;
  int port = -1;
  std::thread thread;
};

std::string json_body(const ImageTensor& image, const MaskMap& mask, std::optional<std::uint64_t> seed) {
  nlohmann::json j;
  j["image"] = base64_encode(png_bytes(png::from_image(image)));
  j["mask"] = base64_encode(png_bytes(png::from_binary(mask), 1));
  if (seed) j["seed"] = *seed;
  return j.dump();
}

}  // namespace

TEST(Base64, RoundTripsAllLengths) {
  Rng rng(1);
  for (int n = 0; n < 40; ++n) {
    std::string s;
    for (int i = 0; i < n; ++i) s.push_back(static_cast<char>(rng.below(256)));
    EXPECT_EQ(base64_decode(base64_encode(s)), s);
  }
  EXPECT_EQ(base64_encode("Man"), "TWFu");
  EXPECT_EQ(base64_decode("data:image/png;base64,TWE="), "Ma");
  EXPECT_THROW(base64_decode("TW*u"), ServiceError);
}

TEST(LoadModel, HandlesAreIndependentAndIdentical) {
  const ModelHandle a = load_model(checkpoint()), b = load_model(checkpoint());
  EXPECT_NE(a.get(), b.get());
  EXPECT_EQ(a->step(), 1);
  EXPECT_EQ(a->size_multiple(), 4);
  const auto req = request(16, 16, random_mask(16, 16, 2));
  EXPECT_EQ(edit(a, req).composite, edit(b, req).composite);
}

TEST(LoadModel, GeneratorMatchesTrainerCheckpoint) {
  const ModelHandle h = load_model(checkpoint());
  const train::Model m = train::load_checkpoint(checkpoint());
  const auto c = tiny_config();
  const auto data = train::load_dataset(c.dataset_path, 16, 16);
  const auto val = train::validation_batches(data, c, 1);
  const auto fx = loss::make_feature_extractor<float>("random");
  const auto recorded = train::evaluate(m, val, c, *fx);
  const auto via_handle =
      train::evaluate(m, val, c, *fx, [&](const train::Batch& b) { return h->generator().infer(b.input); });
  EXPECT_EQ(recorded.masked_l1, via_handle.masked_l1);
  EXPECT_EQ(recorded.masked_psnr, via_handle.masked_psnr);
}

TEST(LoadModel, CorruptFilesRaiseTypedErrors) {
  const fs::path dir = fs::temp_directory_path() / "fegan_service_test";
  std::ifstream in(checkpoint(), std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  bytes[1] = '?';
  std::ofstream(dir / "bad.fegan", std::ios::binary) << bytes;
  EXPECT_THROW(load_model(dir / "bad.fegan"), ArchiveError);
  EXPECT_THROW(load_model(dir / "absent.fegan"), ArchiveError);
}

TEST(Edit, AllZeroMaskReturnsTheImage) {
  const ModelHandle h = load_model(checkpoint());
  const auto req = request(16, 16, MaskMap(16, 16));
  EXPECT_EQ(edit(h, req).composite, req.image);
}

TEST(Edit, PixelsOutsideTheMaskAreUntouched) {
  const ModelHandle h = load_model(checkpoint());
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto req = request(16, 16, random_mask(16, 16, s));
    const auto out = edit(h, req).composite;
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
          if (!req.mask.at(y, x)) {
            ASSERT_EQ(out(0, c, y, x), req.image(0, c, y, x));
          }
  }
}

TEST(Edit, SeedMakesResponsesReproducible) {
  const ModelHandle h = load_model(checkpoint());
  const auto req = request(16, 16, random_mask(16, 16, 3, 0.6), 99);
  const auto a = edit(h, req), b = edit(h, req);
  EXPECT_EQ(a.seed, 99u);
  EXPECT_EQ(a.composite, b.composite);
  EXPECT_GE(a.milliseconds, 0.0);
  auto other = req;
  other.seed = 100;
  EXPECT_NE(edit(h, other).composite, a.composite);
}

TEST(Edit, PadsArbitrarySizesAndCropsBack) {
  const ModelHandle h = load_model(checkpoint());
  const auto req = request(18, 21, random_mask(18, 21, 4));
  const auto out = edit(h, req).composite;
  EXPECT_EQ(out.shape(), (Shape{1, 3, 18, 21}));
}

TEST(Edit, ConcurrentIdenticalRequestsAgree) {
  const ModelHandle h = load_model(checkpoint());
  const auto req = request(16, 16, random_mask(16, 16, 8), 3);
  std::vector<ImageTensor> outs(4);
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < outs.size(); ++i) threads.emplace_back([&, i] { outs[i] = edit(h, req).composite; });
  for (auto& t : threads) t.join();
  for (const auto& o : outs) EXPECT_EQ(o, outs[0]);
}

TEST(Edit, ErrorClasses) {
  const ModelHandle h = load_model(checkpoint());
  auto req = request(16, 16, MaskMap(12, 16));
  try {
    edit(h, req);
    FAIL();
  } catch (const ServiceError& e) {
    EXPECT_EQ(e.status(), 422);
  }
  try {
    edit(nullptr, request(16, 16, MaskMap(16, 16)));
    FAIL();
  } catch (const ServiceError& e) {
    EXPECT_EQ(e.status(), 503);
  }
}

TEST(Http, JsonEditZeroMaskIsPixelIdentical) {
  RunningServer s(load_model(checkpoint()));
  auto cli = s.client();
  const ImageTensor image = quantized_image(16, 16, 9);
  const auto res = cli.Post("/edit", json_body(image, MaskMap(16, 16), 1), "application/json");
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 200) << res->body;
  EXPECT_EQ(res->get_header_value("Content-Type"), "image/png");
  const png::Raster back = png::decode(std::span(reinterpret_cast<const std::uint8_t*>(res->body.data()), res->body.size()));
  EXPECT_EQ(back.pixels, png::from_image(image).pixels);
  EXPECT_EQ(res->get_header_value("X-Fegan-Seed"), "1");
}

TEST(Http, MultipartMatchesDirectEdit) {
  const ModelHandle h = load_model(checkpoint());
  RunningServer s(h);
  auto cli = s.client();
  const ImageTensor image = quantized_image(16, 16, 10);
  const MaskMap mask = random_mask(16, 16, 11, 0.5);
  httplib::MultipartFormDataItems items{
      {"image", png_bytes(png::from_image(image)), "image.png", "image/png"},
      {"mask", png_bytes(png::from_binary(mask)), "mask.png", "image/png"},
      {"seed", "42", "", ""},
  };
  const auto res = cli.Post("/edit", items);
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 200) << res->body;
  EditRequest req{image, mask, SketchMap(16, 16), ColorMap::empty(16, 16), 42};
  const auto expected = png::from_image(edit(h, req).composite);
  const png::Raster back = png::decode(std::span(reinterpret_cast<const std::uint8_t*>(res->body.data()), res->body.size()));
  EXPECT_EQ(back.pixels, expected.pixels);
}

TEST(Http, StatusCodes) {
  {
    RunningServer s(load_model(checkpoint()));
    auto cli = s.client();
    const auto mismatch = cli.Post("/edit", json_body(quantized_image(16, 16, 1), MaskMap(8, 16), {}), "application/json");
    ASSERT_TRUE(mismatch);
    EXPECT_EQ(mismatch->status, 422);
    EXPECT_NE(mismatch->body.find("error"), std::string::npos);
    const auto bad = cli.Post("/edit", "{not json", "application/json");
    ASSERT_TRUE(bad);
    EXPECT_EQ(bad->status, 400);
    const auto missing = cli.Post("/edit", "{}", "application/json");
    ASSERT_TRUE(missing);
    EXPECT_EQ(missing->status, 400);
  }
  RunningServer empty(nullptr);
  auto cli = empty.client();
  const auto res = cli.Post("/edit", json_body(quantized_image(16, 16, 1), MaskMap(16, 16), {}), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 503);
  const auto health = cli.Get("/health");
  ASSERT_TRUE(health);
  EXPECT_EQ(nlohmann::json::parse(health->body)["status"], "no-model");
}

TEST(Http, HealthMetaAndStaticBundle) {
  const fs::path ui = fs::temp_directory_path() / "fegan_service_ui";
  fs::create_directories(ui);
  std::ofstream(ui / "index.html") << "<html>editor</html>";
  RunningServer s(load_model(checkpoint()), ui);
  auto cli = s.client();
  const auto health = cli.Get("/health");
  ASSERT_TRUE(health);
  const auto h = nlohmann::json::parse(health->body);
  EXPECT_EQ(h["status"], "ok");
  EXPECT_EQ(h["step"], 1);
  EXPECT_EQ(h["config"], "train.imageSize = 16\n");
  const auto meta = cli.Get("/meta");
  ASSERT_TRUE(meta);
  const auto m = nlohmann::json::parse(meta->body);
  EXPECT_EQ(m["sizeMultiple"], 4);
  EXPECT_EQ(m["trainingSize"], (nlohmann::json{16, 16}));
  const auto index = cli.Get("/");
  ASSERT_TRUE(index);
  EXPECT_EQ(index->status, 200);
  EXPECT_EQ(index->body, "<html>editor</html>");
}
