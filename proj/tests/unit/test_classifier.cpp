#include <gtest/gtest.h>

#include "inkless/core/error.hpp"
#include "inkless/eval/classifier.hpp"
#include "test_support.hpp"

using namespace inkless;
using namespace inkless::eval;

namespace {

// Pure ink vs pure tissue, with per-pixel noise.
std::vector<RasterImage> noisy(int n, int r, int g, int b, std::uint64_t seed) {
  std::vector<RasterImage> out;
  RngStream rng(seed, 0);
  for (int i = 0; i < n; ++i) {
    auto img = test::filled(16, 16, r, g, b);
    for (auto& v : img.data()) v = static_cast<std::uint8_t>(std::clamp<int>(v + rng.uniform_int(-12, 12), 0, 255));
    out.push_back(std::move(img));
  }
  return out;
}

ClassifierConfig fast() {
  ClassifierConfig c;
  c.width = 8;
  c.epochs = 10;
  c.batch_size = 16;
  c.lr = 1e-3;
  c.input_size = 32;
  c.seed = 4;
  return c;
}

}  // namespace

TEST(Classifier, SeparableByColor) {
  const auto marker = noisy(60, 30, 100, 60, 1);
  const auto clean = noisy(60, 210, 120, 170, 2);
  const auto t = train_classifier(marker, clean, fast());
  EXPECT_GT(t.holdout_size, 0u);
  EXPECT_GE(t.holdout_accuracy, 0.99);
  const auto p = t.classifier.classify_clean({marker[0], clean[0]});
  EXPECT_FALSE(p[0]);
  EXPECT_TRUE(p[1]);
}

TEST(Classifier, SameSeedSameResult) {
  const auto marker = noisy(30, 30, 100, 60, 1);
  const auto clean = noisy(30, 210, 120, 170, 2);
  const auto a = train_classifier(marker, clean, fast());
  const auto b = train_classifier(marker, clean, fast());
  EXPECT_EQ(a.holdout_accuracy, b.holdout_accuracy);
  EXPECT_EQ(a.classifier.clean_probability(marker), b.classifier.clean_probability(marker));
}

TEST(Classifier, EmptyPool) {
  EXPECT_THROW(train_classifier(noisy(4, 0, 0, 0, 1), {}, fast()), DataError);
  EXPECT_THROW(train_classifier({}, noisy(4, 0, 0, 0, 1), fast()), DataError);
}

TEST(Classifier, ConfigValidation) {
  auto c = fast();
  c.depth = 20;
  EXPECT_THROW(c.validate(), ConfigError);
  c = fast();
  c.lr = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_EQ(ClassifierConfig::from_json(fast().to_json()), fast());
  EXPECT_EQ(ClassifierConfig{}.depth, 18);
}

TEST(Classifier, DepthsBuild) {
  torch::NoGradGuard guard;
  for (int depth : {18, 34, 50}) {
    ResNet net(depth, 4);
    net->eval();
    const auto y = net->forward(torch::zeros({2, 3, 32, 32}));
    EXPECT_EQ(y.sizes(), (std::vector<std::int64_t>{2})) << depth;
  }
}

TEST(Classifier, SaveLoad) {
  test::TempDir dir;
  const auto t = train_classifier(noisy(10, 30, 100, 60, 1), noisy(10, 210, 120, 170, 2), fast());
  t.classifier.save(dir / "c.pt", t.holdout_accuracy);
  const auto back = TorchPatchClassifier::load(dir / "c.pt");
  const auto probe = noisy(4, 120, 110, 115, 9);
  EXPECT_EQ(back.clean_probability(probe), t.classifier.clean_probability(probe));
  EXPECT_EQ(back.config(), t.classifier.config());
}
