#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "inkless/core/error.hpp"
#include "inkless/core/files.hpp"
#include "inkless/model/checkpoint.hpp"
#include "inkless/model/losses.hpp"
#include "inkless/model/networks.hpp"
#include "inkless/model/tensor_io.hpp"
#include "inkless/restore/restore.hpp"
#include "test_support.hpp"

using namespace inkless;
using namespace inkless::model;

namespace {

ModelConfig small() {
  ModelConfig c;
  c.gen_filters = 4;
  c.residual_blocks = 1;
  c.disc_filters = 4;
  return c;
}

}  // namespace

TEST(Generator, ShapeAndRange) {
  ModelBundle b(small(), 1);
  torch::NoGradGuard guard;
  for (int side : {128, 100, 64}) {
    auto out = generator_forward(b.remover, torch::rand({1, 3, side, side}) * 2 - 1);
    EXPECT_EQ(out.sizes(), (std::vector<std::int64_t>{1, 3, side, side}));
    EXPECT_LE(out.abs().max().item<float>(), 1.0f);
    EXPECT_TRUE(torch::isfinite(out).all().item<bool>());
  }
}

TEST(Generator, RangeHoldsForExtremeWeights) {
  ModelBundle b(small(), 2);
  torch::NoGradGuard guard;
  for (auto& p : b.remover->parameters()) p.mul_(50.0);
  auto out = generator_forward(b.remover, torch::rand({2, 3, 32, 32}) * 2 - 1);
  EXPECT_LE(out.abs().max().item<float>(), 1.0f);
}

TEST(Generator, RejectsBadShapes) {
  ModelBundle b(small(), 1);
  torch::NoGradGuard guard;
  EXPECT_THROW(generator_forward(b.remover, torch::zeros({1, 3, 30, 30})), ShapeError);
  EXPECT_THROW(generator_forward(b.remover, torch::zeros({1, 1, 32, 32})), ShapeError);
  EXPECT_THROW(generator_forward(b.remover, torch::zeros({3, 32, 32})), ShapeError);
  EXPECT_THROW(generator_forward(b.remover, torch::zeros({1, 3, 4, 4})), ShapeError);
}

TEST(Discriminator, GridSide) {
  EXPECT_EQ(discriminator_grid_side(128, 3), 14);
  EXPECT_EQ(discriminator_grid_side(64, 3), 6);
  ModelBundle b(small(), 1);
  torch::NoGradGuard guard;
  const auto x = torch::rand({3, 3, 128, 128});
  const auto y = discriminator_forward(b.clean_critic, x);
  EXPECT_EQ(y.sizes(), (std::vector<std::int64_t>{3, 1, 14, 14}));
  EXPECT_TRUE(torch::equal(y, discriminator_forward(b.clean_critic, x)));
}

TEST(Discriminator, ShapeAlgebraProperty) {
  ModelBundle b(small(), 1);
  torch::NoGradGuard guard;
  for (int side = 70; side <= 256; side += 7) {
    const auto y = discriminator_forward(b.clean_critic, torch::zeros({1, 3, side, side}));
    ASSERT_EQ(y.size(2), discriminator_grid_side(side, 3)) << side;
    ASSERT_EQ(y.size(3), discriminator_grid_side(side, 3)) << side;
  }
  EXPECT_THROW(discriminator_forward(b.clean_critic, torch::zeros({1, 3, 8, 8})), ShapeError);
}

TEST(Losses, LeastSquaresExamples) {
  const auto ones = torch::ones({2, 1, 4, 4});
  const auto zeros = torch::zeros({2, 1, 4, 4});
  const auto half = torch::full({2, 1, 4, 4}, 0.5);
  EXPECT_DOUBLE_EQ(discriminator_loss(ones, zeros).item<double>(), 0.0);
  EXPECT_DOUBLE_EQ(generator_adversarial_loss(ones).item<double>(), 0.0);
  EXPECT_DOUBLE_EQ(discriminator_loss(half, half).item<double>(), 0.25);
  EXPECT_DOUBLE_EQ(generator_adversarial_loss(half).item<double>(), 0.25);
}

TEST(Losses, Cycle) {
  const auto a = torch::full({2, 3, 8, 8}, 0.25, torch::kFloat64);
  const auto b = torch::full({2, 3, 8, 8}, -0.25, torch::kFloat64);
  EXPECT_DOUBLE_EQ(cycle_loss(a, a, 10.0).item<double>(), 0.0);
  EXPECT_DOUBLE_EQ(cycle_loss(a, b, 10.0).item<double>(), 5.0);
  const auto r = torch::rand({2, 3, 8, 8}, torch::kFloat64);
  EXPECT_DOUBLE_EQ(cycle_loss(a, r, 10.0).item<double>(), cycle_loss(r, a, 10.0).item<double>());
  EXPECT_THROW(cycle_loss(a, torch::zeros({2, 3, 4, 4}, torch::kFloat64), 10.0), ShapeError);
}

TEST(GradCheck, TinyGeneratorLoss) {
  const auto r = test::generator_gradcheck(3, 24);
  EXPECT_EQ(r.checked, 24);
  EXPECT_LT(r.max_rel_error, 1e-3);
}

TEST(Bundle, SameSeedSameParameters) {
  ModelBundle a(small(), 9), b(small(), 9), c(small(), 10);
  const auto pa = a.generator_parameters();
  const auto pb = b.generator_parameters();
  const auto pc = c.generator_parameters();
  bool differs = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_TRUE(torch::equal(pa[i], pb[i]));
    differs = differs || !torch::equal(pa[i], pc[i]);
  }
  EXPECT_TRUE(differs);
}

TEST(Bundle, OneDirectionalByDefault) {
  ModelBundle a(small(), 1);
  EXPECT_FALSE(a.marker_critic);
  auto cfg = small();
  cfg.full_cyclegan = true;
  ModelBundle f(cfg, 1);
  EXPECT_TRUE(f.marker_critic);
  EXPECT_GT(f.discriminator_parameters().size(), a.discriminator_parameters().size());
}

TEST(Checkpoint, RoundTrip) {
  test::TempDir dir;
  ModelBundle a(small(), 4);
  save_bundle(a, dir / "m.pt");
  const auto b = load_bundle(dir / "m.pt");
  EXPECT_EQ(b.config, a.config);
  const auto pa = a.generator_parameters();
  const auto pb = b.generator_parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_TRUE(torch::equal(pa[i], pb[i]));
}

TEST(Checkpoint, Errors) {
  test::TempDir dir;
  ModelBundle a(small(), 4);
  save_bundle(a, dir / "m.pt");
  auto other = small();
  other.gen_filters = 8;
  EXPECT_THROW(load_bundle(dir / "m.pt", &other), CheckpointError);
  EXPECT_THROW(load_bundle(dir / "missing.pt"), Error);
  write_text_atomic(dir / "junk.pt", "not a checkpoint");
  EXPECT_THROW(load_bundle(dir / "junk.pt"), CheckpointError);
  EXPECT_THROW(peek_meta(dir / "m.pt", "classifier"), CheckpointError);
}

TEST(TensorIo, RoundTrip) {
  const std::vector<RasterImage> imgs = {test::random_image(8, 6, 3, 1), test::random_image(8, 6, 3, 2)};
  const auto t = images_to_tensor(imgs);
  EXPECT_EQ(t.sizes(), (std::vector<std::int64_t>{2, 3, 6, 8}));
  EXPECT_FLOAT_EQ(t[1][2][5][7].item<float>(), imgs[1].at(7, 5, 2) / 127.5f - 1.0f);
  const auto back = tensor_to_images(t);
  EXPECT_EQ(back[0], imgs[0]);
  EXPECT_EQ(back[1], imgs[1]);
  EXPECT_THROW(images_to_tensor({}), InputError);
  EXPECT_THROW(images_to_tensor({test::random_image(8, 6, 3, 1), test::random_image(6, 6, 3, 1)}), ShapeError);
}

TEST(TensorIo, TileGeneratorMatchesSingleCalls) {
  ModelBundle b(small(), 5);
  const auto gen = tile_generator(b.remover);
  const auto slide = test::random_image(64, 64, 3, 3);
  std::vector<restore::Tile> tiles;
  for (int y : {0, 16, 32}) {
    for (int x : {0, 32}) tiles.push_back({x, y, true});
  }
  const auto batch = restore::tiles_to_batch(slide, tiles, 32);
  const auto all = gen(batch);
  ASSERT_EQ(all.count, 6);
  ASSERT_EQ(all.data.size(), batch.data.size());
  for (int i = 0; i < 6; ++i) {
    const auto one = gen(restore::tiles_to_batch(slide, {tiles[static_cast<std::size_t>(i)]}, 32));
    EXPECT_EQ(restore::batch_item_to_rgb(one, 0), restore::batch_item_to_rgb(all, i)) << i;
  }
}

TEST(TensorIo, TranslateRestoresTrainingFlag) {
  ModelBundle b(small(), 5);
  b.remover->train(true);
  const auto out = translate(b.remover, {test::random_image(16, 16, 3, 1)});
  EXPECT_EQ(out.size(), 1u);
  EXPECT_TRUE(b.remover->is_training());
}
