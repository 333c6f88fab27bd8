#include <gtest/gtest.h>

#include "inkless/core/error.hpp"
#include "inkless/core/files.hpp"
#include "inkless/synth/synthetic_ink.hpp"
#include "test_support.hpp"

using namespace inkless;
using namespace inkless::synth;

namespace {

StrokeSpec diagonal(double opacity, InkCategory category = InkCategory::Black, int jitter = 0) {
  StrokeSpec s;
  s.category = category;
  s.opacity = opacity;
  s.width = 6;
  s.jitter = jitter;
  s.control_points = {{2, 2}, {30, 30}};
  return s;
}

}  // namespace

TEST(Stroke, ZeroOpacityIsIdentity) {
  const auto clean = test::random_image(32, 32, 3, 1);
  RngStream rng(1, 0);
  const auto r = synthesize_stroke(clean, diagonal(0.0), rng);
  EXPECT_EQ(r.inked, clean);
}

TEST(Stroke, HalfBlendByHand) {
  const auto clean = test::filled(32, 32, 200, 100, 50);
  auto spec = diagonal(0.5);
  spec.color = Rgb{0, 0, 0};
  RngStream rng(1, 0);
  const auto r = synthesize_stroke(clean, spec, rng);
  EXPECT_EQ(r.inked.at(16, 16, 0), 100);
  EXPECT_EQ(r.inked.at(16, 16, 1), 50);
  EXPECT_EQ(r.inked.at(16, 16, 2), 25);
}

TEST(Stroke, FullOpacityAndOffStrokeUnchanged) {
  const auto clean = test::random_image(32, 32, 3, 2);
  auto spec = diagonal(1.0);
  spec.color = Rgb{0, 0, 0};
  RngStream rng(1, 0);
  const auto r = synthesize_stroke(clean, spec, rng);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      for (int c = 0; c < 3; ++c) {
        if (r.stroke_mask.at(x, y)) {
          ASSERT_EQ(r.inked.at(x, y, c), 0);
        } else {
          ASSERT_EQ(r.inked.at(x, y, c), clean.at(x, y, c));
        }
      }
    }
  }
}

TEST(Stroke, MaskMatchesFootprint) {
  const auto clean = test::random_image(32, 32, 3, 3);
  const auto spec = diagonal(0.6, InkCategory::Green, 10);
  RngStream rng(4, 0);
  const auto r = synthesize_stroke(clean, spec, rng);
  EXPECT_EQ(r.stroke_mask, rasterize_polyline(32, 32, spec.control_points, spec.width));
}

TEST(Stroke, OpacityMonotonicity) {
  // Ink darker than tissue in every channel: distance from clean grows with opacity.
  const auto clean = test::filled(32, 32, 220, 150, 190);
  double last = -1.0;
  for (double a : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    RngStream rng(1, 0);
    const auto r = synthesize_stroke(clean, diagonal(a), rng);
    double d = 0;
    for (std::size_t i = 0; i < clean.data().size(); ++i) {
      d += std::abs(static_cast<int>(r.inked.data()[i]) - static_cast<int>(clean.data()[i]));
    }
    EXPECT_GT(d, last);
    last = d;
  }
}

TEST(Stroke, Validation) {
  StrokeSpec s;
  s.control_points = {{1, 1}};
  EXPECT_THROW(s.validate(32, 32), SpecError);
  s.control_points = {{1, 1}, {40, 1}};
  EXPECT_THROW(s.validate(32, 32), SpecError);
  s.control_points = {{1, 1}, {20, 1}};
  s.opacity = 1.2;
  EXPECT_THROW(s.validate(32, 32), SpecError);
  const auto clean = test::filled(32, 32, 1, 1, 1);
  RngStream rng(0, 0);
  EXPECT_THROW(synthesize_stroke(clean, StrokeSpec{}, rng), SpecError);
}

TEST(Stroke, RandomSpecRespectsRanges) {
  RngStream rng(8, 0);
  for (int i = 0; i < 200; ++i) {
    const auto s = random_stroke_spec(InkCategory::Blue, 64, 64, rng);
    EXPECT_GE(s.opacity, 0.45);
    EXPECT_LE(s.opacity, 0.85);
    EXPECT_NO_THROW(s.validate(64, 64));
  }
  const auto opaque = random_stroke_spec(InkCategory::Opaque, 64, 64, rng);
  EXPECT_GE(opaque.opacity, kOpaqueMinOpacity);
}

TEST(Mix, ParseAndSample) {
  const auto mix = CategoryMix::parse("green=1");
  RngStream rng(3, 0);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(mix.sample(rng), InkCategory::Green);
  EXPECT_THROW(CategoryMix::parse("purple=1"), Error);
  EXPECT_THROW(CategoryMix::parse("black=0"), Error);
}

TEST(Corpus, DeterministicPerIndex) {
  CorpusConfig c;
  c.n = 6;
  c.patch_size = 32;
  c.seed = 11;
  const auto a = generate_triplets({}, {}, c);
  c.jobs = 3;
  const auto b = generate_triplets({}, {}, c);
  c.n = 3;
  const auto prefix = generate_triplets({}, {}, c);
  ASSERT_EQ(a.size(), 6u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].inked, b[i].inked);
    EXPECT_EQ(a[i].clean, b[i].clean);
  }
  for (std::size_t i = 0; i < prefix.size(); ++i) EXPECT_EQ(prefix[i].inked, a[i].inked);
}

TEST(Corpus, PairingExactness) {
  CorpusConfig c;
  c.n = 5;
  c.patch_size = 32;
  c.mix = CategoryMix::parse("black=1,green=1,blue=1");
  for (const auto& t : generate_triplets({}, {}, c)) {
    for (int y = 0; y < 32; ++y) {
      for (int x = 0; x < 32; ++x) {
        if (t.stroke_mask.at(x, y)) continue;
        for (int ch = 0; ch < 3; ++ch) ASSERT_EQ(t.inked.at(x, y, ch), t.clean.at(x, y, ch));
      }
    }
  }
}

TEST(Corpus, ExternalSources) {
  CorpusConfig c;
  c.n = 3;
  c.patch_size = 16;
  std::vector<RasterImage> sources = {test::random_image(16, 16, 3, 1), test::random_image(16, 16, 3, 2)};
  EXPECT_THROW(generate_triplets(sources, {"a", "b"}, c), InputError);
  sources.push_back(test::random_image(16, 16, 3, 3));
  const auto t = generate_triplets(sources, {"a", "b", "c"}, c);
  EXPECT_EQ(t[1].clean, sources[1]);
  EXPECT_EQ(t[1].clean_source, "b");
}

TEST(Corpus, WritesDirectories) {
  test::TempDir dir;
  CorpusConfig c;
  c.n = 4;
  c.patch_size = 16;
  generate_paired_corpus({}, {}, c, dir.path());
  EXPECT_EQ(list_files(dir / "clean").size(), 4u);
  EXPECT_EQ(list_files(dir / "inked").size(), 4u);
  EXPECT_EQ(list_files(dir / "mask").size(), 4u);
  EXPECT_TRUE(std::filesystem::exists(dir / "manifest.jsonl"));
}
