#include <gtest/gtest.h>

#include "inkless/core/error.hpp"
#include "inkless/segment/ink_segmentation.hpp"
#include "inkless/synth/synthetic_ink.hpp"
#include "inkless/synth/tissue.hpp"
#include "test_support.hpp"

using namespace inkless;
using namespace inkless::segment;

namespace {

std::size_t count_set(const RasterImage& m) {
  std::size_t n = 0;
  for (auto v : m.data()) n += v != 0;
  return n;
}

}  // namespace

TEST(InkColor, DefaultRules) {
  const InkThresholds t;
  EXPECT_TRUE(is_ink_color(0, 0, 0, t));
  EXPECT_TRUE(is_ink_color(90, 90, 90, t));
  EXPECT_FALSE(is_ink_color(91, 40, 40, t));
  EXPECT_TRUE(is_ink_color(40, 110, 60, t));   // green pen
  EXPECT_TRUE(is_ink_color(40, 60, 150, t));   // blue pen
  EXPECT_FALSE(is_ink_color(255, 255, 255, t));
  EXPECT_FALSE(is_ink_color(200, 60, 140, t)); // eosin-like magenta
}

TEST(InkColor, WrappingHueInterval) {
  HueRule r{330.0, 20.0, 0.1, 1.0};
  EXPECT_TRUE(r.contains_hue(350));
  EXPECT_TRUE(r.contains_hue(5));
  EXPECT_FALSE(r.contains_hue(100));
}

TEST(Segment, WhiteSlideGivesEmptyMask) {
  const auto slide = test::filled(64, 64, 255, 255, 255);
  const auto mask = segment_ink(slide, InkThresholds{}, 1, "w");
  EXPECT_EQ(mask.ink_cells(), 0u);
}

TEST(Segment, BlackStrokeOnWhite) {
  auto slide = test::filled(64, 64, 255, 255, 255);
  for (int y = 20; y < 30; ++y) {
    for (int x = 5; x < 60; ++x) {
      for (int c = 0; c < 3; ++c) slide.at(x, y, c) = 0;
    }
  }
  const auto mask = segment_ink(slide, InkThresholds{}, 1, "b");
  for (int y = 20; y < 30; ++y) {
    for (int x = 5; x < 60; ++x) ASSERT_TRUE(mask.is_ink(x, y));
  }
  EXPECT_FALSE(mask.is_ink(30, 5));
  EXPECT_FALSE(mask.is_ink(30, 50));
}

TEST(Segment, GreenStrokeIoUAgainstOracle) {
  RngStream rng(3, 0);
  synth::TissueSpec spec;
  spec.width = spec.height = 256;
  const auto tissue = synth::generate_tissue(spec, rng);
  synth::StrokeSpec stroke;
  stroke.category = InkCategory::Green;
  stroke.opacity = 0.9;
  stroke.width = 24;
  stroke.control_points = {{10, 30}, {128, 140}, {246, 220}};
  const auto result = synth::synthesize_stroke(tissue.image, stroke, rng);
  const auto mask = segment_ink(result.inked, InkThresholds{}, 1, "g");
  std::size_t inter = 0, uni = 0;
  for (int y = 0; y < 256; ++y) {
    for (int x = 0; x < 256; ++x) {
      const bool a = mask.is_ink(x, y);
      const bool b = result.stroke_mask.at(x, y) != 0;
      inter += a && b;
      uni += a || b;
    }
  }
  EXPECT_GE(static_cast<double>(inter) / static_cast<double>(uni), 0.90);
}

TEST(Segment, SaturationMonotonicity) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto img = test::random_image(32, 32, 3, seed);
    InkThresholds strict, loose;
    loose.green.saturation_min = 0.1;
    loose.blue.saturation_min = 0.1;
    const auto a = raw_ink_pixels(img, strict, 1);
    const auto b = raw_ink_pixels(img, loose, 1);
    for (std::size_t i = 0; i < a.data().size(); ++i) {
      if (a.data()[i]) ASSERT_TRUE(b.data()[i]);
    }
  }
}

TEST(Segment, CleanMaskRemovesSpecks) {
  RasterImage raw(40, 40, 1, 0);
  raw.at(3, 3) = 255;  // speck
  for (int y = 10; y < 30; ++y) {
    for (int x = 10; x < 30; ++x) raw.at(x, y) = 255;
  }
  const auto cleaned = clean_mask(raw, 2, 64);
  EXPECT_EQ(cleaned.at(3, 3), 0);
  EXPECT_EQ(cleaned.at(20, 20), 255);
}

TEST(Segment, ClosingBridgesSmallGaps) {
  RasterImage raw(40, 20, 1, 0);
  for (int y = 5; y < 15; ++y) {
    for (int x = 2; x < 38; ++x) {
      if (x != 20) raw.at(x, y) = 255;
    }
  }
  const auto cleaned = clean_mask(raw, 2, 1);
  EXPECT_EQ(cleaned.at(20, 10), 255);
}

TEST(Segment, DownsampledMaskDims) {
  const auto slide = test::filled(100, 37, 255, 255, 255);
  const auto mask = segment_ink(slide, InkThresholds{}, 8, "d");
  EXPECT_EQ(mask.mask.width(), 13);
  EXPECT_EQ(mask.mask.height(), 5);
  EXPECT_EQ(mask.downsample, 8);
}

TEST(Segment, DownsampleConsistency) {
  // A thick black band: the mask at 2d, upsampled, disagrees with the mask at
  // d only near the band's boundary.
  auto slide = test::filled(256, 256, 255, 255, 255);
  for (int y = 0; y < 256; ++y) {
    for (int x = 0; x < 256; ++x) {
      if (std::abs(x - y) < 40) {
        for (int c = 0; c < 3; ++c) slide.at(x, y, c) = 10;
      }
    }
  }
  InkThresholds t;
  t.min_area = 4;
  const int d = 4;
  const auto fine = segment_ink(slide, t, d, "s");
  const auto coarse = segment_ink(slide, t, 2 * d, "s");
  const int reach = t.close_radius + 1;
  for (int my = 0; my < fine.mask.height(); ++my) {
    for (int mx = 0; mx < fine.mask.width(); ++mx) {
      const bool a = fine.is_ink(mx, my);
      const bool b = coarse.is_ink(mx / 2, my / 2);
      if (a == b) continue;
      // Some fine cell within `reach` coarse cells must have the opposite state.
      bool near_boundary = false;
      for (int dy = -2 * reach; dy <= 2 * reach && !near_boundary; ++dy) {
        for (int dx = -2 * reach; dx <= 2 * reach && !near_boundary; ++dx) {
          const int nx = mx + dx, ny = my + dy;
          if (fine.mask.contains(nx, ny) && fine.is_ink(nx, ny) != a) near_boundary = true;
        }
      }
      EXPECT_TRUE(near_boundary) << "mismatch far from boundary at " << mx << "," << my;
    }
  }
}

TEST(Override, Modes) {
  auto a = MarkerMask::empty_for("s", 16, 16, 1);
  auto b = MarkerMask::empty_for("s", 16, 16, 1);
  a.mask.at(1, 1) = 255;
  b.mask.at(5, 5) = 255;
  EXPECT_EQ(apply_mask_override(a, a, OverrideMode::Replace).mask, a.mask);
  EXPECT_EQ(apply_mask_override(a, b, OverrideMode::Union).ink_cells(), 2u);
  EXPECT_EQ(apply_mask_override(a, a, OverrideMode::Subtract).ink_cells(), 0u);
  EXPECT_EQ(parse_override_mode("union"), OverrideMode::Union);
}

TEST(Override, MismatchedGeometry) {
  const auto a = MarkerMask::empty_for("s", 16, 16, 1);
  const auto b = MarkerMask::empty_for("s", 16, 16, 2);
  const auto c = MarkerMask::empty_for("t", 16, 16, 1);
  EXPECT_THROW(apply_mask_override(a, b, OverrideMode::Union), AlignmentError);
  EXPECT_THROW(apply_mask_override(a, c, OverrideMode::Union), AlignmentError);
}

TEST(Segment, IdempotentOnBinaryInkImage) {
  auto slide = test::filled(64, 64, 255, 255, 255);
  for (int y = 10; y < 50; ++y) {
    for (int x = 20; x < 40; ++x) {
      slide.at(x, y, 0) = 40;
      slide.at(x, y, 1) = 110;
      slide.at(x, y, 2) = 60;
    }
  }
  const auto first = segment_ink(slide, InkThresholds{}, 1, "i");
  EXPECT_EQ(count_set(first.mask), 40u * 20u);
}
