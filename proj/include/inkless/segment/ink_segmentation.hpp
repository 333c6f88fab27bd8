#pragma once

#include <string>

#include "inkless/core/raster.hpp"
#include "inkless/core/types.hpp"

namespace inkless::segment {

// Hue interval in degrees; hue_lo > hue_hi denotes an interval wrapping past 360.
struct HueRule {
  double hue_lo = 0.0;
  double hue_hi = 0.0;
  double saturation_min = 0.0;
  double value_max = 1.0;

  bool contains_hue(double h) const noexcept {
    return hue_lo <= hue_hi ? (h >= hue_lo && h <= hue_hi) : (h >= hue_lo || h <= hue_hi);
  }
};

// Color rules for pen ink. Black and Opaque share the darkness rule
// (max(R,G,B) <= dark_max * 255); Opaque vs Black is a per-slide label.
struct InkThresholds {
  double dark_max = 90.0 / 255.0;
  HueRule green{70.0, 170.0, 0.25, 0.95};
  HueRule blue{190.0, 260.0, 0.25, 0.95};
  // Morphology, in mask (downsampled) pixels.
  int close_radius = 2;
  int min_area = 64;

  void validate() const;  // throws ConfigError
};

bool is_ink_color(double r, double g, double b, const InkThresholds& t) noexcept;

// Block-averages an RGB slide by `downsample` (partial edge blocks averaged
// over their actual extent). Result is RGB with ceil(dim / downsample) dims.
RasterImage downsample_mean(const RasterImage& slide, int downsample);

// Per-pixel color rules only, before morphology. 0/255 single-channel.
RasterImage raw_ink_pixels(const RasterImage& slide, const InkThresholds& t, int downsample);

// Morphological closing with a disc of the given radius, then removal of
// 8-connected components smaller than min_area.
RasterImage clean_mask(const RasterImage& raw, int close_radius, int min_area);

MarkerMask segment_ink(const RasterImage& slide, const InkThresholds& thresholds, int downsample,
                       std::string slide_id = {});

enum class OverrideMode { Replace, Union, Subtract };
OverrideMode parse_override_mode(const std::string& s);

// Ingests a manually corrected mask; throws AlignmentError on mismatched geometry.
MarkerMask apply_mask_override(const MarkerMask& automatic, const MarkerMask& manual,
                               OverrideMode mode);

}  // namespace inkless::segment
