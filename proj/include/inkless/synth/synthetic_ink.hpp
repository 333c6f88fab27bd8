#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "inkless/core/color.hpp"
#include "inkless/core/raster.hpp"
#include "inkless/core/rng.hpp"
#include "inkless/core/types.hpp"
#include "inkless/synth/tissue.hpp"

namespace inkless::synth {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// Palette: Black (20,20,20), Green (40,110,60), Blue (40,60,150); Opaque
// strokes use the black pigment.
Rgb palette_color(InkCategory category) noexcept;

inline constexpr double kOpaqueMinOpacity = 0.97;

struct StrokeSpec {
  InkCategory category = InkCategory::Black;
  double opacity = 0.7;
  double width = 8.0;
  std::vector<Point> control_points;
  int jitter = 15;
  // Overrides the palette color when set.
  std::optional<Rgb> color;

  // Throws SpecError for < 2 control points, out-of-range opacity, or
  // points outside a width x height patch.
  void validate(int width, int height) const;
};

struct StrokeResult {
  RasterImage inked;
  RasterImage stroke_mask;  // 1 channel, 255 on composited pixels
  Rgb ink_color;
};

// Composites round(a * ink + (1 - a) * clean) along the polyline; pixels off
// the stroke are copied unchanged. The jittered ink color is drawn from rng.
StrokeResult synthesize_stroke(const RasterImage& clean, const StrokeSpec& spec, RngStream& rng);

// Pixel-center distance test against the polyline; the footprint of a stroke.
RasterImage rasterize_polyline(int width, int height, const std::vector<Point>& points,
                               double stroke_width);

struct StrokeRanges {
  double opacity_min = 0.45;
  double opacity_max = 0.85;
  double width_min_fraction = 0.08;
  double width_max_fraction = 0.22;
};

StrokeSpec random_stroke_spec(InkCategory category, int width, int height, RngStream& rng,
                              const StrokeRanges& ranges = {});

// Category weights; parsed from "black=0.5,green=0.3,blue=0.1,opaque=0.1".
struct CategoryMix {
  std::map<InkCategory, double> weights;

  static CategoryMix parse(const std::string& text);
  InkCategory sample(RngStream& rng) const;
};

struct CorpusConfig {
  int n = 100;
  int patch_size = 64;
  CategoryMix mix = CategoryMix::parse("black=0.5,green=0.3,blue=0.1,opaque=0.1");
  std::uint64_t seed = 0;
  StrokeRanges ranges;
  TissueSpec tissue;
  int jobs = 1;
};

struct Triplet {
  std::size_t index = 0;
  RasterImage clean;
  RasterImage inked;
  RasterImage stroke_mask;
  StrokeSpec spec;
  Rgb ink_color;
  std::string clean_source;  // file name, or "procedural"
};

// In-memory corpus. With empty clean_sources, procedural tissue is generated;
// otherwise each triplet consumes a distinct source (InputError if fewer
// than n). Triplet i depends only on (seed, i).
std::vector<Triplet> generate_triplets(const std::vector<RasterImage>& clean_sources,
                                       const std::vector<std::string>& source_names,
                                       const CorpusConfig& config);

// Writes clean/, inked/, mask/ (NNNNN.png) and manifest.jsonl under out_dir.
std::vector<Triplet> generate_paired_corpus(const std::vector<RasterImage>& clean_sources,
                                            const std::vector<std::string>& source_names,
                                            const CorpusConfig& config,
                                            const std::filesystem::path& out_dir);

}  // namespace inkless::synth
