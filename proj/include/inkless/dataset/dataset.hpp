#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "inkless/core/manifest.hpp"
#include "inkless/core/raster.hpp"
#include "inkless/core/types.hpp"

namespace inkless::dataset {

struct SamplerConfig {
  int patch_size = 128;
  std::size_t total_patches = 250000;
  double marker_fraction = 0.5;
  double background_cap = 0.25;
  double tissue_threshold = 0.05;
  double balance_tolerance = 0.01;
  // Attempts allowed per label are max_attempts_factor * quota.
  std::size_t max_attempts_factor = 1000;
  std::uint64_t seed = 0;
  int jobs = 1;

  void validate() const;  // throws ConfigError
};

// Fraction of non-glass pixels: saturation >= 0.08 or value <= 0.88.
double tissue_fraction(const RasterImage& patch);

// Marker if the footprint touches any ink cell (covering-rectangle rule at
// mask resolution); otherwise tissue/background by tissue_fraction >= tau.
PatchLabel classify_patch(const std::string& slide_id, int x, int y, int size,
                          const MarkerMask& mask, const RasterImage& patch, double tau);

struct SlideEntry {
  std::string id;
  RasterImage image;
  MarkerMask mask;
  InkCategory category = InkCategory::Black;
  Split split = Split::Train;
};

// Crops the footprint from the slide and classifies it.
PatchLabel classify_at(const SlideEntry& slide, int x, int y, int size, double tau);

// Per-slide quotas: marker records proportional to each slide's inked area,
// clean records proportional to its uninked area (largest remainder). Each
// slide is sampled with RngStream(seed, slide index); output is sorted.
DatasetManifest build_manifest(const std::vector<SlideEntry>& slides, const SamplerConfig& config);

// Writes {out_dir}/{label}/{slide_id}_{x}_{y}.png for every record.
void materialize(const DatasetManifest& manifest, const std::vector<SlideEntry>& slides,
                 const std::filesystem::path& out_dir);

std::string patch_file_name(const PatchRecord& record);

// Slides directory layout: <id>.png with a sidecar <id>.json
// {"category": "...", "split": "..."}; masks directory: <id>.mask.png plus
// its mask sidecar.
std::vector<SlideEntry> load_slide_set(const std::filesystem::path& slides_dir,
                                       const std::filesystem::path& masks_dir);

}  // namespace inkless::dataset
