#pragma once

#include <cstdint>
#include <vector>

#include "inkless/core/raster.hpp"

namespace inkless::eval {

struct NucleiConfig {
  int min_area = 40;
  // Pre-split components larger than this are treated as non-nuclear
  // (ink strokes, folds) and dropped; 0 disables the cap.
  int max_area = 1500;
  // Hematoxylin optical density floor under which Otsu's threshold is not trusted.
  double min_hematoxylin = 0.2;
  // Pixels above this concentration (pen ink, folds) are left out of the
  // Otsu histogram so they cannot pull the threshold above real nuclei.
  double otsu_ceiling = 1.0;
  // Dynamic (in pixels of distance) a distance-transform peak needs to seed its own nucleus.
  double split_dynamic = 1.0;
};

struct NucleiResult {
  int count = 0;
  int width = 0;
  int height = 0;
  std::vector<std::int32_t> labels;  // 0 = background, 1..count instances
};

// Hematoxylin concentration per pixel via optical-density color deconvolution.
std::vector<double> hematoxylin_channel(const RasterImage& image);

// Otsu threshold over `values` clipped to [lo, hi] in `bins` bins.
double otsu_threshold(const std::vector<double>& values, double lo, double hi, int bins = 256);

// Hematoxylin -> Otsu -> hole filling -> distance-transform watershed ->
// small-object removal. Deterministic.
NucleiResult count_nuclei(const RasterImage& image, const NucleiConfig& config = {});

struct NucleiDelta {
  long before = 0;
  long after = 0;
  long revived = 0;  // after - before, signed
};

NucleiDelta nuclei_delta(const RasterImage& before, const RasterImage& after,
                         const NucleiConfig& config = {});

}  // namespace inkless::eval
