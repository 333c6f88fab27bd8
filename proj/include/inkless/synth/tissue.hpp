#pragma once

#include <vector>

#include "inkless/core/raster.hpp"
#include "inkless/core/rng.hpp"
#include "inkless/eval/blobs.hpp"

namespace inkless::synth {

// Pseudo-H&E texture: smoothly varying eosin stroma with optional white
// glass/lumen gaps and hematoxylin nuclei from the blob generator.
struct TissueSpec {
  int width = 64;
  int height = 64;
  double eosin_mean = 0.32;
  double eosin_amplitude = 0.12;
  double fine_texture = 0.04;
  // Fraction of the area (approximately) left as empty glass.
  double lumen_fraction = 0.0;
  double nuclei_density = 2.5e-3;  // expected nuclei per pixel
  double nucleus_radius_min = 2.5;
  double nucleus_radius_max = 4.5;
};

struct TissueImage {
  RasterImage image;
  std::vector<eval::Blob> nuclei;
};

TissueImage generate_tissue(const TissueSpec& spec, RngStream& rng);

}  // namespace inkless::synth
