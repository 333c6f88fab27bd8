#pragma once

#include <array>
#include <vector>

#include "inkless/core/raster.hpp"
#include "inkless/core/rng.hpp"

namespace inkless::eval {

// Standard H&E optical-density stain vectors (hematoxylin, eosin, residual),
// unit-normalized, in R,G,B order.
inline constexpr std::array<std::array<double, 3>, 3> kStainMatrix = {{
    {0.650, 0.704, 0.286},
    {0.072, 0.990, 0.105},
    {0.268, 0.570, 0.776},
}};

// An elliptical nucleus-like blob.
struct Blob {
  double cx = 0.0;
  double cy = 0.0;
  double rx = 5.0;
  double ry = 5.0;
  double angle = 0.0;        // radians
  double hematoxylin = 0.6;  // optical-density concentration at full coverage

  // Fractional coverage of the pixel whose center is (px, py), ramped over one pixel.
  double coverage(double px, double py) const noexcept;
};

struct BlobFieldSpec {
  int width = 64;
  int height = 64;
  int count = 10;
  double radius_min = 3.0;
  double radius_max = 6.0;
  double max_aspect = 1.4;
  // Minimum gap between blob outlines, measured between bounding circles.
  double min_gap = 2.0;
  int margin = 0;
  double hematoxylin_min = 0.55;
  double hematoxylin_max = 0.75;
  int max_attempts = 2000;
};

// Rejection-samples up to spec.count non-overlapping blobs; may return fewer
// when the field is too crowded.
std::vector<Blob> generate_blobs(const BlobFieldSpec& spec, RngStream& rng);

// Beer-Lambert rendering: per-pixel stain concentrations -> RGB transmission.
// Both grids are row-major width*height.
RasterImage render_stains(int width, int height, const std::vector<double>& hematoxylin,
                          const std::vector<double>& eosin);

// Adds blob coverage * concentration to a hematoxylin grid.
void splat_blobs(const std::vector<Blob>& blobs, int width, int height,
                 std::vector<double>& hematoxylin);

// Blobs on a flat eosin background.
RasterImage render_blob_image(int width, int height, const std::vector<Blob>& blobs,
                              double eosin = 0.25);

}  // namespace inkless::eval
