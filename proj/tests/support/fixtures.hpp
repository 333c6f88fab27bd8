#pragma once

#include <vector>

#include "inkless/core/raster.hpp"
#include "inkless/eval/blobs.hpp"

namespace inkless::test {

struct OccludedSlide {
  RasterImage clean;
  RasterImage inked;
  int blobs = 0;
  int hidden = 0;
};

// A cols x rows lattice of round nuclei (radius 6, centers 40 px apart) on
// eosin; opaque black bands hide the first `hidden` blobs in row-major order.
// Each band covers whole lattice rows or a prefix of one, so it is far larger
// than any nucleus.
inline OccludedSlide occluded_blob_slide(int cols, int rows, int hidden, double jitter_seed = 0.0) {
  const int spacing = 40;
  const int w = cols * spacing;
  const int h = rows * spacing;
  std::vector<eval::Blob> blobs;
  for (int j = 0; j < rows; ++j) {
    for (int i = 0; i < cols; ++i) {
      eval::Blob b;
      const double wobble = jitter_seed * ((i * 7 + j * 13) % 5 - 2) * 0.3;
      b.cx = 20.0 + spacing * i + wobble;
      b.cy = 20.0 + spacing * j - wobble;
      b.rx = b.ry = 6.0;
      b.hematoxylin = 0.65;
      blobs.push_back(b);
    }
  }
  OccludedSlide s;
  s.clean = eval::render_blob_image(w, h, blobs);
  s.inked = s.clean;
  s.blobs = cols * rows;
  s.hidden = hidden;
  for (int k = 0; k < hidden; k += cols) {
    const int row = k / cols;
    const int n = std::min(cols, hidden - k);
    const int x1 = n == cols ? w : n * spacing;
    for (int y = row * spacing + 4; y < (row + 1) * spacing - 4; ++y) {
      for (int x = 0; x < x1; ++x) {
        for (int c = 0; c < 3; ++c) s.inked.at(x, y, c) = 20;
      }
    }
  }
  return s;
}

}  // namespace inkless::test
