#include "inkless/synth/tissue.hpp"

#include <algorithm>
#include <cmath>

namespace inkless::synth {

namespace {

// Cosine-interpolated value noise on a lattice with the given cell size.
class ValueNoise {
 public:
  ValueNoise(int width, int height, double cell, RngStream& rng)
      : cell_(cell),
        cols_(static_cast<int>(std::ceil(width / cell)) + 2),
        rows_(static_cast<int>(std::ceil(height / cell)) + 2) {
    lattice_.resize(static_cast<std::size_t>(cols_) * rows_);
    for (auto& v : lattice_) v = rng.uniform(-1.0, 1.0);
  }

  double at(double x, double y) const {
    const double gx = x / cell_;
    const double gy = y / cell_;
    const int ix = static_cast<int>(gx);
    const int iy = static_cast<int>(gy);
    const double fx = smooth(gx - ix);
    const double fy = smooth(gy - iy);
    const double a = node(ix, iy) * (1 - fx) + node(ix + 1, iy) * fx;
    const double b = node(ix, iy + 1) * (1 - fx) + node(ix + 1, iy + 1) * fx;
    return a * (1 - fy) + b * fy;
  }

 private:
  static double smooth(double t) { return 0.5 - 0.5 * std::cos(t * 3.14159265358979323846); }
  double node(int x, int y) const {
    return lattice_[static_cast<std::size_t>(std::min(y, rows_ - 1)) * cols_ + std::min(x, cols_ - 1)];
  }

  double cell_;
  int cols_;
  int rows_;
  std::vector<double> lattice_;
};

}  // namespace

TissueImage generate_tissue(const TissueSpec& spec, RngStream& rng) {
  const int w = spec.width;
  const int h = spec.height;
  const auto n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  ValueNoise coarse(w, h, 24.0, rng);
  ValueNoise fine(w, h, 4.0, rng);
  ValueNoise lumen(w, h, 20.0, rng);

  // Lumen threshold chosen so that roughly lumen_fraction of a uniform
  // [-1, 1] field falls below it.
  const double lumen_cut = -1.0 + 2.0 * std::clamp(spec.lumen_fraction, 0.0, 1.0);

  std::vector<double> eosin(n);
  std::vector<double> tissue_weight(n);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto i = static_cast<std::size_t>(y) * w + x;
      double e = spec.eosin_mean + spec.eosin_amplitude * coarse.at(x, y) +
                 spec.fine_texture * fine.at(x, y);
      double weight = 1.0;
      if (spec.lumen_fraction > 0.0) {
        // Soft edge over a narrow band of the lumen field.
        weight = std::clamp((lumen.at(x, y) - lumen_cut) / 0.08, 0.0, 1.0);
      }
      tissue_weight[i] = weight;
      eosin[i] = std::max(0.0, e) * weight;
    }
  }

  eval::BlobFieldSpec blob_spec;
  blob_spec.width = w;
  blob_spec.height = h;
  blob_spec.radius_min = spec.nucleus_radius_min;
  blob_spec.radius_max = spec.nucleus_radius_max;
  blob_spec.min_gap = 1.5;
  const double expected = spec.nuclei_density * static_cast<double>(n);
  blob_spec.count = static_cast<int>(std::floor(expected + rng.uniform()));
  auto nuclei = eval::generate_blobs(blob_spec, rng);
  // Nuclei only sit in tissue.
  std::erase_if(nuclei, [&](const eval::Blob& b) {
    const int x = std::clamp(static_cast<int>(b.cx), 0, w - 1);
    const int y = std::clamp(static_cast<int>(b.cy), 0, h - 1);
    return tissue_weight[static_cast<std::size_t>(y) * w + x] < 1.0;
  });

  std::vector<double> hema(n, 0.0);
  eval::splat_blobs(nuclei, w, h, hema);
  return TissueImage{eval::render_stains(w, h, hema, eosin), std::move(nuclei)};
}

}  // namespace inkless::synth
