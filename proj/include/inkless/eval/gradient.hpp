#pragma once

#include <map>
#include <span>
#include <vector>

#include "inkless/core/raster.hpp"

namespace inkless::eval {

struct Grid {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  double at(int x, int y) const noexcept {
    return values[static_cast<std::size_t>(y) * width + x];
  }
};

// 0.299 R + 0.587 G + 0.114 B for RGB input; the samples themselves for gray.
Grid luminance(const RasterImage& image);
Grid channel_plane(const RasterImage& image, int channel);

// Sobel magnitude sqrt(gx^2 + gy^2) with edge-replicated borders.
Grid gradient_magnitude(const Grid& plane);
Grid gradient_magnitude(const RasterImage& image);

// Pearson correlation; throws UndefinedCorrelation if either input is constant.
double pearson(std::span<const double> a, std::span<const double> b);

enum class GradientMode { Luminance, PerChannel };

// Pearson correlation of the two images' gradient-magnitude maps. PerChannel
// concatenates the R, G, B magnitude maps. Throws GeometryError on dim mismatch.
double gradient_correlation(const RasterImage& a, const RasterImage& b,
                            GradientMode mode = GradientMode::Luminance);

struct SummaryStats {
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1); 0 for n < 2
  double min = 0.0;
  double max = 0.0;
};

SummaryStats summarize(std::span<const double> values);

}  // namespace inkless::eval
