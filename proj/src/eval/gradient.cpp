#include "inkless/eval/gradient.hpp"

#include <algorithm>
#include <cmath>

#include "inkless/core/color.hpp"
#include "inkless/core/error.hpp"

namespace inkless::eval {

Grid luminance(const RasterImage& image) {
  Grid g{image.width(), image.height(), std::vector<double>(image.pixel_count())};
  const auto d = image.data();
  if (image.channels() == 1) {
    std::copy(d.begin(), d.end(), g.values.begin());
    return g;
  }
  for (std::size_t i = 0; i < image.pixel_count(); ++i) {
    g.values[i] = inkless::luminance(d[3 * i], d[3 * i + 1], d[3 * i + 2]);
  }
  return g;
}

Grid channel_plane(const RasterImage& image, int channel) {
  Grid g{image.width(), image.height(), std::vector<double>(image.pixel_count())};
  const auto d = image.data();
  const auto c = static_cast<std::size_t>(image.channels());
  for (std::size_t i = 0; i < image.pixel_count(); ++i) {
    g.values[i] = d[c * i + static_cast<std::size_t>(channel)];
  }
  return g;
}

Grid gradient_magnitude(const Grid& plane) {
  const int w = plane.width;
  const int h = plane.height;
  Grid out{w, h, std::vector<double>(plane.values.size(), 0.0)};
  auto px = [&](int x, int y) {
    return plane.at(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1));
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = (px(x + 1, y - 1) + 2.0 * px(x + 1, y) + px(x + 1, y + 1)) -
                        (px(x - 1, y - 1) + 2.0 * px(x - 1, y) + px(x - 1, y + 1));
      const double gy = (px(x - 1, y + 1) + 2.0 * px(x, y + 1) + px(x + 1, y + 1)) -
                        (px(x - 1, y - 1) + 2.0 * px(x, y - 1) + px(x + 1, y - 1));
      out.values[static_cast<std::size_t>(y) * w + x] = std::sqrt(gx * gx + gy * gy);
    }
  }
  return out;
}

Grid gradient_magnitude(const RasterImage& image) { return gradient_magnitude(luminance(image)); }

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw GeometryError("pearson: length mismatch");
  if (a.empty()) throw UndefinedCorrelation("pearson: empty input");
  const auto n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) throw UndefinedCorrelation("correlation undefined: constant input");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double gradient_correlation(const RasterImage& a, const RasterImage& b, GradientMode mode) {
  if (a.width() != b.width() || a.height() != b.height() || a.channels() != b.channels()) {
    throw GeometryError("gradient_correlation: images differ in size");
  }
  if (mode == GradientMode::Luminance || a.channels() == 1) {
    return pearson(gradient_magnitude(a).values, gradient_magnitude(b).values);
  }
  std::vector<double> ma, mb;
  for (int c = 0; c < a.channels(); ++c) {
    auto ga = gradient_magnitude(channel_plane(a, c)).values;
    auto gb = gradient_magnitude(channel_plane(b, c)).values;
    ma.insert(ma.end(), ga.begin(), ga.end());
    mb.insert(mb.end(), gb.begin(), gb.end());
  }
  return pearson(ma, mb);
}

SummaryStats summarize(std::span<const double> values) {
  SummaryStats s;
  s.n = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  s.min = values[0];
  s.max = values[0];
  for (double v : values) {
    sum += v;
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
  }
  s.mean = sum / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  return s;
}

}  // namespace inkless::eval
