#include "inkless/eval/blobs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace inkless::eval {

double Blob::coverage(double px, double py) const noexcept {
  const double dx = px - cx;
  const double dy = py - cy;
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  const double u = c * dx + s * dy;
  const double v = -s * dx + c * dy;
  const double rho = std::sqrt((u * u) / (rx * rx) + (v * v) / (ry * ry));
  // Approximate signed distance to the outline in pixels.
  const double edge = (rho - 1.0) * std::min(rx, ry);
  return std::clamp(0.5 - edge, 0.0, 1.0);
}

std::vector<Blob> generate_blobs(const BlobFieldSpec& spec, RngStream& rng) {
  std::vector<Blob> blobs;
  for (int attempt = 0; attempt < spec.max_attempts && static_cast<int>(blobs.size()) < spec.count;
       ++attempt) {
    Blob b;
    const double r = rng.uniform(spec.radius_min, spec.radius_max);
    const double aspect = rng.uniform(1.0, spec.max_aspect);
    b.rx = r * aspect;
    b.ry = r;
    b.angle = rng.uniform(0.0, std::numbers::pi);
    const double lo = spec.margin + b.rx;
    if (spec.width - 2 * lo <= 0 || spec.height - 2 * lo <= 0) continue;
    b.cx = rng.uniform(lo, spec.width - lo);
    b.cy = rng.uniform(lo, spec.height - lo);
    b.hematoxylin = rng.uniform(spec.hematoxylin_min, spec.hematoxylin_max);
    const bool clear = std::all_of(blobs.begin(), blobs.end(), [&](const Blob& o) {
      return std::hypot(o.cx - b.cx, o.cy - b.cy) >= o.rx + b.rx + spec.min_gap;
    });
    if (clear) blobs.push_back(b);
  }
  return blobs;
}

RasterImage render_stains(int width, int height, const std::vector<double>& hematoxylin,
                          const std::vector<double>& eosin) {
  RasterImage out(width, height, 3);
  auto data = out.data();
  for (std::size_t i = 0; i < out.pixel_count(); ++i) {
    for (int c = 0; c < 3; ++c) {
      const double od = hematoxylin[i] * kStainMatrix[0][c] + eosin[i] * kStainMatrix[1][c];
      const double t = 255.0 * std::pow(10.0, -od);
      data[i * 3 + c] = static_cast<std::uint8_t>(std::clamp(std::lround(t), 0L, 255L));
    }
  }
  return out;
}

void splat_blobs(const std::vector<Blob>& blobs, int width, int height,
                 std::vector<double>& hematoxylin) {
  for (const auto& b : blobs) {
    const double reach = std::max(b.rx, b.ry) + 2.0;
    const int x0 = std::max(0, static_cast<int>(std::floor(b.cx - reach)));
    const int x1 = std::min(width - 1, static_cast<int>(std::ceil(b.cx + reach)));
    const int y0 = std::max(0, static_cast<int>(std::floor(b.cy - reach)));
    const int y1 = std::min(height - 1, static_cast<int>(std::ceil(b.cy + reach)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double cov = b.coverage(x + 0.5, y + 0.5);
        if (cov > 0.0) {
          hematoxylin[static_cast<std::size_t>(y) * width + x] += cov * b.hematoxylin;
        }
      }
    }
  }
}

RasterImage render_blob_image(int width, int height, const std::vector<Blob>& blobs,
                              double eosin) {
  const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  std::vector<double> h(n, 0.0);
  std::vector<double> e(n, eosin);
  splat_blobs(blobs, width, height, h);
  return render_stains(width, height, h, e);
}

}  // namespace inkless::eval
