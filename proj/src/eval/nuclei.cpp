#include "inkless/eval/nuclei.hpp"

#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <queue>
#include <tuple>

#include "inkless/core/error.hpp"
#include "inkless/eval/blobs.hpp"

namespace inkless::eval {

namespace {

using Mat3 = std::array<std::array<double, 3>, 3>;

Mat3 inverse(const Mat3& m) {
  const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                     m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                     m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  Mat3 r{};
  r[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
  r[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
  r[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
  r[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
  r[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
  r[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
  r[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
  r[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
  r[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
  return r;
}

constexpr std::array<std::pair<int, int>, 8> kNeighbors8 = {
    {{-1, -1}, {0, -1}, {1, -1}, {-1, 0}, {1, 0}, {-1, 1}, {0, 1}, {1, 1}}};

// Sets holes (background not 4-connected to the border) to foreground.
void fill_holes(std::vector<std::uint8_t>& fg, int w, int h) {
  std::vector<std::uint8_t> outside(fg.size(), 0);
  std::deque<int> queue;
  auto seed = [&](int x, int y) {
    const int i = y * w + x;
    if (!fg[i] && !outside[i]) {
      outside[i] = 1;
      queue.push_back(i);
    }
  };
  for (int x = 0; x < w; ++x) {
    seed(x, 0);
    seed(x, h - 1);
  }
  for (int y = 0; y < h; ++y) {
    seed(0, y);
    seed(w - 1, y);
  }
  while (!queue.empty()) {
    const int i = queue.front();
    queue.pop_front();
    const int x = i % w, y = i / w;
    if (x > 0) seed(x - 1, y);
    if (x + 1 < w) seed(x + 1, y);
    if (y > 0) seed(x, y - 1);
    if (y + 1 < h) seed(x, y + 1);
  }
  for (std::size_t i = 0; i < fg.size(); ++i) {
    if (!fg[i] && !outside[i]) fg[i] = 1;
  }
}

// Morphological reconstruction by dilation of `marker` under `mask`,
// alternating raster / anti-raster sweeps until stable.
std::vector<double> reconstruct(std::vector<double> marker, const std::vector<double>& mask, int w,
                                int h) {
  bool changed = true;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      const bool forward = pass == 0;
      for (int k = 0; k < w * h; ++k) {
        const int i = forward ? k : w * h - 1 - k;
        const int x = i % w, y = i / w;
        double v = marker[i];
        for (auto [dx, dy] : kNeighbors8) {
          const int nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          v = std::max(v, marker[ny * w + nx]);
        }
        v = std::min(v, mask[i]);
        if (v > marker[i]) {
          marker[i] = v;
          changed = true;
        }
      }
    }
  }
  return marker;
}

// Labels regional maxima (8-connected plateaus with no higher neighbor)
// among pixels where active != 0.
std::vector<std::int32_t> regional_maxima(const std::vector<double>& f,
                                          const std::vector<std::uint8_t>& active, int w, int h) {
  std::vector<std::int32_t> labels(f.size(), 0);
  std::vector<std::uint8_t> visited(f.size(), 0);
  std::int32_t next = 0;
  std::vector<int> plateau;
  for (int start = 0; start < w * h; ++start) {
    if (!active[start] || visited[start]) continue;
    plateau.clear();
    bool is_max = true;
    const double level = f[start];
    std::deque<int> queue{start};
    visited[start] = 1;
    while (!queue.empty()) {
      const int i = queue.front();
      queue.pop_front();
      plateau.push_back(i);
      const int x = i % w, y = i / w;
      for (auto [dx, dy] : kNeighbors8) {
        const int nx = x + dx, ny = y + dy;
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        const int j = ny * w + nx;
        if (!active[j]) continue;
        if (f[j] > level) {
          is_max = false;
        } else if (f[j] == level && !visited[j]) {
          visited[j] = 1;
          queue.push_back(j);
        }
      }
    }
    if (is_max) {
      ++next;
      for (int i : plateau) labels[i] = next;
    }
  }
  return labels;
}

// Priority flood of -distance from the seed labels, confined to the foreground.
void watershed(std::vector<std::int32_t>& labels, const std::vector<double>& dist,
               const std::vector<std::uint8_t>& fg, int w, int h) {
  // (priority, insertion order, pixel, label); highest distance first, FIFO on ties.
  using Entry = std::tuple<double, std::int64_t, int, std::int32_t>;
  auto cmp = [](const Entry& a, const Entry& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) < std::get<0>(b);
    return std::get<1>(a) > std::get<1>(b);
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(cmp)> queue(cmp);
  std::int64_t order = 0;
  std::vector<std::uint8_t> queued(labels.size(), 0);
  for (int i = 0; i < w * h; ++i) {
    if (labels[i] == 0) continue;
    const int x = i % w, y = i / w;
    for (auto [dx, dy] : kNeighbors8) {
      const int nx = x + dx, ny = y + dy;
      if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
      const int j = ny * w + nx;
      if (fg[j] && labels[j] == 0 && !queued[j]) {
        queued[j] = 1;
        queue.emplace(dist[j], order++, j, labels[i]);
      }
    }
  }
  while (!queue.empty()) {
    const auto [_, __, i, label] = queue.top();
    queue.pop();
    if (labels[i] != 0) continue;
    labels[i] = label;
    const int x = i % w, y = i / w;
    for (auto [dx, dy] : kNeighbors8) {
      const int nx = x + dx, ny = y + dy;
      if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
      const int j = ny * w + nx;
      if (fg[j] && labels[j] == 0 && !queued[j]) {
        queued[j] = 1;
        queue.emplace(dist[j], order++, j, label);
      }
    }
  }
}

}  // namespace

std::vector<double> hematoxylin_channel(const RasterImage& image) {
  if (image.channels() != 3) throw FormatError("nuclei counting needs an RGB image");
  static const Mat3 inv = inverse(kStainMatrix);
  std::vector<double> out(image.pixel_count());
  const auto d = image.data();
  for (std::size_t i = 0; i < image.pixel_count(); ++i) {
    double od[3];
    for (int c = 0; c < 3; ++c) {
      od[c] = -std::log10(std::max<double>(d[3 * i + c], 1.0) / 255.0);
    }
    // Concentrations c solve od = c * S, so c = od * S^-1; keep the hematoxylin term.
    out[i] = od[0] * inv[0][0] + od[1] * inv[1][0] + od[2] * inv[2][0];
  }
  return out;
}

double otsu_threshold(const std::vector<double>& values, double lo, double hi, int bins) {
  std::vector<double> hist(static_cast<std::size_t>(bins), 0.0);
  const double scale = bins / (hi - lo);
  for (double v : values) {
    const int b = std::clamp(static_cast<int>((std::clamp(v, lo, hi) - lo) * scale), 0, bins - 1);
    hist[static_cast<std::size_t>(b)] += 1.0;
  }
  const double total = static_cast<double>(values.size());
  double sum_all = 0.0;
  for (int b = 0; b < bins; ++b) sum_all += b * hist[static_cast<std::size_t>(b)];
  double w0 = 0.0, sum0 = 0.0, best = -1.0;
  int best_bin = 0;
  for (int b = 0; b < bins; ++b) {
    w0 += hist[static_cast<std::size_t>(b)];
    sum0 += b * hist[static_cast<std::size_t>(b)];
    const double w1 = total - w0;
    if (w0 <= 0.0 || w1 <= 0.0) continue;
    const double m0 = sum0 / w0;
    const double m1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best) {
      best = between;
      best_bin = b;
    }
  }
  // Values strictly above the upper edge of best_bin are foreground.
  return lo + (best_bin + 1) / scale;
}

NucleiResult count_nuclei(const RasterImage& image, const NucleiConfig& config) {
  const int w = image.width();
  const int h = image.height();
  NucleiResult result{0, w, h, std::vector<std::int32_t>(image.pixel_count(), 0)};
  if (image.pixel_count() == 0) return result;

  const auto hema = hematoxylin_channel(image);
  std::vector<double> stain;
  stain.reserve(hema.size());
  for (double v : hema) {
    if (v <= config.otsu_ceiling) stain.push_back(v);
  }
  const double threshold = stain.empty() ? config.min_hematoxylin
                                         : std::max(config.min_hematoxylin,
                                                    otsu_threshold(stain, 0.0, config.otsu_ceiling));
  std::vector<std::uint8_t> fg(hema.size(), 0);
  for (std::size_t i = 0; i < hema.size(); ++i) fg[i] = hema[i] > threshold;
  fill_holes(fg, w, h);

  cv::Mat binary(h, w, CV_8UC1);
  for (int i = 0; i < w * h; ++i) binary.data[i] = fg[static_cast<std::size_t>(i)] ? 255 : 0;

  if (config.max_area > 0) {
    cv::Mat cc, stats, centroids;
    const int n = cv::connectedComponentsWithStats(binary, cc, stats, centroids, 8, CV_32S);
    for (int i = 0; i < w * h; ++i) {
      const int label = cc.at<int>(i / w, i % w);
      if (label > 0 && label < n && stats.at<int>(label, cv::CC_STAT_AREA) > config.max_area) {
        fg[static_cast<std::size_t>(i)] = 0;
        binary.data[i] = 0;
      }
    }
  }

  cv::Mat dist_mat;
  cv::distanceTransform(binary, dist_mat, cv::DIST_L2, cv::DIST_MASK_PRECISE, CV_32F);
  std::vector<double> dist(static_cast<std::size_t>(w) * h);
  for (int i = 0; i < w * h; ++i) dist[static_cast<std::size_t>(i)] = dist_mat.at<float>(i / w, i % w);

  // h-maxima transform: peaks whose dynamic is below split_dynamic merge.
  std::vector<double> lowered(dist.size());
  for (std::size_t i = 0; i < dist.size(); ++i) lowered[i] = std::max(0.0, dist[i] - config.split_dynamic);
  const auto hmax = reconstruct(std::move(lowered), dist, w, h);
  auto seeds = regional_maxima(hmax, fg, w, h);
  watershed(seeds, dist, fg, w, h);

  // Drop undersized instances and relabel consecutively in scan order.
  std::int32_t max_label = 0;
  for (auto l : seeds) max_label = std::max(max_label, l);
  std::vector<int> area(static_cast<std::size_t>(max_label) + 1, 0);
  for (auto l : seeds) ++area[static_cast<std::size_t>(l)];
  std::vector<std::int32_t> remap(area.size(), 0);
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const auto l = static_cast<std::size_t>(seeds[i]);
    if (l == 0 || area[l] < config.min_area) continue;
    if (remap[l] == 0) remap[l] = ++result.count;
    result.labels[i] = remap[l];
  }
  return result;
}

NucleiDelta nuclei_delta(const RasterImage& before, const RasterImage& after,
                         const NucleiConfig& config) {
  if (before.width() != after.width() || before.height() != after.height()) {
    throw GeometryError("nuclei_delta: before/after sizes differ");
  }
  NucleiDelta d;
  d.before = count_nuclei(before, config).count;
  d.after = count_nuclei(after, config).count;
  d.revived = d.after - d.before;
  return d;
}

}  // namespace inkless::eval
