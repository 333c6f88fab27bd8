#include "inkless/segment/ink_segmentation.hpp"

#include <opencv2/imgproc.hpp>

#include "inkless/core/color.hpp"
#include "inkless/core/error.hpp"

namespace inkless::segment {

namespace {

void validate_rule(const HueRule& r, const char* name) {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (r.hue_lo < 0.0 || r.hue_lo > 360.0 || r.hue_hi < 0.0 || r.hue_hi > 360.0 ||
      !in_unit(r.saturation_min) || !in_unit(r.value_max)) {
    throw ConfigError(std::string("malformed ink rule for ") + name);
  }
}

cv::Mat as_mat(RasterImage& img) {
  return cv::Mat(img.height(), img.width(), CV_8UC1, img.data().data());
}

}  // namespace

void InkThresholds::validate() const {
  if (dark_max < 0.0 || dark_max > 1.0) throw ConfigError("dark_max must lie in [0,1]");
  validate_rule(green, "green");
  validate_rule(blue, "blue");
  if (close_radius < 0) throw ConfigError("close_radius must be >= 0");
  if (min_area < 0) throw ConfigError("min_area must be >= 0");
}

bool is_ink_color(double r, double g, double b, const InkThresholds& t) noexcept {
  if (std::max({r, g, b}) <= t.dark_max * 255.0) return true;
  const Hsv hsv = rgb_to_hsv(r, g, b);
  for (const HueRule* rule : {&t.green, &t.blue}) {
    if (rule->contains_hue(hsv.h) && hsv.s >= rule->saturation_min && hsv.v <= rule->value_max) {
      return true;
    }
  }
  return false;
}

RasterImage downsample_mean(const RasterImage& slide, int downsample) {
  if (downsample < 1) throw ConfigError("downsample must be >= 1");
  if (slide.channels() != 3) throw FormatError("ink segmentation needs an RGB slide");
  if (downsample == 1) return slide;
  const int w = MarkerMask::mask_dim(slide.width(), downsample);
  const int h = MarkerMask::mask_dim(slide.height(), downsample);
  RasterImage out(w, h, 3);
  for (int my = 0; my < h; ++my) {
    for (int mx = 0; mx < w; ++mx) {
      const int x1 = std::min(slide.width(), (mx + 1) * downsample);
      const int y1 = std::min(slide.height(), (my + 1) * downsample);
      long sum[3] = {0, 0, 0};
      long n = 0;
      for (int y = my * downsample; y < y1; ++y) {
        for (int x = mx * downsample; x < x1; ++x) {
          for (int c = 0; c < 3; ++c) sum[c] += slide.at(x, y, c);
          ++n;
        }
      }
      for (int c = 0; c < 3; ++c) {
        out.at(mx, my, c) = static_cast<std::uint8_t>((2 * sum[c] + n) / (2 * n));
      }
    }
  }
  return out;
}

RasterImage raw_ink_pixels(const RasterImage& slide, const InkThresholds& t, int downsample) {
  const RasterImage small = downsample_mean(slide, downsample);
  RasterImage raw(small.width(), small.height(), 1, 0);
  for (int y = 0; y < small.height(); ++y) {
    for (int x = 0; x < small.width(); ++x) {
      if (is_ink_color(small.at(x, y, 0), small.at(x, y, 1), small.at(x, y, 2), t)) {
        raw.at(x, y) = 255;
      }
    }
  }
  return raw;
}

RasterImage clean_mask(const RasterImage& raw, int close_radius, int min_area) {
  RasterImage out = raw;
  cv::Mat m = as_mat(out);
  if (close_radius > 0) {
    const cv::Mat disc = cv::getStructuringElement(
        cv::MORPH_ELLIPSE, cv::Size(2 * close_radius + 1, 2 * close_radius + 1));
    cv::Mat closed;
    cv::morphologyEx(m, closed, cv::MORPH_CLOSE, disc);
    closed.copyTo(m);
  }
  if (min_area > 1) {
    cv::Mat labels, stats, centroids;
    const int n = cv::connectedComponentsWithStats(m, labels, stats, centroids, 8, CV_32S);
    std::vector<bool> keep(static_cast<std::size_t>(n), false);
    for (int i = 1; i < n; ++i) keep[i] = stats.at<int>(i, cv::CC_STAT_AREA) >= min_area;
    for (int y = 0; y < m.rows; ++y) {
      for (int x = 0; x < m.cols; ++x) {
        if (!keep[static_cast<std::size_t>(labels.at<int>(y, x))]) m.at<std::uint8_t>(y, x) = 0;
      }
    }
  }
  return out;
}

MarkerMask segment_ink(const RasterImage& slide, const InkThresholds& thresholds, int downsample,
                       std::string slide_id) {
  thresholds.validate();
  auto raw = raw_ink_pixels(slide, thresholds, downsample);
  return MarkerMask{std::move(slide_id), downsample,
                    clean_mask(raw, thresholds.close_radius, thresholds.min_area)};
}

OverrideMode parse_override_mode(const std::string& s) {
  if (s == "replace") return OverrideMode::Replace;
  if (s == "union") return OverrideMode::Union;
  if (s == "subtract") return OverrideMode::Subtract;
  throw ConfigError("unknown override mode '" + s + "'");
}

MarkerMask apply_mask_override(const MarkerMask& automatic, const MarkerMask& manual,
                               OverrideMode mode) {
  if (automatic.slide_id != manual.slide_id || automatic.downsample != manual.downsample ||
      automatic.mask.width() != manual.mask.width() ||
      automatic.mask.height() != manual.mask.height()) {
    throw AlignmentError("override mask geometry does not match the automatic mask");
  }
  MarkerMask out = automatic;
  auto dst = out.mask.data();
  const auto src = manual.mask.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const bool a = dst[i] != 0;
    const bool b = src[i] != 0;
    bool v = a;
    switch (mode) {
      case OverrideMode::Replace: v = b; break;
      case OverrideMode::Union: v = a || b; break;
      case OverrideMode::Subtract: v = a && !b; break;
    }
    dst[i] = v ? 255 : 0;
  }
  return out;
}

}  // namespace inkless::segment
