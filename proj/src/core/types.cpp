#include "inkless/core/types.hpp"

#include <spdlog/spdlog.h>

#include <nlohmann/json.hpp>

#include "inkless/core/error.hpp"
#include "inkless/core/files.hpp"

namespace inkless {

std::string_view to_string(InkCategory c) noexcept {
  switch (c) {
    case InkCategory::Black: return "black";
    case InkCategory::Blue: return "blue";
    case InkCategory::Green: return "green";
    case InkCategory::Opaque: return "opaque";
  }
  return "black";
}

InkCategory parse_category(std::string_view s) {
  for (auto c : kAllCategories) {
    if (to_string(c) == s) return c;
  }
  throw FormatError("unknown ink category '" + std::string(s) + "'");
}

std::string_view to_string(PatchLabel l) noexcept {
  switch (l) {
    case PatchLabel::Marker: return "marker";
    case PatchLabel::CleanTissue: return "clean_tissue";
    case PatchLabel::CleanBackground: return "clean_background";
  }
  return "marker";
}

PatchLabel parse_label(std::string_view s) {
  for (auto l : kAllLabels) {
    if (to_string(l) == s) return l;
  }
  throw FormatError("unknown patch label '" + std::string(s) + "'");
}

std::string_view to_string(Split s) noexcept {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw FormatError("unknown split '" + std::string(s) + "'");
}

MarkerMask MarkerMask::empty_for(std::string slide_id, int slide_width, int slide_height,
                                 int downsample) {
  if (downsample < 1) throw ConfigError("downsample must be >= 1");
  return MarkerMask{std::move(slide_id), downsample,
                    RasterImage(mask_dim(slide_width, downsample),
                                mask_dim(slide_height, downsample), 1, 0)};
}

bool MarkerMask::intersects(int x, int y, int w, int h) const noexcept {
  if (w <= 0 || h <= 0) return false;
  const int mx0 = std::max(0, x / downsample);
  const int my0 = std::max(0, y / downsample);
  const int mx1 = std::min(mask.width(), (x + w + downsample - 1) / downsample);
  const int my1 = std::min(mask.height(), (y + h + downsample - 1) / downsample);
  for (int my = my0; my < my1; ++my) {
    for (int mx = mx0; mx < mx1; ++mx) {
      if (mask.at(mx, my) != 0) return true;
    }
  }
  return false;
}

std::size_t MarkerMask::ink_cells() const noexcept {
  std::size_t n = 0;
  for (auto v : mask.data()) n += v != 0;
  return n;
}

void MarkerMask::check_aligned(int slide_width, int slide_height) const {
  if (downsample < 1) throw AlignmentError("mask downsample must be >= 1");
  if (mask.channels() != 1) throw AlignmentError("mask must be single-channel");
  if (mask.width() != mask_dim(slide_width, downsample) ||
      mask.height() != mask_dim(slide_height, downsample)) {
    throw AlignmentError("mask " + slide_id + " is " + std::to_string(mask.width()) + "x" +
                         std::to_string(mask.height()) + ", expected ceil(slide/" +
                         std::to_string(downsample) + ")");
  }
}

std::filesystem::path mask_sidecar_path(const std::filesystem::path& mask_path) {
  auto p = mask_path;
  p += ".json";
  return p;
}

MarkerMask load_mask(const std::filesystem::path& path) {
  auto raster = load_raster(path);
  if (raster.channels() != 1) throw FormatError("mask must be single-channel: " + path.string());
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_text(mask_sidecar_path(path)));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad mask sidecar for " + path.string() + ": " + e.what());
  }
  if (!meta.contains("slide_id") || !meta.contains("downsample")) {
    throw FormatError("mask sidecar needs slide_id and downsample: " + path.string());
  }
  std::size_t fixed = 0;
  for (auto& v : raster.data()) {
    if (v != 0 && v != 255) {
      ++fixed;
      v = v >= 128 ? 255 : 0;
    }
  }
  if (fixed > 0) {
    spdlog::warn("mask {}: thresholded {} non-binary samples at 128", path.string(), fixed);
  }
  const int downsample = meta.at("downsample").get<int>();
  if (downsample < 1) throw FormatError("mask downsample must be >= 1");
  return MarkerMask{meta.at("slide_id").get<std::string>(), downsample, std::move(raster)};
}

void save_mask(const MarkerMask& mask, const std::filesystem::path& path) {
  save_raster(mask.mask, path);
  nlohmann::json meta = {{"slide_id", mask.slide_id}, {"downsample", mask.downsample}};
  write_text_atomic(mask_sidecar_path(path), meta.dump() + "\n");
}

}  // namespace inkless
