#pragma once

#include <array>
#include <compare>
#include <optional>
#include <string>
#include <string_view>

#include "inkless/core/raster.hpp"

namespace inkless {

enum class InkCategory { Black, Blue, Green, Opaque };

inline constexpr std::array<InkCategory, 4> kAllCategories = {
    InkCategory::Black, InkCategory::Blue, InkCategory::Green, InkCategory::Opaque};

std::string_view to_string(InkCategory c) noexcept;
InkCategory parse_category(std::string_view s);  // throws FormatError

enum class PatchLabel { Marker, CleanTissue, CleanBackground };

inline constexpr std::array<PatchLabel, 3> kAllLabels = {
    PatchLabel::Marker, PatchLabel::CleanTissue, PatchLabel::CleanBackground};

std::string_view to_string(PatchLabel l) noexcept;
PatchLabel parse_label(std::string_view s);

enum class Split { Train, Val, Test };

std::string_view to_string(Split s) noexcept;
Split parse_split(std::string_view s);

// Binary ink mask aligned to a slide at an integer downsample factor.
// Samples are 0 (clean) or 255 (ink); dims are ceil(slide_dims / downsample).
struct MarkerMask {
  std::string slide_id;
  int downsample = 1;
  RasterImage mask;

  static int mask_dim(int slide_dim, int downsample) noexcept {
    return (slide_dim + downsample - 1) / downsample;
  }
  static MarkerMask empty_for(std::string slide_id, int slide_width, int slide_height,
                              int downsample);

  bool is_ink(int mx, int my) const noexcept { return mask.at(mx, my) != 0; }
  // True if any mask cell covering the full-resolution rectangle is ink.
  bool intersects(int x, int y, int w, int h) const noexcept;
  std::size_t ink_cells() const noexcept;
  // Validates the invariants against a slide of the given size; throws AlignmentError.
  void check_aligned(int slide_width, int slide_height) const;
};

// Mask I/O: single-channel PNG plus a JSON sidecar {slide_id, downsample}
// at "<path>.json". Non-binary samples are thresholded at 128 with a warning.
MarkerMask load_mask(const std::filesystem::path& path);
void save_mask(const MarkerMask& mask, const std::filesystem::path& path);
std::filesystem::path mask_sidecar_path(const std::filesystem::path& mask_path);

}  // namespace inkless
