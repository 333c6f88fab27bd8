#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "inkless/core/types.hpp"

namespace inkless {

struct PatchRecord {
  std::string slide_id;
  int x = 0;
  int y = 0;
  int size = 128;
  PatchLabel label = PatchLabel::CleanTissue;
  InkCategory category = InkCategory::Black;
  Split split = Split::Train;

  friend bool operator==(const PatchRecord&, const PatchRecord&) = default;
};

// Canonical record order: (slide_id, x, y).
bool canonical_less(const PatchRecord& a, const PatchRecord& b) noexcept;

struct ManifestCounts {
  std::map<PatchLabel, std::size_t> per_label;
  std::map<InkCategory, std::map<PatchLabel, std::size_t>> per_category;

  std::size_t total() const noexcept;
  std::size_t of(PatchLabel l) const noexcept;
  std::size_t clean() const noexcept {
    return of(PatchLabel::CleanTissue) + of(PatchLabel::CleanBackground);
  }
  friend bool operator==(const ManifestCounts&, const ManifestCounts&) = default;
};

ManifestCounts tally(const std::vector<PatchRecord>& records);

struct DatasetManifest {
  std::vector<PatchRecord> records;
  std::uint64_t seed = 0;
  ManifestCounts counts;

  // Throws DataError if the background cap or the marker/clean balance
  // (|marker - marker_fraction * total| <= balance_tolerance * total) fails.
  void check_invariants(double background_cap = 0.25, double marker_fraction = 0.5,
                        double balance_tolerance = 0.01) const;
};

// JSON Lines: one header object {"seed", "counts"} then one object per record.
std::string to_jsonl(const DatasetManifest& manifest);
DatasetManifest parse_jsonl(const std::string& text);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);

}  // namespace inkless
