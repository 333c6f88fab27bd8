#include "inkless/dataset/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <utility>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "inkless/core/color.hpp"
#include "inkless/core/error.hpp"
#include "inkless/core/files.hpp"
#include "inkless/core/parallel.hpp"
#include "inkless/core/rng.hpp"

namespace inkless::dataset {

namespace fs = std::filesystem;

void SamplerConfig::validate() const {
  if (patch_size < 1) throw ConfigError("patch_size must be >= 1");
  if (!(marker_fraction > 0.0 && marker_fraction < 1.0)) {
    throw ConfigError("marker_fraction must lie in (0,1)");
  }
  if (!(background_cap >= 0.0 && background_cap <= 0.25)) {
    throw ConfigError("background_cap must lie in [0,0.25]");
  }
  if (!(tissue_threshold >= 0.0 && tissue_threshold <= 1.0)) {
    throw ConfigError("tissue_threshold must lie in [0,1]");
  }
  if (balance_tolerance < 0.0) throw ConfigError("balance_tolerance must be >= 0");
  if (max_attempts_factor < 1) throw ConfigError("max_attempts_factor must be >= 1");
}

double tissue_fraction(const RasterImage& patch) {
  if (patch.channels() != 3) throw FormatError("tissue_fraction needs an RGB patch");
  if (patch.pixel_count() == 0) return 0.0;
  std::size_t tissue = 0;
  const auto d = patch.data();
  for (std::size_t i = 0; i < patch.pixel_count(); ++i) {
    const Hsv hsv = rgb_to_hsv(d[3 * i], d[3 * i + 1], d[3 * i + 2]);
    if (hsv.s >= 0.08 || hsv.v <= 0.88) ++tissue;
  }
  return static_cast<double>(tissue) / static_cast<double>(patch.pixel_count());
}

PatchLabel classify_patch(const std::string& slide_id, int x, int y, int size,
                          const MarkerMask& mask, const RasterImage& patch, double tau) {
  if (!mask.slide_id.empty() && !slide_id.empty() && mask.slide_id != slide_id) {
    throw AlignmentError("mask belongs to " + mask.slide_id + ", not " + slide_id);
  }
  const int full_w = mask.mask.width() * mask.downsample;
  const int full_h = mask.mask.height() * mask.downsample;
  if (x < 0 || y < 0 || size < 1 || x + size > full_w || y + size > full_h) {
    throw BoundsError("patch footprint outside slide " + slide_id);
  }
  if (mask.intersects(x, y, size, size)) return PatchLabel::Marker;
  return tissue_fraction(patch) >= tau ? PatchLabel::CleanTissue : PatchLabel::CleanBackground;
}

PatchLabel classify_at(const SlideEntry& slide, int x, int y, int size, double tau) {
  if (x < 0 || y < 0 || x + size > slide.image.width() || y + size > slide.image.height()) {
    throw BoundsError("patch footprint outside slide " + slide.id);
  }
  if (slide.mask.intersects(x, y, size, size)) return PatchLabel::Marker;
  return classify_patch(slide.id, x, y, size, slide.mask, crop(slide.image, x, y, size, size), tau);
}

namespace {

// Largest-remainder apportionment of `total` over non-negative weights; ties
// go to the lower index.
std::vector<std::size_t> apportion(std::size_t total, const std::vector<double>& weights) {
  std::vector<std::size_t> out(weights.size(), 0);
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (total == 0 || sum <= 0.0) return out;
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = static_cast<double>(total) * weights[i] / sum;
    out[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += out[i];
    if (weights[i] > 0.0) remainders.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < total && k < remainders.size(); ++k, ++assigned) {
    ++out[remainders[k].second];
  }
  return out;
}

struct SlideQuota {
  std::size_t marker = 0;
  std::size_t clean = 0;
  std::size_t background_cap = 0;
};

std::vector<PatchRecord> sample_slide(const SlideEntry& slide, std::size_t index,
                                      const SlideQuota& quota, const SamplerConfig& cfg) {
  RngStream rng(cfg.seed, index);
  const int size = cfg.patch_size;
  std::vector<PatchRecord> out;
  std::set<std::pair<int, int>> taken;
  std::size_t marker = 0, tissue = 0, background = 0;
  std::size_t marker_attempts = 0, clean_attempts = 0;
  const std::size_t marker_budget = cfg.max_attempts_factor * quota.marker;
  const std::size_t clean_budget = cfg.max_attempts_factor * quota.clean;

  auto record = [&](int x, int y, PatchLabel label) {
    out.push_back(PatchRecord{slide.id, x, y, size, label, slide.category, slide.split});
  };

  while (marker < quota.marker || tissue + background < quota.clean) {
    const bool want_marker = marker < quota.marker;
    const bool want_clean = tissue + background < quota.clean;
    if (want_marker && marker_attempts >= marker_budget) {
      throw SamplingExhausted("marker", "slide " + slide.id + ": marker quota unreachable after " +
                                            std::to_string(marker_attempts) + " attempts");
    }
    if (want_clean && clean_attempts >= clean_budget) {
      const char* label = background >= quota.background_cap ? "clean_tissue" : "clean_background";
      throw SamplingExhausted(label, "slide " + slide.id + ": clean quota unreachable after " +
                                         std::to_string(clean_attempts) + " attempts");
    }
    const int x = static_cast<int>(rng.uniform_int(0, slide.image.width() - size));
    const int y = static_cast<int>(rng.uniform_int(0, slide.image.height() - size));
    if (want_marker) ++marker_attempts;
    if (want_clean) ++clean_attempts;
    if (taken.contains({x, y})) continue;
    const PatchLabel label = classify_at(slide, x, y, size, cfg.tissue_threshold);
    bool accept = false;
    switch (label) {
      case PatchLabel::Marker:
        accept = want_marker;
        if (accept) ++marker;
        break;
      case PatchLabel::CleanTissue:
        accept = want_clean;
        if (accept) ++tissue;
        break;
      case PatchLabel::CleanBackground:
        accept = want_clean && background < quota.background_cap;
        if (accept) ++background;
        break;
    }
    if (accept) {
      taken.insert({x, y});
      record(x, y, label);
    }
  }
  return out;
}

}  // namespace

DatasetManifest build_manifest(const std::vector<SlideEntry>& slides, const SamplerConfig& config) {
  config.validate();
  if (slides.empty()) throw InputError("build_manifest needs at least one slide");
  std::set<std::string> ids;
  for (const auto& s : slides) {
    if (s.image.channels() != 3) throw FormatError("slide " + s.id + " is not RGB");
    if (s.image.width() < config.patch_size || s.image.height() < config.patch_size) {
      throw GeometryError("slide " + s.id + " is smaller than the patch size");
    }
    s.mask.check_aligned(s.image.width(), s.image.height());
    if (!ids.insert(s.id).second) throw InputError("duplicate slide id " + s.id);
  }

  const auto marker_total = static_cast<std::size_t>(
      std::llround(static_cast<double>(config.total_patches) * config.marker_fraction));
  const std::size_t clean_total = config.total_patches - marker_total;

  std::vector<double> ink_area, clean_area;
  for (const auto& s : slides) {
    const double cell = static_cast<double>(s.mask.downsample) * s.mask.downsample;
    const double inked = std::min(static_cast<double>(s.mask.ink_cells()) * cell,
                                  static_cast<double>(s.image.pixel_count()));
    ink_area.push_back(inked);
    clean_area.push_back(static_cast<double>(s.image.pixel_count()) - inked);
  }
  if (marker_total > 0 && std::accumulate(ink_area.begin(), ink_area.end(), 0.0) <= 0.0) {
    throw SamplingExhausted("marker", "no slide contains ink; marker quota unreachable");
  }
  if (clean_total > 0 && std::accumulate(clean_area.begin(), clean_area.end(), 0.0) <= 0.0) {
    throw SamplingExhausted("clean_tissue", "no slide has uninked area; clean quota unreachable");
  }
  const auto marker_quota = apportion(marker_total, ink_area);
  const auto clean_quota = apportion(clean_total, clean_area);

  std::vector<std::vector<PatchRecord>> per_slide(slides.size());
  parallel_for(slides.size(), config.jobs, [&](std::size_t i) {
    SlideQuota q;
    q.marker = marker_quota[i];
    q.clean = clean_quota[i];
    q.background_cap =
        static_cast<std::size_t>(std::floor(config.background_cap * static_cast<double>(q.clean)));
    per_slide[i] = sample_slide(slides[i], i, q, config);
  });

  DatasetManifest manifest;
  manifest.seed = config.seed;
  for (auto& v : per_slide) {
    manifest.records.insert(manifest.records.end(), std::make_move_iterator(v.begin()),
                            std::make_move_iterator(v.end()));
  }
  std::sort(manifest.records.begin(), manifest.records.end(), canonical_less);
  manifest.counts = tally(manifest.records);
  spdlog::info("manifest: {} marker, {} clean tissue, {} background (seed {})",
               manifest.counts.of(PatchLabel::Marker), manifest.counts.of(PatchLabel::CleanTissue),
               manifest.counts.of(PatchLabel::CleanBackground), config.seed);
  return manifest;
}

std::string patch_file_name(const PatchRecord& r) {
  return r.slide_id + "_" + std::to_string(r.x) + "_" + std::to_string(r.y) + ".png";
}

void materialize(const DatasetManifest& manifest, const std::vector<SlideEntry>& slides,
                 const fs::path& out_dir) {
  std::map<std::string, const SlideEntry*> by_id;
  for (const auto& s : slides) by_id[s.id] = &s;
  for (auto l : kAllLabels) fs::create_directories(out_dir / std::string(to_string(l)));
  for (const auto& r : manifest.records) {
    auto it = by_id.find(r.slide_id);
    if (it == by_id.end()) throw LookupError("slide " + r.slide_id + " is not available");
    save_raster(crop(it->second->image, r.x, r.y, r.size, r.size),
                out_dir / std::string(to_string(r.label)) / patch_file_name(r));
  }
}

std::vector<SlideEntry> load_slide_set(const fs::path& slides_dir, const fs::path& masks_dir) {
  std::vector<SlideEntry> out;
  for (const auto& path : list_files(slides_dir, ".png")) {
    SlideEntry e;
    e.id = path.stem().string();
    e.image = load_raster(path);
    auto sidecar = path;
    sidecar.replace_extension(".json");
    if (fs::exists(sidecar)) {
      try {
        auto meta = nlohmann::json::parse(read_text(sidecar));
        e.category = parse_category(meta.value("category", "black"));
        e.split = parse_split(meta.value("split", "train"));
      } catch (const nlohmann::json::exception& ex) {
        throw FormatError("bad slide sidecar " + sidecar.string() + ": " + ex.what());
      }
    }
    const auto mask_path = masks_dir / (e.id + ".mask.png");
    if (!fs::exists(mask_path)) throw LookupError("no mask for slide " + e.id);
    e.mask = load_mask(mask_path);
    if (e.mask.slide_id != e.id) throw AlignmentError("mask slide_id mismatch for " + e.id);
    e.mask.check_aligned(e.image.width(), e.image.height());
    out.push_back(std::move(e));
  }
  if (out.empty()) throw InputError("no slides found in " + slides_dir.string());
  return out;
}

}  // namespace inkless::dataset
