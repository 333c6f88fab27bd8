#include "inkless/synth/synthetic_ink.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "inkless/core/error.hpp"
#include "inkless/core/files.hpp"
#include "inkless/core/parallel.hpp"

namespace inkless::synth {

namespace fs = std::filesystem;

Rgb palette_color(InkCategory category) noexcept {
  switch (category) {
    case InkCategory::Green: return {40, 110, 60};
    case InkCategory::Blue: return {40, 60, 150};
    case InkCategory::Black:
    case InkCategory::Opaque: return {20, 20, 20};
  }
  return {20, 20, 20};
}

void StrokeSpec::validate(int width, int height) const {
  if (control_points.empty()) throw SpecError("stroke has no control points");
  if (control_points.size() < 2) throw SpecError("stroke needs at least two control points");
  if (!(opacity >= 0.0 && opacity <= 1.0)) throw SpecError("stroke opacity outside [0,1]");
  if (category == InkCategory::Opaque && opacity < kOpaqueMinOpacity) {
    throw SpecError("opaque strokes need opacity >= 0.97");
  }
  if (!(this->width > 0.0)) throw SpecError("stroke width must be positive");
  if (jitter < 0) throw SpecError("jitter must be >= 0");
  for (const auto& p : control_points) {
    if (p.x < 0.0 || p.y < 0.0 || p.x > width || p.y > height) {
      throw SpecError("stroke control point outside the patch");
    }
  }
}

namespace {

double segment_distance(double px, double py, const Point& a, const Point& b) {
  const double vx = b.x - a.x;
  const double vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? ((px - a.x) * vx + (py - a.y) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(px - (a.x + t * vx), py - (a.y + t * vy));
}

std::uint8_t blend(double alpha, std::uint8_t ink, std::uint8_t clean) {
  const double v = alpha * ink + (1.0 - alpha) * clean;
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace

RasterImage rasterize_polyline(int width, int height, const std::vector<Point>& points,
                               double stroke_width) {
  RasterImage mask(width, height, 1, 0);
  const double half = stroke_width / 2.0;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double px = x + 0.5;
      const double py = y + 0.5;
      for (std::size_t i = 0; i + 1 < points.size(); ++i) {
        if (segment_distance(px, py, points[i], points[i + 1]) <= half) {
          mask.at(x, y) = 255;
          break;
        }
      }
    }
  }
  return mask;
}

StrokeResult synthesize_stroke(const RasterImage& clean, const StrokeSpec& spec, RngStream& rng) {
  if (clean.channels() != 3) throw FormatError("synthesize_stroke needs an RGB patch");
  spec.validate(clean.width(), clean.height());
  const Rgb base = spec.color.value_or(palette_color(spec.category));
  auto jittered = [&](std::uint8_t v) {
    const auto d = spec.jitter > 0 ? rng.uniform_int(-spec.jitter, spec.jitter) : 0;
    return static_cast<std::uint8_t>(std::clamp<std::int64_t>(v + d, 0, 255));
  };
  const Rgb ink{jittered(base.r), jittered(base.g), jittered(base.b)};
  const std::uint8_t ink_ch[3] = {ink.r, ink.g, ink.b};

  StrokeResult out{clean, rasterize_polyline(clean.width(), clean.height(), spec.control_points,
                                             spec.width),
                   ink};
  for (int y = 0; y < clean.height(); ++y) {
    for (int x = 0; x < clean.width(); ++x) {
      if (out.stroke_mask.at(x, y) == 0) continue;
      for (int c = 0; c < 3; ++c) out.inked.at(x, y, c) = blend(spec.opacity, ink_ch[c], clean.at(x, y, c));
    }
  }
  return out;
}

StrokeSpec random_stroke_spec(InkCategory category, int width, int height, RngStream& rng,
                              const StrokeRanges& ranges) {
  StrokeSpec spec;
  spec.category = category;
  spec.opacity = category == InkCategory::Opaque
                     ? rng.uniform(kOpaqueMinOpacity, 1.0)
                     : rng.uniform(ranges.opacity_min, ranges.opacity_max);
  const double size = std::min(width, height);
  spec.width = rng.uniform(ranges.width_min_fraction, ranges.width_max_fraction) * size;

  // Enter through one border and leave through another so the stroke crosses the patch.
  auto border_point = [&](int side) {
    const double t = rng.uniform();
    switch (side) {
      case 0: return Point{t * width, 0.0};
      case 1: return Point{static_cast<double>(width), t * height};
      case 2: return Point{t * width, static_cast<double>(height)};
      default: return Point{0.0, t * height};
    }
  };
  const int entry = static_cast<int>(rng.uniform_int(0, 3));
  const int exit = (entry + static_cast<int>(rng.uniform_int(1, 3))) % 4;
  spec.control_points.push_back(border_point(entry));
  if (rng.bernoulli(0.5)) {
    spec.control_points.push_back(
        Point{rng.uniform(0.25, 0.75) * width, rng.uniform(0.25, 0.75) * height});
  }
  spec.control_points.push_back(border_point(exit));
  return spec;
}

CategoryMix CategoryMix::parse(const std::string& text) {
  CategoryMix mix;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("mix entry '" + item + "' needs name=weight");
    const double w = std::stod(item.substr(eq + 1));
    if (!(w >= 0.0)) throw ConfigError("mix weights must be non-negative");
    mix.weights[parse_category(item.substr(0, eq))] = w;
  }
  double total = 0.0;
  for (const auto& [_, w] : mix.weights) total += w;
  if (total <= 0.0) throw ConfigError("category mix has no positive weight");
  return mix;
}

InkCategory CategoryMix::sample(RngStream& rng) const {
  std::vector<double> w;
  for (auto c : kAllCategories) {
    auto it = weights.find(c);
    w.push_back(it == weights.end() ? 0.0 : it->second);
  }
  const int i = rng.weighted_index(w);
  if (i < 0) throw ConfigError("category mix has no positive weight");
  return kAllCategories[static_cast<std::size_t>(i)];
}

std::vector<Triplet> generate_triplets(const std::vector<RasterImage>& clean_sources,
                                       const std::vector<std::string>& source_names,
                                       const CorpusConfig& config) {
  if (config.n < 1) throw InputError("corpus size must be >= 1");
  const bool procedural = clean_sources.empty();
  if (!procedural && clean_sources.size() < static_cast<std::size_t>(config.n)) {
    throw InputError("need " + std::to_string(config.n) + " clean sources, have " +
                     std::to_string(clean_sources.size()));
  }
  std::vector<Triplet> out(static_cast<std::size_t>(config.n));
  parallel_for(out.size(), config.jobs, [&](std::size_t i) {
    RngStream rng(config.seed, i);
    Triplet t;
    t.index = i;
    if (procedural) {
      TissueSpec tissue = config.tissue;
      tissue.width = config.patch_size;
      tissue.height = config.patch_size;
      t.clean = generate_tissue(tissue, rng).image;
      t.clean_source = "procedural";
    } else {
      t.clean = clean_sources[i];
      if (t.clean.channels() != 3) throw InputError("clean sources must be RGB");
      t.clean_source = i < source_names.size() ? source_names[i] : std::to_string(i);
    }
    const InkCategory category = config.mix.sample(rng);
    t.spec = random_stroke_spec(category, t.clean.width(), t.clean.height(), rng, config.ranges);
    auto stroke = synthesize_stroke(t.clean, t.spec, rng);
    t.inked = std::move(stroke.inked);
    t.stroke_mask = std::move(stroke.stroke_mask);
    t.ink_color = stroke.ink_color;
    out[i] = std::move(t);
  });
  return out;
}

std::vector<Triplet> generate_paired_corpus(const std::vector<RasterImage>& clean_sources,
                                            const std::vector<std::string>& source_names,
                                            const CorpusConfig& config, const fs::path& out_dir) {
  auto triplets = generate_triplets(clean_sources, source_names, config);
  for (const char* sub : {"clean", "inked", "mask"}) fs::create_directories(out_dir / sub);
  std::ostringstream manifest;
  nlohmann::ordered_json header = {{"seed", config.seed},
                                   {"n", config.n},
                                   {"patch_size", config.patch_size}};
  manifest << header.dump() << '\n';
  for (const auto& t : triplets) {
    char name[32];
    std::snprintf(name, sizeof name, "%05zu.png", t.index);
    save_raster(t.clean, out_dir / "clean" / name);
    save_raster(t.inked, out_dir / "inked" / name);
    save_raster(t.stroke_mask, out_dir / "mask" / name);
    nlohmann::ordered_json points = nlohmann::ordered_json::array();
    for (const auto& p : t.spec.control_points) points.push_back({p.x, p.y});
    nlohmann::ordered_json row = {
        {"index", t.index},
        {"file", name},
        {"category", to_string(t.spec.category)},
        {"opacity", t.spec.opacity},
        {"width", t.spec.width},
        {"control_points", points},
        {"jitter", t.spec.jitter},
        {"ink_color", {t.ink_color.r, t.ink_color.g, t.ink_color.b}},
        {"clean_source", t.clean_source},
    };
    manifest << row.dump() << '\n';
  }
  write_text_atomic(out_dir / "manifest.jsonl", manifest.str());
  return triplets;
}

}  // namespace inkless::synth
