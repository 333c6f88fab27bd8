#include "inkless/restore/restore.hpp"

#include <algorithm>

#include "inkless/core/error.hpp"
#include "inkless/core/pixel_map.hpp"

namespace inkless::restore {

std::size_t TilePlan::ink_tile_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(tiles.begin(), tiles.end(), [](const Tile& t) { return t.ink; }));
}

std::vector<Tile> TilePlan::ink_tiles() const {
  std::vector<Tile> out;
  std::copy_if(tiles.begin(), tiles.end(), std::back_inserter(out),
               [](const Tile& t) { return t.ink; });
  return out;
}

std::vector<int> tile_origins(int dim, int tile, int stride) {
  std::vector<int> out;
  int o = 0;
  for (; o + tile <= dim; o += stride) out.push_back(o);
  if (out.empty() || out.back() + tile < dim) out.push_back(dim - tile);
  return out;
}

TilePlan plan_tiles(int slide_width, int slide_height, const MarkerMask& mask, int tile,
                    int stride) {
  if (tile < 1 || tile > slide_width || tile > slide_height) {
    throw GeometryError("tile " + std::to_string(tile) + " does not fit slide " +
                        std::to_string(slide_width) + "x" + std::to_string(slide_height));
  }
  if (stride < 1 || stride > tile) throw GeometryError("stride must lie in [1, tile]");
  mask.check_aligned(slide_width, slide_height);
  TilePlan plan{slide_width, slide_height, tile, stride, {}};
  const auto xs = tile_origins(slide_width, tile, stride);
  const auto ys = tile_origins(slide_height, tile, stride);
  plan.tiles.reserve(xs.size() * ys.size());
  for (int y : ys) {
    for (int x : xs) plan.tiles.push_back(Tile{x, y, mask.intersects(x, y, tile, tile)});
  }
  return plan;
}

TileGenerator identity_generator() {
  return [](const TileBatch& in) { return in; };
}

Accumulator::Accumulator(int width, int height)
    : width_(width),
      height_(height),
      sum_(static_cast<std::size_t>(width) * height * 3, 0),
      count_(static_cast<std::size_t>(width) * height, 0) {}

void Accumulator::add(int x, int y, int size, const std::vector<std::uint8_t>& tile_rgb) {
  for (int j = 0; j < size; ++j) {
    for (int i = 0; i < size; ++i) {
      const auto p = static_cast<std::size_t>(y + j) * width_ + (x + i);
      const auto t = (static_cast<std::size_t>(j) * size + i) * 3;
      for (int c = 0; c < 3; ++c) sum_[p * 3 + c] += tile_rgb[t + c];
      ++count_[p];
    }
  }
}

RasterImage Accumulator::finalize(const RasterImage& original) const {
  RasterImage out = original;
  auto d = out.data();
  for (std::size_t p = 0; p < count_.size(); ++p) {
    const std::int64_t n = count_[p];
    if (n == 0) continue;
    for (int c = 0; c < 3; ++c) {
      // Non-negative sums: half away from zero is floor((2s + n) / 2n).
      d[p * 3 + c] = static_cast<std::uint8_t>((2 * sum_[p * 3 + c] + n) / (2 * n));
    }
  }
  return out;
}

TileBatch tiles_to_batch(const RasterImage& slide, const std::vector<Tile>& tiles, int size) {
  TileBatch batch;
  batch.count = static_cast<int>(tiles.size());
  batch.size = size;
  const auto plane = static_cast<std::size_t>(size) * size;
  batch.data.resize(tiles.size() * 3 * plane);
  for (std::size_t b = 0; b < tiles.size(); ++b) {
    for (int j = 0; j < size; ++j) {
      for (int i = 0; i < size; ++i) {
        for (int c = 0; c < 3; ++c) {
          batch.data[(b * 3 + c) * plane + static_cast<std::size_t>(j) * size + i] =
              to_unit_range(slide.at(tiles[b].x + i, tiles[b].y + j, c));
        }
      }
    }
  }
  return batch;
}

std::vector<std::uint8_t> batch_item_to_rgb(const TileBatch& batch, int index) {
  const int size = batch.size;
  const auto plane = static_cast<std::size_t>(size) * size;
  std::vector<std::uint8_t> rgb(plane * 3);
  for (std::size_t p = 0; p < plane; ++p) {
    for (int c = 0; c < 3; ++c) {
      rgb[p * 3 + c] =
          from_unit_range(batch.data[(static_cast<std::size_t>(index) * 3 + c) * plane + p]);
    }
  }
  return rgb;
}

Accumulator accumulate_tiles(const RasterImage& slide, const std::vector<Tile>& tiles, int size,
                             const TileGenerator& generator, int batch_size, RestoreStats* stats) {
  if (slide.channels() != 3) throw FormatError("restore needs an RGB slide");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  Accumulator acc(slide.width(), slide.height());
  for (std::size_t start = 0; start < tiles.size(); start += static_cast<std::size_t>(batch_size)) {
    const auto end = std::min(tiles.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<Tile> chunk(tiles.begin() + static_cast<std::ptrdiff_t>(start),
                            tiles.begin() + static_cast<std::ptrdiff_t>(end));
    const TileBatch in = tiles_to_batch(slide, chunk, size);
    const TileBatch out = generator(in);
    if (out.count != in.count || out.size != in.size || out.data.size() != in.data.size()) {
      throw ShapeError("generator returned a batch of a different shape");
    }
    if (stats) {
      ++stats->generator_calls;
      stats->tiles_processed += chunk.size();
    }
    for (std::size_t b = 0; b < chunk.size(); ++b) {
      acc.add(chunk[b].x, chunk[b].y, size, batch_item_to_rgb(out, static_cast<int>(b)));
    }
  }
  return acc;
}

namespace {

void check_plan(const RasterImage& slide, const MarkerMask& mask, const TilePlan& plan) {
  if (plan.slide_width != slide.width() || plan.slide_height != slide.height()) {
    throw GeometryError("tile plan was made for a different slide size");
  }
  mask.check_aligned(slide.width(), slide.height());
}

}  // namespace

RasterImage restore_slide(const RasterImage& slide, const MarkerMask& mask,
                          const TileGenerator& generator, const TilePlan& plan,
                          RestoreStats* stats) {
  return restore_batchwise(slide, mask, generator, plan, 1, stats);
}

RasterImage restore_batchwise(const RasterImage& slide, const MarkerMask& mask,
                              const TileGenerator& generator, const TilePlan& plan,
                              int batch_size, RestoreStats* stats) {
  check_plan(slide, mask, plan);
  const auto ink = plan.ink_tiles();
  if (ink.empty()) return slide;
  return accumulate_tiles(slide, ink, plan.tile, generator, batch_size, stats).finalize(slide);
}

}  // namespace inkless::restore
