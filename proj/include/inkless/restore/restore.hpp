#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "inkless/core/raster.hpp"
#include "inkless/core/types.hpp"

namespace inkless::restore {

struct Tile {
  int x = 0;
  int y = 0;
  bool ink = false;
};

struct TilePlan {
  int slide_width = 0;
  int slide_height = 0;
  int tile = 128;
  int stride = 100;
  std::vector<Tile> tiles;

  std::size_t ink_tile_count() const noexcept;
  std::vector<Tile> ink_tiles() const;
};

// Lattice origins 0, stride, 2*stride, ... while the tile fits; if that
// leaves an uncovered edge, one more origin at dim - tile.
std::vector<int> tile_origins(int dim, int tile, int stride);

// Throws GeometryError if the tile exceeds the slide or stride is outside [1, tile].
TilePlan plan_tiles(int slide_width, int slide_height, const MarkerMask& mask, int tile = 128,
                    int stride = 100);

// A batch of square RGB tiles in NCHW layout with values in [-1, 1].
struct TileBatch {
  int count = 0;
  int size = 0;
  std::vector<float> data;
};

// Maps a batch to a batch of the same shape.
using TileGenerator = std::function<TileBatch(const TileBatch&)>;

// Passes tiles through unchanged; the stitching test hook.
TileGenerator identity_generator();

// Per-pixel sums of back-mapped 8-bit generator outputs and coverage counts.
class Accumulator {
 public:
  Accumulator(int width, int height);

  // tile_rgb: size*size*3 interleaved 8-bit samples.
  void add(int x, int y, int size, const std::vector<std::uint8_t>& tile_rgb);
  std::uint32_t count(int x, int y) const noexcept {
    return count_[static_cast<std::size_t>(y) * width_ + x];
  }
  // round(sum/count) half away from zero where count >= 1; original elsewhere.
  RasterImage finalize(const RasterImage& original) const;

 private:
  int width_;
  int height_;
  std::vector<std::int64_t> sum_;
  std::vector<std::uint32_t> count_;
};

TileBatch tiles_to_batch(const RasterImage& slide, const std::vector<Tile>& tiles, int size);
std::vector<std::uint8_t> batch_item_to_rgb(const TileBatch& batch, int index);

struct RestoreStats {
  std::size_t tiles_processed = 0;
  std::size_t generator_calls = 0;
};

// Runs the generator on every ink-intersecting tile, averages overlaps and
// copies all other pixels verbatim. Throws ShapeError if the generator
// returns a batch of the wrong shape.
RasterImage restore_slide(const RasterImage& slide, const MarkerMask& mask,
                          const TileGenerator& generator, const TilePlan& plan,
                          RestoreStats* stats = nullptr);

// Same result as restore_slide, with tiles sent to the generator in batches.
RasterImage restore_batchwise(const RasterImage& slide, const MarkerMask& mask,
                              const TileGenerator& generator, const TilePlan& plan,
                              int batch_size, RestoreStats* stats = nullptr);

// Lower-level entry used by both: accumulates the given tiles in the given
// order (used to check order independence).
Accumulator accumulate_tiles(const RasterImage& slide, const std::vector<Tile>& tiles, int size,
                             const TileGenerator& generator, int batch_size,
                             RestoreStats* stats = nullptr);

}  // namespace inkless::restore
