#pragma once

#include <vector>

#include "inkless/synth/synthetic_ink.hpp"

namespace inkless::test {

struct ToyPools {
  std::vector<RasterImage> marker;
  std::vector<RasterImage> clean;
};

// Unpaired pools from one synthetic corpus: inked halves of the first n
// triplets and clean halves of the next n.
inline ToyPools toy_pools(int n, int side, std::uint64_t seed,
                          const char* mix = "black=1,green=1,blue=1") {
  synth::CorpusConfig c;
  c.n = 2 * n;
  c.patch_size = side;
  c.seed = seed;
  c.mix = synth::CategoryMix::parse(mix);
  const auto triplets = synth::generate_triplets({}, {}, c);
  ToyPools p;
  for (int i = 0; i < n; ++i) {
    p.marker.push_back(triplets[static_cast<std::size_t>(i)].inked);
    p.clean.push_back(triplets[static_cast<std::size_t>(n + i)].clean);
  }
  return p;
}

}  // namespace inkless::test
