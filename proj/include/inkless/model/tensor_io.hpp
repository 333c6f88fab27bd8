#pragma once

#include <torch/torch.h>

#include <vector>

#include "inkless/core/raster.hpp"
#include "inkless/model/networks.hpp"
#include "inkless/restore/restore.hpp"

namespace inkless::model {

// RGB rasters of equal size -> N x 3 x H x W float tensor in [-1, 1].
torch::Tensor images_to_tensor(const std::vector<RasterImage>& images,
                               torch::Dtype dtype = torch::kFloat32);
// Inverse mapping with rounding and clamping.
std::vector<RasterImage> tensor_to_images(const torch::Tensor& batch);

// Runs a batch of patches through a generator in eval mode without autograd.
std::vector<RasterImage> translate(Generator& generator, const std::vector<RasterImage>& patches,
                                   int batch_size = 32);

// Adapts a generator to the stitching engine's tile callback.
restore::TileGenerator tile_generator(Generator generator);

}  // namespace inkless::model
