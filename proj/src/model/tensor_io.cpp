#include "inkless/model/tensor_io.hpp"

#include "inkless/core/error.hpp"
#include "inkless/core/pixel_map.hpp"

namespace inkless::model {

torch::Tensor images_to_tensor(const std::vector<RasterImage>& images, torch::Dtype dtype) {
  if (images.empty()) throw InputError("no images to convert");
  const int w = images.front().width();
  const int h = images.front().height();
  auto bytes = torch::empty({static_cast<long>(images.size()), h, w, 3}, torch::kUInt8);
  auto* dst = bytes.data_ptr<std::uint8_t>();
  const auto per = static_cast<std::size_t>(w) * h * 3;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& im = images[i];
    if (im.width() != w || im.height() != h || im.channels() != 3) {
      throw ShapeError("batch images must be RGB and equally sized");
    }
    std::copy(im.data().begin(), im.data().end(), dst + i * per);
  }
  return bytes.permute({0, 3, 1, 2}).to(dtype).div(127.5).sub(1.0).contiguous();
}

std::vector<RasterImage> tensor_to_images(const torch::Tensor& batch) {
  if (batch.dim() != 4 || batch.size(1) != 3) throw ShapeError("expected N x 3 x H x W");
  auto nhwc = batch.detach().to(torch::kFloat64).permute({0, 2, 3, 1}).contiguous();
  const auto n = nhwc.size(0);
  const auto h = static_cast<int>(nhwc.size(1));
  const auto w = static_cast<int>(nhwc.size(2));
  const auto* src = nhwc.data_ptr<double>();
  const auto per = static_cast<std::size_t>(w) * h * 3;
  std::vector<RasterImage> out;
  out.reserve(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    std::vector<std::uint8_t> data(per);
    for (std::size_t k = 0; k < per; ++k) {
      data[k] = from_unit_range(static_cast<float>(src[static_cast<std::size_t>(i) * per + k]));
    }
    out.emplace_back(w, h, 3, std::move(data));
  }
  return out;
}

std::vector<RasterImage> translate(Generator& generator, const std::vector<RasterImage>& patches,
                                   int batch_size) {
  torch::NoGradGuard guard;
  const bool was_training = generator->is_training();
  generator->eval();
  const auto dtype = generator->parameters().front().scalar_type();
  std::vector<RasterImage> out;
  out.reserve(patches.size());
  for (std::size_t start = 0; start < patches.size(); start += static_cast<std::size_t>(batch_size)) {
    const auto end = std::min(patches.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<RasterImage> chunk(patches.begin() + static_cast<std::ptrdiff_t>(start),
                                   patches.begin() + static_cast<std::ptrdiff_t>(end));
    auto result = tensor_to_images(generator_forward(generator, images_to_tensor(chunk, dtype)));
    std::move(result.begin(), result.end(), std::back_inserter(out));
  }
  generator->train(was_training);
  return out;
}

restore::TileGenerator tile_generator(Generator generator) {
  return [generator](const restore::TileBatch& in) mutable {
    torch::NoGradGuard guard;
    generator->eval();
    const auto dtype = generator->parameters().front().scalar_type();
    auto input = torch::from_blob(const_cast<float*>(in.data.data()), {in.count, 3, in.size, in.size},
                                  torch::kFloat32)
                     .to(dtype);
    auto output = generator_forward(generator, input).to(torch::kFloat32).contiguous();
    restore::TileBatch out{in.count, in.size, {}};
    out.data.assign(output.data_ptr<float>(), output.data_ptr<float>() + output.numel());
    return out;
  };
}

}  // namespace inkless::model
