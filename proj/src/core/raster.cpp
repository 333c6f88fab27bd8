#include "inkless/core/raster.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <string>

#include "inkless/core/error.hpp"
#include "inkless/core/files.hpp"

namespace inkless {

namespace {

void check_channels(int channels) {
  if (channels != 1 && channels != 3) {
    throw FormatError("unsupported channel count " + std::to_string(channels));
  }
}

cv::Mat to_bgr_mat(const RasterImage& image) {
  cv::Mat view(image.height(), image.width(), image.channels() == 3 ? CV_8UC3 : CV_8UC1,
               const_cast<std::uint8_t*>(image.data().data()));
  cv::Mat out;
  if (image.channels() == 3) {
    cv::cvtColor(view, out, cv::COLOR_RGB2BGR);
  } else {
    out = view.clone();
  }
  return out;
}

RasterImage from_decoded(const cv::Mat& decoded, const std::string& what) {
  if (decoded.empty()) throw FormatError("cannot decode raster " + what);
  if (decoded.depth() != CV_8U) throw FormatError("only 8-bit rasters are supported: " + what);
  const int channels = decoded.channels();
  check_channels(channels);
  cv::Mat rgb;
  if (channels == 3) {
    cv::cvtColor(decoded, rgb, cv::COLOR_BGR2RGB);
  } else {
    rgb = decoded;
  }
  if (!rgb.isContinuous()) rgb = rgb.clone();
  std::vector<std::uint8_t> data(rgb.data, rgb.data + rgb.total() * rgb.elemSize());
  return RasterImage(rgb.cols, rgb.rows, channels, std::move(data));
}

}  // namespace

RasterImage::RasterImage(int width, int height, int channels, std::uint8_t fill)
    : width_(width), height_(height), channels_(channels) {
  if (width < 0 || height < 0) throw GeometryError("negative raster dimensions");
  check_channels(channels);
  data_.assign(pixel_count() * static_cast<std::size_t>(channels), fill);
}

RasterImage::RasterImage(int width, int height, int channels, std::vector<std::uint8_t> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
  if (width < 0 || height < 0) throw GeometryError("negative raster dimensions");
  check_channels(channels);
  if (data_.size() != pixel_count() * static_cast<std::size_t>(channels)) {
    throw FormatError("raster data length does not match width*height*channels");
  }
}

std::vector<std::uint8_t> encode_png(const RasterImage& image) {
  if (image.empty()) throw FormatError("cannot encode an empty raster");
  std::vector<std::uint8_t> bytes;
  if (!cv::imencode(".png", to_bgr_mat(image), bytes)) throw FormatError("PNG encoding failed");
  return bytes;
}

RasterImage decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) throw FormatError("empty raster buffer");
  cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
  return from_decoded(cv::imdecode(buf, cv::IMREAD_UNCHANGED), "<memory>");
}

RasterImage load_raster(const std::filesystem::path& path) {
  auto bytes = read_bytes(path);
  if (bytes.empty()) throw FormatError("empty raster file " + path.string());
  cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1, bytes.data());
  return from_decoded(cv::imdecode(buf, cv::IMREAD_UNCHANGED), path.string());
}

void save_raster(const RasterImage& image, const std::filesystem::path& path) {
  const auto parent = path.parent_path();
  if (!parent.empty() && !std::filesystem::is_directory(parent)) {
    throw IoError("directory does not exist: " + parent.string());
  }
  write_bytes(path, encode_png(image));
}

RasterImage crop(const RasterImage& image, int x, int y, int w, int h) {
  if (x < 0 || y < 0 || w < 0 || h < 0 || x + w > image.width() || y + h > image.height()) {
    throw BoundsError("crop rectangle (" + std::to_string(x) + "," + std::to_string(y) + "," +
                      std::to_string(w) + "," + std::to_string(h) + ") outside " +
                      std::to_string(image.width()) + "x" + std::to_string(image.height()));
  }
  const int c = image.channels();
  RasterImage out(w, h, c);
  const auto src = image.data();
  auto dst = out.data();
  const std::size_t row_bytes = static_cast<std::size_t>(w) * static_cast<std::size_t>(c);
  for (int j = 0; j < h; ++j) {
    const std::size_t from =
        (static_cast<std::size_t>(y + j) * static_cast<std::size_t>(image.width()) +
         static_cast<std::size_t>(x)) *
        static_cast<std::size_t>(c);
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(from), row_bytes,
                dst.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(j) * row_bytes));
  }
  return out;
}

}  // namespace inkless
