#include "tryon/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "tryon/errors.hpp"

namespace tryon {
namespace {

struct RawImage {
  int64_t height = 0;
  int64_t width = 0;
  std::vector<uint8_t> rgb;  // interleaved RGB rows
};

RawImage read_rgb(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw IoError("cannot read PNG '" + path.string() + "': " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  RawImage raw;
  raw.height = image.height;
  raw.width = image.width;
  raw.rgb.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, raw.rgb.data(), 0, nullptr)) {
    png_image_free(&image);
    throw IoError("cannot decode PNG '" + path.string() + "': " + image.message);
  }
  return raw;
}

void write_raw(const std::filesystem::path& path, const std::vector<uint8_t>& pixels, int64_t height,
               int64_t width, uint32_t format) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = format;
  if (!png_image_write_to_file(&image, path.c_str(), 0, pixels.data(), 0, nullptr)) {
    throw IoError("cannot write PNG '" + path.string() + "': " + image.message);
  }
}

}  // namespace

torch::Tensor read_png(const std::filesystem::path& path) {
  const RawImage raw = read_rgb(path);
  auto bytes = torch::from_blob(const_cast<uint8_t*>(raw.rgb.data()), {raw.height, raw.width, 3},
                                torch::kUInt8);
  return bytes.permute({2, 0, 1}).to(torch::kFloat32).div(127.5).sub(1.0).contiguous();
}

torch::Tensor read_mask_png(const std::filesystem::path& path) {
  const RawImage raw = read_rgb(path);
  auto bytes = torch::from_blob(const_cast<uint8_t*>(raw.rgb.data()), {raw.height, raw.width, 3},
                                torch::kUInt8);
  auto luminance = bytes.to(torch::kFloat32).mean(2);
  return (luminance > 127.0).to(torch::kFloat32);
}

void write_png(const std::filesystem::path& path, const torch::Tensor& image) {
  require(image.dim() == 3 && (image.size(0) == 3 || image.size(0) == 1),
          "write_png expects a [3,H,W] or [1,H,W] image");
  auto rgb = image.detach().to(torch::kCPU, torch::kFloat32);
  if (rgb.size(0) == 1) rgb = rgb.expand({3, -1, -1});
  auto bytes = rgb.clamp(-1.0, 1.0)
                   .add(1.0)
                   .mul(127.5)
                   .round()
                   .to(torch::kUInt8)
                   .permute({1, 2, 0})
                   .contiguous();
  std::vector<uint8_t> pixels(bytes.data_ptr<uint8_t>(), bytes.data_ptr<uint8_t>() + bytes.numel());
  write_raw(path, pixels, rgb.size(1), rgb.size(2), PNG_FORMAT_RGB);
}

void write_mask_png(const std::filesystem::path& path, const torch::Tensor& mask) {
  require(mask.dim() == 2, "write_mask_png expects a [H,W] mask");
  auto bytes = (mask.detach().to(torch::kCPU) > 0.5).to(torch::kUInt8).mul(255).contiguous();
  std::vector<uint8_t> pixels(bytes.data_ptr<uint8_t>(), bytes.data_ptr<uint8_t>() + bytes.numel());
  write_raw(path, pixels, mask.size(0), mask.size(1), PNG_FORMAT_GRAY);
}

torch::Tensor gaussian_blur(const torch::Tensor& image, double sigma) {
  if (sigma <= 0.0) return image;
  const bool batched = image.dim() == 4;
  require(batched || image.dim() == 3, "gaussian_blur expects [C,H,W] or [B,C,H,W]");
  auto x = batched ? image : image.unsqueeze(0);
  const int64_t channels = x.size(1);
  const int64_t radius = std::max<int64_t>(1, static_cast<int64_t>(std::ceil(3.0 * sigma)));
  auto offsets = torch::arange(-radius, radius + 1, x.options());
  auto kernel = torch::exp(-offsets.square() / (2.0 * sigma * sigma));
  kernel = kernel / kernel.sum();

  namespace F = torch::nn::functional;
  auto horizontal = kernel.view({1, 1, 1, -1}).repeat({channels, 1, 1, 1});
  auto vertical = kernel.view({1, 1, -1, 1}).repeat({channels, 1, 1, 1});
  x = F::pad(x, F::PadFuncOptions({radius, radius, radius, radius}).mode(torch::kReplicate));
  x = F::conv2d(x, horizontal, F::Conv2dFuncOptions().groups(channels));
  x = F::conv2d(x, vertical, F::Conv2dFuncOptions().groups(channels));
  return batched ? x : x.squeeze(0);
}

}  // namespace tryon
