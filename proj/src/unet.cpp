#include "tryon/unet.hpp"

#include <string>

#include "tryon/errors.hpp"

namespace tryon {

DecoderImpl::DecoderImpl(std::vector<int64_t> depths, ConvShape shape, int64_t deconv_kernel)
    : depths_(std::move(depths)) {
  const size_t levels = depths_.size();
  require(levels >= 1, "decoder needs at least one level");
  // Stage s runs at the resolution of encoder level s (deepest first), then
  // upsamples to level s-1 and is concatenated with that level's skips.
  int64_t channels = 2 * depths_.back();
  for (size_t s = levels; s-- > 0;) {
    const int64_t width = depths_[s];
    const int64_t up_width = s > 0 ? depths_[s - 1] : depths_[0];
    torch::nn::Sequential stage;
    stage->extend(*conv_block(channels, width, shape.standard_kernel, 1, NormKind::kInstance));
    stage->push_back(torch::nn::ConvTranspose2d(
        torch::nn::ConvTranspose2dOptions(width, up_width, deconv_kernel).stride(2).padding((deconv_kernel - 2) / 2)));
    stage->push_back(torch::nn::InstanceNorm2d(torch::nn::InstanceNorm2dOptions(up_width).affine(true)));
    stage->push_back(torch::nn::ReLU());
    stages_.push_back(register_module("up" + std::to_string(s), stage));
    channels = s > 0 ? 3 * up_width : up_width;
  }
  to_rgb_ = register_module(
      "to_rgb", torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, 3, shape.standard_kernel)
                                      .padding(shape.standard_kernel / 2)));
}

torch::Tensor DecoderImpl::forward(const FeaturePyramid& cloth_pyramid, const FeaturePyramid& person_pyramid) {
  const size_t levels = depths_.size();
  require(cloth_pyramid.size() == levels && person_pyramid.size() == levels,
          "decoder: pyramid depth mismatch");
  for (size_t i = 0; i < levels; ++i) {
    require(cloth_pyramid[i].sizes() == person_pyramid[i].sizes(),
            "decoder: pyramids differ in shape at level " + std::to_string(i));
    require(cloth_pyramid[i].size(1) == depths_[i],
            "decoder: unexpected channel count at level " + std::to_string(i));
  }
  auto x = torch::cat({cloth_pyramid.back(), person_pyramid.back()}, 1);
  for (size_t k = 0; k < levels; ++k) {
    const size_t s = levels - 1 - k;
    x = stages_[k]->forward(x);
    if (s > 0) x = torch::cat({x, cloth_pyramid[s - 1], person_pyramid[s - 1]}, 1);
  }
  return torch::tanh(to_rgb_->forward(x));
}

WarpingUNetImpl::WarpingUNetImpl(GeneratorOptions options) : options_(std::move(options)) {
  cloth_encoder_ = register_module("cloth_encoder", Encoder(3, options_.depths, NormKind::kInstance, options_.shape));
  person_encoder_ = register_module("person_encoder", Encoder(3, options_.depths, NormKind::kInstance, options_.shape));
  decoder_ = register_module("decoder", Decoder(options_.depths, options_.shape, options_.deconv_kernel));
}

FeaturePyramid WarpingUNetImpl::encode_cloth(const torch::Tensor& cloth) {
  return cloth_encoder_->forward_pyramid(cloth);
}

FeaturePyramid WarpingUNetImpl::encode_person(const torch::Tensor& agnostic) {
  return person_encoder_->forward_pyramid(agnostic);
}

torch::Tensor WarpingUNetImpl::decode(const FeaturePyramid& warped_cloth_pyramid,
                                      const FeaturePyramid& person_pyramid) {
  return decoder_->forward(warped_cloth_pyramid, person_pyramid);
}

torch::Tensor WarpingUNetImpl::forward(const torch::Tensor& agnostic, const torch::Tensor& cloth,
                                       const TpsTheta& theta) {
  require(agnostic.sizes() == cloth.sizes(), "generator: agnostic and cloth shapes differ");
  require(theta.batch() == agnostic.size(0), "generator: theta batch differs from image batch");
  auto warped = warp_multiscale(theta, encode_cloth(cloth), options_.feature_pad);
  return decode(warped, encode_person(agnostic));
}

torch::Tensor WarpingUNetImpl::forward_unwarped(const torch::Tensor& agnostic, const torch::Tensor& cloth) {
  require(agnostic.sizes() == cloth.sizes(), "generator: agnostic and cloth shapes differ");
  return decode(encode_cloth(cloth), encode_person(agnostic));
}

}  // namespace tryon
