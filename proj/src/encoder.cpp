#include "tryon/encoder.hpp"

#include <string>

#include "tryon/errors.hpp"

namespace tryon {

torch::nn::Sequential conv_block(int64_t in_channels, int64_t out_channels, int64_t kernel,
                                 int64_t stride, NormKind norm) {
  const int64_t padding = stride == 1 ? kernel / 2 : 1;
  torch::nn::Sequential block(
      torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, out_channels, kernel)
                            .stride(stride)
                            .padding(padding)));
  if (norm == NormKind::kBatch) {
    block->push_back(torch::nn::BatchNorm2d(out_channels));
  } else {
    block->push_back(torch::nn::InstanceNorm2d(torch::nn::InstanceNorm2dOptions(out_channels).affine(true)));
  }
  block->push_back(torch::nn::ReLU());
  return block;
}

EncoderImpl::EncoderImpl(int64_t in_channels, std::vector<int64_t> depths, NormKind norm,
                         ConvShape shape)
    : depths_(std::move(depths)) {
  require(!depths_.empty(), "encoder needs at least one stage");
  int64_t channels = in_channels;
  for (size_t i = 0; i < depths_.size(); ++i) {
    torch::nn::Sequential stage;
    stage->extend(*conv_block(channels, depths_[i], shape.standard_kernel, 1, norm));
    stage->extend(*conv_block(depths_[i], depths_[i], shape.strided_kernel, 2, norm));
    stages_.push_back(register_module("stage" + std::to_string(i), stage));
    channels = depths_[i];
  }
}

FeaturePyramid EncoderImpl::forward_pyramid(const torch::Tensor& input) {
  require_divisible(input, static_cast<int64_t>(stages_.size()), "encoder");
  FeaturePyramid levels;
  levels.reserve(stages_.size());
  auto x = input;
  for (auto& stage : stages_) {
    x = stage->forward(x);
    levels.push_back(x);
  }
  return levels;
}

torch::Tensor EncoderImpl::forward(const torch::Tensor& input) { return forward_pyramid(input).back(); }

void require_divisible(const torch::Tensor& images, int64_t levels, const char* who) {
  require(images.dim() == 4, std::string(who) + ": expected [B,C,H,W] input");
  const int64_t factor = int64_t{1} << levels;
  require(images.size(2) % factor == 0 && images.size(3) % factor == 0,
          std::string(who) + ": resolution " + std::to_string(images.size(2)) + "x" +
              std::to_string(images.size(3)) + " is not divisible by " + std::to_string(factor));
}

}  // namespace tryon
