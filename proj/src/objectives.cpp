#include "tryon/objectives.hpp"

#include <cmath>
#include <string>

#include "tryon/errors.hpp"

namespace tryon {

PerceptualExtractorImpl::PerceptualExtractorImpl(uint64_t seed, std::vector<int64_t> depths)
    : depths_(std::move(depths)) {
  auto generator = at::detail::createCPUGenerator(seed);
  int64_t channels = 3;
  for (size_t i = 0; i < depths_.size(); ++i) {
    const int64_t depth = depths_[i];
    torch::nn::Sequential stage(torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, depth, 3).padding(1)),
                                torch::nn::ReLU(),
                                torch::nn::Conv2d(torch::nn::Conv2dOptions(depth, depth, 4).stride(2).padding(1)),
                                torch::nn::ReLU());
    stages_.push_back(register_module("stage" + std::to_string(i), stage));
    channels = depth;
  }
  torch::NoGradGuard no_grad;
  for (auto& param : parameters()) {
    if (param.dim() == 4) {
      const double fan_in = static_cast<double>(param.size(1) * param.size(2) * param.size(3));
      param.copy_(at::normal(0.0, std::sqrt(2.0 / fan_in), param.sizes(), generator));
    } else {
      param.zero_();
    }
    param.set_requires_grad(false);
  }
}

FeaturePyramid PerceptualExtractorImpl::forward(const torch::Tensor& images) {
  require(images.dim() == 4 && images.size(1) == 3, "perceptual extractor expects [B,3,H,W]");
  FeaturePyramid taps;
  auto x = images;
  for (auto& stage : stages_) {
    x = stage->forward(x);
    taps.push_back(x);
  }
  return taps;
}

torch::Tensor warp_loss(const TpsTheta& theta, const torch::Tensor& cloth, const torch::Tensor& worn_cloth,
                        PadMode pad_mode) {
  require(cloth.sizes() == worn_cloth.sizes(), "warp_loss: cloth and worn cloth shapes differ");
  return (warp_image(theta, cloth, pad_mode) - worn_cloth).abs().mean();
}

torch::Tensor pixel_l1(const torch::Tensor& generated, const torch::Tensor& target) {
  require(generated.sizes() == target.sizes(), "pixel_l1: shapes differ");
  return (generated - target).abs().mean();
}

torch::Tensor perceptual_loss(const torch::Tensor& generated, const torch::Tensor& target,
                              PerceptualExtractor& extractor) {
  require(!extractor.is_empty(), "perceptual_loss: extractor not loaded");
  require(generated.sizes() == target.sizes(), "perceptual_loss: shapes differ");
  auto a = extractor->forward(generated);
  auto b = extractor->forward(target);
  auto loss = torch::zeros({}, generated.options());
  for (size_t i = 0; i < a.size(); ++i) loss = loss + (a[i] - b[i]).abs().mean();
  return loss;
}

torch::Tensor total_loss(const LossParts& parts, const LossWeights& weights) {
  auto options = torch::TensorOptions().dtype(torch::kFloat32);
  for (const auto* t : {&parts.warp, &parts.perceptual, &parts.l1, &parts.adv}) {
    if (t->defined()) {
      options = t->options();
      break;
    }
  }
  auto total = torch::zeros({}, options);
  const std::pair<const torch::Tensor*, std::pair<const char*, double>> terms[] = {
      {&parts.warp, {"warp", weights.warp}},
      {&parts.perceptual, {"perceptual", weights.perceptual}},
      {&parts.l1, {"l1", weights.l1}},
      {&parts.adv, {"adv", weights.adv}},
  };
  for (const auto& [tensor, named] : terms) {
    if (!tensor->defined()) continue;
    const auto& [name, weight] = named;
    if (!torch::isfinite(tensor->detach()).all().item<bool>()) {
      throw DivergenceError(name, std::string("loss term '") + name + "' is not finite");
    }
    total = total + weight * *tensor;
  }
  return total;
}

}  // namespace tryon
