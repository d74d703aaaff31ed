#pragma once

// Supervised losses. Every L1 term is a mean over elements, so values for a
// constant gap do not depend on resolution.

#include <cstdint>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "tryon/tps.hpp"

namespace tryon {

struct LossWeights {
  double warp = 1.0;
  double perceptual = 1.0;
  double l1 = 1.0;
  double adv = 1.0;
};

struct LossParts {
  torch::Tensor warp;
  torch::Tensor perceptual;
  torch::Tensor l1;
  torch::Tensor adv;
};

/// Frozen five-stage feature extractor used by the perceptual loss and the
/// LPIPS metric. Stage i is conv3x3 -> relu -> conv4x4/2 -> relu and its
/// output is tap i. Parameters never require gradients.
class PerceptualExtractorImpl : public torch::nn::Module {
 public:
  /// Deterministic He-normal weights drawn from a private generator seeded
  /// with `seed`.
  explicit PerceptualExtractorImpl(uint64_t seed = 0x5eed, std::vector<int64_t> depths = {16, 32, 64, 128, 256});

  FeaturePyramid forward(const torch::Tensor& images);

  const std::vector<int64_t>& depths() const { return depths_; }

 private:
  std::vector<int64_t> depths_;
  std::vector<torch::nn::Sequential> stages_;
};
TORCH_MODULE(PerceptualExtractor);

/// mean |T_theta(cloth) - worn_cloth| with the pixel-level warp.
torch::Tensor warp_loss(const TpsTheta& theta, const torch::Tensor& cloth, const torch::Tensor& worn_cloth,
                        PadMode pad_mode = PadMode::kBorder);

torch::Tensor pixel_l1(const torch::Tensor& generated, const torch::Tensor& target);

/// Sum over the five taps of mean |phi_i(generated) - phi_i(target)|.
torch::Tensor perceptual_loss(const torch::Tensor& generated, const torch::Tensor& target,
                              PerceptualExtractor& extractor);

/// Weighted sum. Throws DivergenceError naming the first non-finite part.
/// Undefined parts count as zero.
torch::Tensor total_loss(const LossParts& parts, const LossWeights& weights);

}  // namespace tryon
