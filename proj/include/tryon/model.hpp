#pragma once

#include <torch/torch.h>

#include "tryon/adversary.hpp"
#include "tryon/config.hpp"
#include "tryon/matcher.hpp"
#include "tryon/objectives.hpp"
#include "tryon/unet.hpp"

namespace tryon {

/// All networks of the try-on system.
struct TryOnModel {
  explicit TryOnModel(const TrainConfig& config);

  GeometricMatcher matcher{nullptr};
  WarpingUNet generator{nullptr};
  Discriminator discriminator{nullptr};
  PerceptualExtractor extractor{nullptr};

  void set_training(bool training);

  /// Test-time path: theta = matcher(cloth, agnostic), then generate. Runs in
  /// inference mode without touching training state. Inputs are [B,3,H,W].
  torch::Tensor infer(const torch::Tensor& agnostic, const torch::Tensor& cloth);
  TpsTheta predict_theta(const torch::Tensor& agnostic, const torch::Tensor& cloth);
};

}  // namespace tryon
