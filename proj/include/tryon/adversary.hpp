#pragma once

// Fully convolutional patch discriminator and the relativistic adversarial
// objective with gradient penalty.

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <torch/torch.h>

namespace tryon {

enum class RelativisticVariant {
  kPairwise,  // RSGAN: sigma(C(x_r) - C(x_f))
  kAverage,   // RaGAN: each side against the other side's batch mean
};

struct DiscriminatorOptions {
  std::vector<int64_t> depths = {16, 32, 64, 128, 256};  // exactly five downsampling blocks
  int64_t kernel = 4;
  double leaky_slope = 0.2;
};

class DiscriminatorImpl : public torch::nn::Module {
 public:
  explicit DiscriminatorImpl(DiscriminatorOptions options = {});

  /// Patch score map [B, 1, H/32, W/32]; unbounded.
  torch::Tensor forward(const torch::Tensor& images);

 private:
  torch::nn::Sequential body_{nullptr};
  torch::nn::Conv2d head_{nullptr};
};
TORCH_MODULE(Discriminator);

/// Mean over patches of -log sigma(C(x_r) - C(x_f)).
torch::Tensor relativistic_d_loss(const torch::Tensor& real_scores, const torch::Tensor& fake_scores,
                                  RelativisticVariant variant = RelativisticVariant::kPairwise);

/// Mean over patches of -log sigma(C(x_f) - C(x_r)); real scores are detached.
torch::Tensor relativistic_g_loss(const torch::Tensor& real_scores, const torch::Tensor& fake_scores,
                                  RelativisticVariant variant = RelativisticVariant::kPairwise);

using Critic = std::function<torch::Tensor(const torch::Tensor&)>;

/// E[(||grad_x C(x)||_2 - 1)^2] over interpolates x = a*real + (1-a)*fake,
/// with one uniform a per sample (drawn from the global torch generator
/// unless supplied as [B]). The gradient is of the summed score map per
/// sample. Built with create_graph so it can be back-propagated.
torch::Tensor gradient_penalty(const Critic& critic, const torch::Tensor& real, const torch::Tensor& fake,
                               std::optional<torch::Tensor> alpha = std::nullopt);

}  // namespace tryon
