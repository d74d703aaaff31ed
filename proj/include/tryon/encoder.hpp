#pragma once

// The five-stage convolutional encoder shared by the geometric matcher's
// feature extractors and the U-net's siamese encoders. Each stage is a
// stride-1 convolution followed by a stride-2 convolution, both followed by
// normalization and relu; the output of every stage is one pyramid level.

#include <cstdint>
#include <vector>

#include <torch/torch.h>

#include "tryon/tps.hpp"

namespace tryon {

enum class NormKind { kBatch, kInstance };

struct ConvShape {
  int64_t standard_kernel = 3;  // stride 1, "same" padding
  int64_t strided_kernel = 4;   // stride 2, padding 1: exact halving for even sizes
};

inline const std::vector<int64_t> kDefaultDepths = {16, 32, 64, 128, 256};

/// Conv -> norm -> relu. Padding keeps size for odd kernels at stride 1 and
/// halves it for stride 2 (kernel 3 or 4, padding 1).
torch::nn::Sequential conv_block(int64_t in_channels, int64_t out_channels, int64_t kernel,
                                 int64_t stride, NormKind norm);

class EncoderImpl : public torch::nn::Module {
 public:
  EncoderImpl(int64_t in_channels, std::vector<int64_t> depths, NormKind norm,
              ConvShape shape = {});

  /// Every stage output, finest first. Input height and width must be
  /// divisible by 2^stages.
  FeaturePyramid forward_pyramid(const torch::Tensor& input);

  /// Deepest level only.
  torch::Tensor forward(const torch::Tensor& input);

  const std::vector<int64_t>& depths() const { return depths_; }

 private:
  std::vector<int64_t> depths_;
  std::vector<torch::nn::Sequential> stages_;
};
TORCH_MODULE(Encoder);

/// Throws ContractViolation unless height and width are multiples of 2^levels.
void require_divisible(const torch::Tensor& images, int64_t levels, const char* who);

}  // namespace tryon
