#pragma once

// Siamese warping U-net generator.
//
// E1 encodes the in-shop cloth, E2 the agnostic person; they share structure
// but not parameters. E1's pyramid is warped by the TPS parameters from the
// geometric matcher, then the decoder fuses [decoder, warped E1, E2] at every
// scale. The deepest level of both encoders is concatenated as the
// bottleneck. The output is the decoder's tanh image; there is no mask or
// blend path.

#include <cstdint>
#include <vector>

#include <torch/torch.h>

#include "tryon/encoder.hpp"
#include "tryon/tps.hpp"

namespace tryon {

struct GeneratorOptions {
  std::vector<int64_t> depths = kDefaultDepths;
  ConvShape shape{};
  int64_t deconv_kernel = 4;
  PadMode feature_pad = PadMode::kBorder;
};

class DecoderImpl : public torch::nn::Module {
 public:
  DecoderImpl(std::vector<int64_t> depths, ConvShape shape, int64_t deconv_kernel);

  /// Both pyramids are finest-first and aligned level by level.
  torch::Tensor forward(const FeaturePyramid& cloth_pyramid, const FeaturePyramid& person_pyramid);

 private:
  std::vector<int64_t> depths_;
  std::vector<torch::nn::Sequential> stages_;
  torch::nn::Conv2d to_rgb_{nullptr};
};
TORCH_MODULE(Decoder);

class WarpingUNetImpl : public torch::nn::Module {
 public:
  explicit WarpingUNetImpl(GeneratorOptions options = {});

  /// E1 for cloth, E2 for the agnostic person.
  FeaturePyramid encode_cloth(const torch::Tensor& cloth);
  FeaturePyramid encode_person(const torch::Tensor& agnostic);

  torch::Tensor decode(const FeaturePyramid& warped_cloth_pyramid, const FeaturePyramid& person_pyramid);

  /// encode both, warp E1's pyramid with theta, decode.
  torch::Tensor forward(const torch::Tensor& agnostic, const torch::Tensor& cloth, const TpsTheta& theta);

  /// Same network with the warp skipped.
  torch::Tensor forward_unwarped(const torch::Tensor& agnostic, const torch::Tensor& cloth);

  Encoder& cloth_encoder() { return cloth_encoder_; }
  Encoder& person_encoder() { return person_encoder_; }
  Decoder& decoder() { return decoder_; }

 private:
  GeneratorOptions options_;
  Encoder cloth_encoder_{nullptr};
  Encoder person_encoder_{nullptr};
  Decoder decoder_{nullptr};
};
TORCH_MODULE(WarpingUNet);

}  // namespace tryon
