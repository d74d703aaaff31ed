#pragma once

// Convolutional geometric matcher: two parameter-disjoint feature extractors
// (cloth and agnostic person), channel-wise L2 normalization, an all-pairs
// correlation map, and a regression head emitting TPS parameters.

#include <cstdint>
#include <vector>

#include <torch/torch.h>

#include "tryon/encoder.hpp"
#include "tryon/tps.hpp"

namespace tryon {

inline constexpr double kCorrelationEpsilon = 1e-8;

struct MatcherOptions {
  std::vector<int64_t> depths = kDefaultDepths;
  ConvShape shape{};
  // Output widths of the two stride-2 and the two stride-1 regressor convs.
  std::vector<int64_t> regressor_widths = {512, 256, 256, 128};
  int64_t regressor_strided_kernel = 3;  // works down to 1x1 correlation maps
};

/// Unit-normalizes every spatial feature vector of [B, C, h, w]:
/// f / sqrt(|f|^2 + epsilon).
torch::Tensor normalize_channels(const torch::Tensor& features, double epsilon = kCorrelationEpsilon);

/// All-pairs correlation of L2-normalized features.
/// Output [B, h*w, h, w]: channel k = m*w + n at location (i, j) holds
/// <f1(i, j), f2(m, n)>.
torch::Tensor correlate(const torch::Tensor& f1, const torch::Tensor& f2);

class ThetaRegressorImpl : public torch::nn::Module {
 public:
  /// `in_channels` = h*w of the correlation map, (h, w) its spatial size.
  ThetaRegressorImpl(int64_t in_channels, int64_t height, int64_t width, const MatcherOptions& options);

  torch::Tensor forward(const torch::Tensor& correlation);

  /// Zero weights and identity-lattice bias on the final layer.
  void reset_to_identity();

  torch::nn::Linear& head() { return head_; }

 private:
  torch::nn::Sequential convs_{nullptr};
  torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(ThetaRegressor);

class GeometricMatcherImpl : public torch::nn::Module {
 public:
  /// `height`/`width` fix the input resolution (the regressor's fully
  /// connected layer depends on it).
  GeometricMatcherImpl(int64_t height, int64_t width, MatcherOptions options = {});

  /// F1 (cloth branch) or F2 (agnostic-person branch); deepest feature map.
  torch::Tensor extract_cloth(const torch::Tensor& cloth);
  torch::Tensor extract_person(const torch::Tensor& agnostic);

  TpsTheta regress(const torch::Tensor& correlation);

  /// extract -> correlate -> regress.
  TpsTheta forward(const torch::Tensor& cloth, const torch::Tensor& agnostic);

  Encoder& cloth_extractor() { return cloth_extractor_; }
  Encoder& person_extractor() { return person_extractor_; }
  ThetaRegressor& regressor() { return regressor_; }
  int64_t height() const { return height_; }
  int64_t width() const { return width_; }

 private:
  int64_t height_;
  int64_t width_;
  Encoder cloth_extractor_{nullptr};
  Encoder person_extractor_{nullptr};
  ThetaRegressor regressor_{nullptr};
};
TORCH_MODULE(GeometricMatcher);

}  // namespace tryon
