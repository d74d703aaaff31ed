#include "tryon/matcher.hpp"

#include "tryon/errors.hpp"

namespace tryon {

torch::Tensor normalize_channels(const torch::Tensor& features, double epsilon) {
  auto norm = torch::sqrt(features.square().sum(1, /*keepdim=*/true) + epsilon);
  return features / norm;
}

torch::Tensor correlate(const torch::Tensor& f1, const torch::Tensor& f2) {
  require(f1.dim() == 4 && f1.sizes() == f2.sizes(), "correlate: feature maps must share shape [B,C,h,w]");
  const int64_t batch = f1.size(0);
  const int64_t channels = f1.size(1);
  const int64_t h = f1.size(2);
  const int64_t w = f1.size(3);
  auto a = normalize_channels(f1).reshape({batch, channels, h * w});
  auto b = normalize_channels(f2).reshape({batch, channels, h * w});
  // [B, hw(k over f2), hw(ij over f1)]
  auto products = torch::bmm(b.transpose(1, 2), a);
  return products.view({batch, h * w, h, w});
}

ThetaRegressorImpl::ThetaRegressorImpl(int64_t in_channels, int64_t height, int64_t width,
                                       const MatcherOptions& options) {
  require(options.regressor_widths.size() == 4, "regressor needs exactly four conv widths");
  const auto& widths = options.regressor_widths;
  const int64_t strided = options.regressor_strided_kernel;
  convs_ = torch::nn::Sequential();
  convs_->extend(*conv_block(in_channels, widths[0], strided, 2, NormKind::kBatch));
  convs_->extend(*conv_block(widths[0], widths[1], strided, 2, NormKind::kBatch));
  convs_->extend(*conv_block(widths[1], widths[2], options.shape.standard_kernel, 1, NormKind::kBatch));
  convs_->extend(*conv_block(widths[2], widths[3], options.shape.standard_kernel, 1, NormKind::kBatch));
  register_module("convs", convs_);

  auto halve = [strided](int64_t n) { return (n + 2 - strided) / 2 + 1; };
  const int64_t out_h = halve(halve(height));
  const int64_t out_w = halve(halve(width));
  require(out_h >= 1 && out_w >= 1, "correlation map too small for the regressor");
  head_ = register_module("head", torch::nn::Linear(widths[3] * out_h * out_w, kThetaSize));
  reset_to_identity();
}

void ThetaRegressorImpl::reset_to_identity() {
  torch::NoGradGuard no_grad;
  head_->weight.zero_();
  head_->bias.copy_(TpsTheta::identity(1, head_->bias.scalar_type()).values().view({kThetaSize}));
}

torch::Tensor ThetaRegressorImpl::forward(const torch::Tensor& correlation) {
  return head_->forward(convs_->forward(correlation).flatten(1));
}

GeometricMatcherImpl::GeometricMatcherImpl(int64_t height, int64_t width, MatcherOptions options)
    : height_(height), width_(width) {
  const int64_t levels = static_cast<int64_t>(options.depths.size());
  const int64_t factor = int64_t{1} << levels;
  require(height % factor == 0 && width % factor == 0,
          "matcher resolution must be divisible by 2^levels");
  cloth_extractor_ = register_module("cloth_extractor", Encoder(3, options.depths, NormKind::kBatch, options.shape));
  person_extractor_ =
      register_module("person_extractor", Encoder(3, options.depths, NormKind::kBatch, options.shape));
  const int64_t h = height / factor;
  const int64_t w = width / factor;
  regressor_ = register_module("regressor", ThetaRegressor(h * w, h, w, options));
}

torch::Tensor GeometricMatcherImpl::extract_cloth(const torch::Tensor& cloth) {
  return cloth_extractor_->forward(cloth);
}

torch::Tensor GeometricMatcherImpl::extract_person(const torch::Tensor& agnostic) {
  return person_extractor_->forward(agnostic);
}

TpsTheta GeometricMatcherImpl::regress(const torch::Tensor& correlation) {
  return TpsTheta(regressor_->forward(correlation));
}

TpsTheta GeometricMatcherImpl::forward(const torch::Tensor& cloth, const torch::Tensor& agnostic) {
  require(cloth.sizes() == agnostic.sizes(), "matcher: cloth and agnostic shapes differ");
  require(cloth.size(2) == height_ && cloth.size(3) == width_,
          "matcher: input resolution differs from the configured one");
  return regress(correlate(extract_cloth(cloth), extract_person(agnostic)));
}

}  // namespace tryon
