#include "tryon/adversary.hpp"

#include "tryon/encoder.hpp"
#include "tryon/errors.hpp"

namespace tryon {
namespace F = torch::nn::functional;

DiscriminatorImpl::DiscriminatorImpl(DiscriminatorOptions options) {
  require(options.depths.size() == 5, "discriminator has exactly five downsampling blocks");
  body_ = torch::nn::Sequential();
  int64_t channels = 3;
  for (int64_t depth : options.depths) {
    body_->push_back(torch::nn::Conv2d(
        torch::nn::Conv2dOptions(channels, depth, options.kernel).stride(2).padding(1)));
    body_->push_back(torch::nn::BatchNorm2d(depth));
    body_->push_back(torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(options.leaky_slope)));
    channels = depth;
  }
  register_module("body", body_);
  head_ = register_module("head", torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, 1, 3).padding(1)));
}

torch::Tensor DiscriminatorImpl::forward(const torch::Tensor& images) {
  require_divisible(images, 5, "discriminator");
  return head_->forward(body_->forward(images));
}

namespace {

torch::Tensor relative(const torch::Tensor& minuend, const torch::Tensor& subtrahend,
                       RelativisticVariant variant) {
  if (variant == RelativisticVariant::kAverage) return minuend - subtrahend.mean();
  return minuend - subtrahend;
}

}  // namespace

torch::Tensor relativistic_d_loss(const torch::Tensor& real_scores, const torch::Tensor& fake_scores,
                                  RelativisticVariant variant) {
  require(real_scores.sizes() == fake_scores.sizes(), "relativistic loss: score maps differ in shape");
  // -log sigma(z) = softplus(-z)
  if (variant == RelativisticVariant::kAverage) {
    return 0.5 * (F::softplus(-relative(real_scores, fake_scores, variant)).mean() +
                  F::softplus(relative(fake_scores, real_scores, variant)).mean());
  }
  return F::softplus(-(real_scores - fake_scores)).mean();
}

torch::Tensor relativistic_g_loss(const torch::Tensor& real_scores, const torch::Tensor& fake_scores,
                                  RelativisticVariant variant) {
  require(real_scores.sizes() == fake_scores.sizes(), "relativistic loss: score maps differ in shape");
  auto real = real_scores.detach();
  if (variant == RelativisticVariant::kAverage) {
    return 0.5 * (F::softplus(-relative(fake_scores, real, variant)).mean() +
                  F::softplus(relative(real, fake_scores, variant)).mean());
  }
  return F::softplus(-(fake_scores - real)).mean();
}

torch::Tensor gradient_penalty(const Critic& critic, const torch::Tensor& real, const torch::Tensor& fake,
                               std::optional<torch::Tensor> alpha) {
  require(real.sizes() == fake.sizes(), "gradient_penalty: real and fake shapes differ");
  const int64_t batch = real.size(0);
  auto weights = alpha ? alpha->to(real.options()) : torch::rand({batch}, real.options());
  require(weights.numel() == batch, "gradient_penalty: alpha must hold one value per sample");
  std::vector<int64_t> shape(real.dim(), 1);
  shape[0] = batch;
  weights = weights.view(shape);
  auto mixed = (weights * real.detach() + (1.0 - weights) * fake.detach()).requires_grad_(true);
  auto scores = critic(mixed);
  auto grads = torch::autograd::grad({scores.sum()}, {mixed}, {}, /*retain_graph=*/true,
                                     /*create_graph=*/true, /*allow_unused=*/true)[0];
  if (!grads.defined()) grads = torch::zeros_like(mixed);
  auto norms = grads.reshape({batch, -1}).norm(2, 1);
  return (norms - 1.0).square().mean();
}

}  // namespace tryon
