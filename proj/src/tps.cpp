#include "tryon/tps.hpp"

#include <string>

#include "tryon/errors.hpp"

namespace tryon {
namespace {

torch::TensorOptions f64() { return torch::TensorOptions().dtype(torch::kFloat64); }

torch::Tensor linspace_aligned(int64_t n) {
  if (n == 1) return torch::zeros({1}, f64());
  return torch::linspace(-1.0, 1.0, n, f64());
}

// [N, 28] rows of (U(|p - s_k|^2) for k in 0..24, 1, x, y).
torch::Tensor basis_rows(const torch::Tensor& points, const torch::Tensor& source) {
  auto diff = points.unsqueeze(1) - source.unsqueeze(0);  // [N, 25, 2]
  auto radial = tps_kernel(diff.square().sum(-1));
  auto ones = torch::ones({points.size(0), 1}, f64());
  return torch::cat({radial, ones, points}, 1);
}

}  // namespace

TpsTheta::TpsTheta(torch::Tensor values) : values_(std::move(values)) {
  if (values_.dim() == 1) values_ = values_.unsqueeze(0);
  require(values_.dim() == 2 && values_.size(1) == kThetaSize,
          "TpsTheta expects shape [50] or [B,50]");
  require(values_.is_floating_point(), "TpsTheta must be floating point");
  require(torch::isfinite(values_.detach()).all().item<bool>(), "TpsTheta contains non-finite values");
}

TpsTheta TpsTheta::identity(int64_t batch, torch::Dtype dtype) {
  auto points = default_lattice().source_points().reshape({1, kThetaSize}).to(dtype);
  return TpsTheta(points.repeat({batch, 1}));
}

ControlLattice::ControlLattice() {
  auto axis = linspace_aligned(kLatticeSide);
  auto grid = torch::meshgrid({axis, axis}, "ij");  // (y, x)
  source_ = torch::stack({grid[1].reshape(-1), grid[0].reshape(-1)}, 1).contiguous();

  auto system = torch::zeros({kControlPoints + 3, kControlPoints + 3}, f64());
  auto rows = basis_rows(source_, source_);  // [25, 28] = [K | P]
  system.slice(0, 0, kControlPoints).copy_(rows);
  system.slice(0, kControlPoints).slice(1, 0, kControlPoints).copy_(rows.slice(1, kControlPoints).t());
  auto inverse = torch::linalg_inv(system);
  inverse_system_ = inverse.slice(1, 0, kControlPoints).contiguous();
  TORCH_INTERNAL_ASSERT(torch::isfinite(inverse_system_).all().item<bool>(),
                        "TPS system matrix is singular");
}

TpsCoefficients ControlLattice::solve(const TpsTheta& theta) const {
  auto targets = theta.points().to(torch::kFloat64);
  auto coeffs = torch::matmul(inverse_system_, targets);  // [B, 28, 2]
  return {coeffs.slice(1, 0, kControlPoints), coeffs.slice(1, kControlPoints)};
}

const ControlLattice& default_lattice() {
  static const ControlLattice lattice;
  return lattice;
}

torch::Tensor tps_kernel(const torch::Tensor& squared_distance) {
  auto positive = squared_distance > 0;
  auto safe = torch::where(positive, squared_distance, torch::ones_like(squared_distance));
  return torch::where(positive, safe * torch::log(safe), torch::zeros_like(squared_distance));
}

torch::Tensor tps_evaluate(const TpsCoefficients& coeffs, const torch::Tensor& points,
                           const ControlLattice& lattice) {
  require(points.dim() == 2 && points.size(1) == 2, "tps_evaluate expects points [N,2]");
  auto rows = basis_rows(points.to(torch::kFloat64), lattice.source_points());
  auto stacked = torch::cat({coeffs.radial, coeffs.affine}, 1);  // [B, 28, 2]
  return torch::matmul(rows, stacked);
}

torch::Tensor normalized_mesh(int64_t height, int64_t width) {
  require(height >= 1 && width >= 1, "mesh dimensions must be >= 1");
  auto grid = torch::meshgrid({linspace_aligned(height), linspace_aligned(width)}, "ij");
  return torch::stack({grid[1], grid[0]}, -1);
}

SamplingGrid generate_grid(const TpsCoefficients& coeffs, int64_t height, int64_t width,
                           const ControlLattice& lattice) {
  require(height >= 1 && width >= 1, "generate_grid: height and width must be >= 1");
  auto mesh = normalized_mesh(height, width).reshape({-1, 2});
  auto values = tps_evaluate(coeffs, mesh, lattice);
  return {values.view({coeffs.radial.size(0), height, width, 2}), -1};
}

torch::Tensor bilinear_sample(const torch::Tensor& source, const SamplingGrid& grid,
                              PadMode pad_mode, int64_t out_height, int64_t out_width) {
  require(source.dim() == 4 && source.size(1) >= 1, "bilinear_sample expects source [B,C,H,W]");
  const auto& coords = grid.coords;
  require(coords.dim() == 4 && coords.size(3) == 2, "sampling grid must be [B,H,W,2]");
  require(coords.size(1) == out_height && coords.size(2) == out_width,
          "sampling grid resolution " + std::to_string(coords.size(1)) + "x" +
              std::to_string(coords.size(2)) + " does not match output " +
              std::to_string(out_height) + "x" + std::to_string(out_width));
  require(coords.size(0) == source.size(0), "grid and source batch sizes differ");

  const int64_t batch = source.size(0);
  const int64_t channels = source.size(1);
  const int64_t src_h = source.size(2);
  const int64_t src_w = source.size(3);
  auto c = coords.to(torch::kFloat64);
  auto px = (c.select(3, 0) + 1.0) * (0.5 * static_cast<double>(src_w - 1));
  auto py = (c.select(3, 1) + 1.0) * (0.5 * static_cast<double>(src_h - 1));
  if (pad_mode == PadMode::kBorder) {
    px = px.clamp(0.0, static_cast<double>(src_w - 1));
    py = py.clamp(0.0, static_cast<double>(src_h - 1));
  }
  auto x0 = px.detach().floor();
  auto y0 = py.detach().floor();
  auto fx = px - x0;
  auto fy = py - y0;

  auto flat = source.reshape({batch, channels, src_h * src_w});
  auto out = torch::zeros({batch, channels, out_height * out_width}, source.options());
  for (int dy = 0; dy < 2; ++dy) {
    for (int dx = 0; dx < 2; ++dx) {
      auto xi = x0 + dx;
      auto yi = y0 + dy;
      auto weight = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy);
      auto valid = (xi >= 0) & (xi <= src_w - 1) & (yi >= 0) & (yi <= src_h - 1);
      weight = weight * valid.to(torch::kFloat64);
      auto index = (yi.clamp(0, src_h - 1) * src_w + xi.clamp(0, src_w - 1))
                       .to(torch::kLong)
                       .reshape({batch, 1, -1})
                       .expand({batch, channels, out_height * out_width});
      auto gathered = flat.gather(2, index);
      out = out + gathered * weight.reshape({batch, 1, -1}).to(source.scalar_type());
    }
  }
  return out.view({batch, channels, out_height, out_width});
}

torch::Tensor bilinear_sample(const torch::Tensor& source, const SamplingGrid& grid,
                              PadMode pad_mode) {
  return bilinear_sample(source, grid, pad_mode, grid.height(), grid.width());
}

FeaturePyramid warp_multiscale(const TpsTheta& theta, const FeaturePyramid& pyramid,
                               PadMode pad_mode, const ControlLattice& lattice) {
  require(static_cast<int64_t>(pyramid.size()) == kPyramidLevels,
          "warp_multiscale expects a 5-level pyramid");
  const auto coeffs = lattice.solve(theta);
  FeaturePyramid warped;
  warped.reserve(pyramid.size());
  for (size_t level = 0; level < pyramid.size(); ++level) {
    const auto& features = pyramid[level];
    auto grid = generate_grid(coeffs, features.size(2), features.size(3), lattice);
    grid.scale_id = static_cast<int>(level);
    warped.push_back(bilinear_sample(features, grid, pad_mode));
  }
  return warped;
}

torch::Tensor warp_image(const TpsTheta& theta, const torch::Tensor& images, PadMode pad_mode,
                         const ControlLattice& lattice) {
  require(images.dim() == 4, "warp_image expects [B,C,H,W]");
  auto grid = generate_grid(lattice.solve(theta), images.size(2), images.size(3), lattice);
  return bilinear_sample(images, grid, pad_mode);
}

}  // namespace tryon
