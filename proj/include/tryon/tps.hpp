#pragma once

// Thin-plate-spline warping.
//
// Coordinates are normalized to [-1, 1] with the align-corners convention:
// the centre of the first pixel is -1 and the centre of the last pixel is +1.
// Points are (x, y) with x along the width and y along the height, matching
// the layout of sampling grids ([B, H, W, 2]).
//
// A TpsTheta holds absolute target positions for the 25 points of a regular
// 5x5 control lattice, interleaved as (x0, y0, x1, y1, ...). The spline maps
// source lattice point k onto target k; the sampling grid at output location
// p holds T(p), the source location that output pixel reads from.

#include <cstdint>
#include <vector>

#include <torch/torch.h>

namespace tryon {

using FeaturePyramid = std::vector<torch::Tensor>;

inline constexpr int64_t kLatticeSide = 5;
inline constexpr int64_t kControlPoints = kLatticeSide * kLatticeSide;
inline constexpr int64_t kThetaSize = 2 * kControlPoints;
inline constexpr int64_t kPyramidLevels = 5;

enum class PadMode { kBorder, kZeros };

/// Batched TPS parameters, shape [B, 50]. Values must be finite.
class TpsTheta {
 public:
  /// Accepts [50] (promoted to [1, 50]) or [B, 50].
  explicit TpsTheta(torch::Tensor values);

  const torch::Tensor& values() const { return values_; }
  int64_t batch() const { return values_.size(0); }
  /// Target points as [B, 25, 2].
  torch::Tensor points() const { return values_.view({batch(), kControlPoints, 2}); }

  /// Targets equal to the source lattice.
  static TpsTheta identity(int64_t batch = 1, torch::Dtype dtype = torch::kFloat32);

 private:
  torch::Tensor values_;
};

/// Spline coefficients: 25 radial weights and the affine block, rows (1, x, y).
struct TpsCoefficients {
  torch::Tensor radial;  // [B, 25, 2], float64
  torch::Tensor affine;  // [B, 3, 2], float64
};

/// The fixed 5x5 source lattice and the inverse of its TPS system matrix.
class ControlLattice {
 public:
  ControlLattice();

  /// Source points [25, 2], float64, row-major (y outer, x inner).
  const torch::Tensor& source_points() const { return source_; }

  /// Solves for coefficients mapping every source point onto its target.
  /// Differentiable with respect to theta.
  TpsCoefficients solve(const TpsTheta& theta) const;

 private:
  torch::Tensor source_;          // [25, 2]
  torch::Tensor inverse_system_;  // [28, 25]: columns of L^-1 acting on the targets
};

/// Process-wide lattice, built once on first use.
const ControlLattice& default_lattice();

/// U(r) = r^2 log r^2 evaluated from squared distances, U(0) = 0.
torch::Tensor tps_kernel(const torch::Tensor& squared_distance);

/// Evaluates the spline at arbitrary points [N, 2]; returns [B, N, 2] float64.
torch::Tensor tps_evaluate(const TpsCoefficients& coeffs, const torch::Tensor& points,
                           const ControlLattice& lattice = default_lattice());

/// Regular align-corners mesh of a height x width raster, [H, W, 2] float64.
torch::Tensor normalized_mesh(int64_t height, int64_t width);

/// Field of normalized source coordinates realizing T at one resolution.
struct SamplingGrid {
  torch::Tensor coords;  // [B, H, W, 2], float64
  int scale_id = -1;
  int64_t height() const { return coords.size(1); }
  int64_t width() const { return coords.size(2); }
};

SamplingGrid generate_grid(const TpsCoefficients& coeffs, int64_t height, int64_t width,
                           const ControlLattice& lattice = default_lattice());

/// Bilinear interpolation of source [B, C, Hs, Ws] at every grid location.
/// The output is [B, C, out_height, out_width]; the grid must have that
/// resolution. Differentiable with respect to source and grid coordinates.
torch::Tensor bilinear_sample(const torch::Tensor& source, const SamplingGrid& grid,
                              PadMode pad_mode, int64_t out_height, int64_t out_width);

/// Convenience overload: the output resolution is the grid's.
torch::Tensor bilinear_sample(const torch::Tensor& source, const SamplingGrid& grid,
                              PadMode pad_mode);

/// Warps every level of a 5-level pyramid with grids generated from one theta.
FeaturePyramid warp_multiscale(const TpsTheta& theta, const FeaturePyramid& pyramid,
                               PadMode pad_mode = PadMode::kBorder,
                               const ControlLattice& lattice = default_lattice());

/// Pixel-level warp of [B, C, H, W] images.
torch::Tensor warp_image(const TpsTheta& theta, const torch::Tensor& images, PadMode pad_mode,
                         const ControlLattice& lattice = default_lattice());

}  // namespace tryon
