#pragma once

// Images travel as float tensors shaped [C, H, W] with values in [-1, 1].
// On disk they are 8-bit PNG in [0, 255].

#include <filesystem>
#include <torch/torch.h>

namespace tryon {

/// Reads an RGB(A)/gray PNG as a [3, H, W] float image in [-1, 1].
torch::Tensor read_png(const std::filesystem::path& path);

/// Reads a PNG as a binary [H, W] float mask (1 where luminance > 127).
torch::Tensor read_mask_png(const std::filesystem::path& path);

/// Writes a [3, H, W] or [1, H, W] image in [-1, 1] (values are clamped).
void write_png(const std::filesystem::path& path, const torch::Tensor& image);

/// Writes a [H, W] mask in {0, 1} as an 8-bit gray PNG.
void write_mask_png(const std::filesystem::path& path, const torch::Tensor& mask);

/// Separable Gaussian blur of a [C, H, W] or [B, C, H, W] image with
/// replicate padding. sigma <= 0 returns the input unchanged.
torch::Tensor gaussian_blur(const torch::Tensor& image, double sigma);

}  // namespace tryon
