#pragma once

// LPIPS-style perceptual distance: per tap, unit-normalize feature vectors
// along channels, scale the difference by per-channel weights, average the
// squared norm over space, and sum over taps.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

#include "tryon/objectives.hpp"

namespace tryon {

inline constexpr double kLpipsEpsilon = 1e-10;

struct LpipsWeights {
  std::vector<torch::Tensor> per_stage;  // one [C_i] nonnegative vector per tap

  /// All ones, sized to the extractor's channel counts.
  static LpipsWeights ones(const PerceptualExtractor& extractor);
  /// Throws ContractViolation on negative entries or length mismatch.
  void validate(const PerceptualExtractor& extractor) const;
};

/// f / (||f||_2 + eps) along dim 1.
torch::Tensor unit_normalize(const torch::Tensor& features, double epsilon = kLpipsEpsilon);

/// Per-sample distances, [B].
torch::Tensor lpips_per_sample(const torch::Tensor& a, const torch::Tensor& b, PerceptualExtractor& extractor,
                               const LpipsWeights& weights);

/// Batch mean of lpips_per_sample. Accepts [3,H,W] or [B,3,H,W].
double lpips(const torch::Tensor& a, const torch::Tensor& b, PerceptualExtractor& extractor,
             const LpipsWeights& weights);

struct LpipsPairScore {
  std::string name;
  double score = 0.0;
};

struct LpipsReport {
  std::vector<LpipsPairScore> pairs;
  std::vector<std::string> errors;  // skipped pairs with reasons
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  size_t count = 0;

  bool ok() const { return errors.empty(); }
  nlohmann::json to_json() const;
};

/// Mean and population standard deviation of a score list.
void summarize(LpipsReport& report);

/// Scores every PNG of dir_a against the identically named PNG in dir_b,
/// in lexicographic name order. Missing counterparts and shape mismatches
/// are recorded in `errors` and skipped.
LpipsReport lpips_directory(const std::filesystem::path& dir_a, const std::filesystem::path& dir_b,
                            PerceptualExtractor& extractor, const LpipsWeights& weights);

}  // namespace tryon
