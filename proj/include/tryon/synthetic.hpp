#pragma once

// Procedural paired try-on data with known ground-truth warps.
//
// A cloth image is a patterned garment on a white background. A person is a
// simple body (head, neck, torso) on a tinted background wearing the cloth
// warped by a smooth random TPS. Because the warp is known, the worn cloth
// and the warp loss at the true parameters are exact up to resampling.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "tryon/tps.hpp"

namespace tryon {

/// Deterministic 64-bit generator (splitmix64). Platform independent, unlike
/// the standard distributions.
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}
  uint64_t next();
  /// Uniform in [lo, hi) from the top 53 bits.
  double uniform(double lo = 0.0, double hi = 1.0);
  uint64_t below(uint64_t n);

 private:
  uint64_t state_;
};

/// Order-dependent mix of two seeds.
uint64_t mix_seed(uint64_t a, uint64_t b);

enum class ClothPattern { kStripes, kChecks, kLogo, kSolid };
inline constexpr ClothPattern kAllPatterns[] = {ClothPattern::kStripes, ClothPattern::kChecks, ClothPattern::kLogo,
                                                ClothPattern::kSolid};
std::string to_string(ClothPattern pattern);
ClothPattern parse_pattern(const std::string& name);

enum class MaskMode { kParsingLike, kBoundingBox };

struct MaskSpec {
  MaskMode mode = MaskMode::kParsingLike;
  float fill = 0.0f;  // mid-gray
};

inline constexpr double kMaxWarpMagnitude = 0.3;

struct SyntheticOptions {
  int64_t height = 64;
  int64_t width = 64;
  double warp_magnitude = 0.2;
  int64_t epoch_size = 16;
  MaskSpec mask{};
};

struct TryOnTriplet {
  torch::Tensor person;      // p_a, [3, H, W]
  torch::Tensor cloth;       // c_a
  torch::Tensor worn_cloth;  // c_{a,p}: garment as worn, white elsewhere
  torch::Tensor agnostic;    // ap
  torch::Tensor alt_cloth;   // c_b
  std::optional<torch::Tensor> true_theta;  // [50], synthetic data only
  torch::Tensor mask;        // [H, W] region hidden in ap
  torch::Tensor cloth_mask;  // [H, W] worn garment region, subset of mask
};

/// Garment on white; deterministic for (pattern, seed).
torch::Tensor generate_cloth(ClothPattern pattern, uint64_t seed, int64_t height = 64, int64_t width = 64);

/// Pixels of the cloth image that are not background white, [H, W] in {0, 1}.
torch::Tensor cloth_silhouette(const torch::Tensor& cloth);

/// Smooth random TPS targets whose control points move at most `magnitude`.
TpsTheta random_smooth_theta(uint64_t seed, double magnitude);

struct PersonSample {
  torch::Tensor person;      // [3, H, W]
  TpsTheta theta;            // ground-truth warp
  torch::Tensor worn_cloth;  // [3, H, W]
  torch::Tensor cloth_mask;  // [H, W]
  torch::Tensor body_mask;   // [H, W] upper-body parsing: garment, torso, neck
};

/// Draws a body, warps the cloth with a random smooth theta and composites it.
/// `warp_magnitude` must lie in [0, 0.3].
PersonSample synthesize_person(const torch::Tensor& cloth, uint64_t body_seed, double warp_magnitude);

struct AgnosticResult {
  torch::Tensor agnostic;  // [3, H, W]
  torch::Tensor mask;      // [H, W] mask actually applied
};

/// Fills `region` (or its bounding box) with the gray fill value. Outside the
/// applied mask the result equals `person` exactly.
AgnosticResult make_agnostic(const torch::Tensor& person, const torch::Tensor& region, const MaskSpec& spec);

/// Deterministic triplet for (dataset_seed, index); 0 <= index < epoch_size.
TryOnTriplet sample_triplet(uint64_t dataset_seed, int64_t index, const SyntheticOptions& options = {});

/// Returns the violated triplet invariants, empty when all hold.
/// `warp_tolerance` bounds warp_loss(true_theta, cloth, worn_cloth).
std::vector<std::string> check_triplet(const TryOnTriplet& triplet, const MaskSpec& spec,
                                       double warp_tolerance = 0.02);

/// Stacks the named field of each triplet into [B, ...].
torch::Tensor stack_field(const std::vector<TryOnTriplet>& batch, torch::Tensor TryOnTriplet::*field);

}  // namespace tryon
