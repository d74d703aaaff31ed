#include "tryon/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "tryon/errors.hpp"
#include "tryon/objectives.hpp"

namespace tryon {

uint64_t SplitMix64::next() {
  uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double SplitMix64::uniform(double lo, double hi) {
  const double unit = static_cast<double>(next() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * unit;
}

uint64_t SplitMix64::below(uint64_t n) { return n == 0 ? 0 : next() % n; }

uint64_t mix_seed(uint64_t a, uint64_t b) {
  SplitMix64 rng(a ^ (b * 0xd1b54a32d192ed03ULL + 0x632be59bd9b4e019ULL));
  rng.next();
  return rng.next();
}

std::string to_string(ClothPattern pattern) {
  switch (pattern) {
    case ClothPattern::kStripes: return "stripes";
    case ClothPattern::kChecks: return "checks";
    case ClothPattern::kLogo: return "logo";
    case ClothPattern::kSolid: return "solid";
  }
  return "unknown";
}

ClothPattern parse_pattern(const std::string& name) {
  for (auto p : kAllPatterns) {
    if (to_string(p) == name) return p;
  }
  throw ContractViolation("unknown cloth pattern '" + name + "'");
}

namespace {

using Rgb = std::array<float, 3>;

constexpr float kWhite = 1.0f;

// Garment colors stay away from the white background.
Rgb random_color(SplitMix64& rng) {
  return {static_cast<float>(rng.uniform(-0.9, 0.6)), static_cast<float>(rng.uniform(-0.9, 0.6)),
          static_cast<float>(rng.uniform(-0.9, 0.6))};
}

Rgb contrasting_color(SplitMix64& rng, const Rgb& base) {
  Rgb other{};
  for (int c = 0; c < 3; ++c) {
    const float shift = static_cast<float>(rng.uniform(0.7, 1.0));
    other[c] = base[c] > -0.15f ? base[c] - shift : base[c] + shift;
    other[c] = std::clamp(other[c], -0.95f, 0.6f);
  }
  return other;
}

struct GarmentShape {
  double half_width;
  double top;
  double bottom;
  double sleeve_reach;

  static GarmentShape random(SplitMix64& rng) {
    return {rng.uniform(0.42, 0.52), rng.uniform(-0.65, -0.55), rng.uniform(0.8, 0.92), rng.uniform(0.8, 0.92)};
  }

  bool contains(double u, double v) const {
    const double au = std::abs(u);
    const double neck_u = u / 0.18;
    const double neck_v = (v - top) / 0.12;
    if (neck_u * neck_u + neck_v * neck_v < 1.0) return false;
    if (au <= half_width) return v >= top && v <= bottom;
    if (au <= sleeve_reach) {
      const double t = (au - half_width) / (sleeve_reach - half_width);
      return v >= top + 0.12 * t && v <= top + 0.5 - 0.2 * t;
    }
    return false;
  }
};

double coord(int64_t index, int64_t size) {
  return size == 1 ? 0.0 : -1.0 + 2.0 * static_cast<double>(index) / static_cast<double>(size - 1);
}

double fraction(double x) { return x - std::floor(x); }

}  // namespace

torch::Tensor generate_cloth(ClothPattern pattern, uint64_t seed, int64_t height, int64_t width) {
  require(height >= 1 && width >= 1, "generate_cloth: empty resolution");
  SplitMix64 rng(mix_seed(seed, static_cast<uint64_t>(pattern) + 1));
  const GarmentShape shape = GarmentShape::random(rng);
  const Rgb primary = random_color(rng);
  const Rgb secondary = contrasting_color(rng, primary);

  // Pattern parameters in normalized units.
  const double period = rng.uniform(0.18, 0.4);
  const double phase = rng.uniform(0.0, 1.0);
  static constexpr double kDiag = 0.70710678118654752;
  static constexpr std::array<std::array<double, 2>, 4> kDirections = {
      {{1.0, 0.0}, {0.0, 1.0}, {kDiag, kDiag}, {kDiag, -kDiag}}};
  const auto direction = kDirections[rng.below(kDirections.size())];
  const double cell = rng.uniform(0.2, 0.4);
  const double logo_radius = rng.uniform(0.15, 0.25);
  const double logo_v = rng.uniform(-0.25, 0.1);

  auto image = torch::empty({3, height, width}, torch::kFloat32);
  auto px = image.accessor<float, 3>();
  for (int64_t i = 0; i < height; ++i) {
    const double v = coord(i, height);
    for (int64_t j = 0; j < width; ++j) {
      const double u = coord(j, width);
      Rgb color{kWhite, kWhite, kWhite};
      if (shape.contains(u, v)) {
        bool alt = false;
        switch (pattern) {
          case ClothPattern::kSolid: break;
          case ClothPattern::kStripes:
            alt = fraction((u * direction[0] + v * direction[1]) / period + phase) < 0.5;
            break;
          case ClothPattern::kChecks:
            alt = (static_cast<int64_t>(std::floor(u / cell + phase)) +
                   static_cast<int64_t>(std::floor(v / cell + phase))) % 2 != 0;
            break;
          case ClothPattern::kLogo: {
            const double du = std::abs(u);
            const double dv = std::abs(v - logo_v);
            alt = du + dv < logo_radius || (dv < 0.04 && du < logo_radius * 1.6);
            break;
          }
        }
        color = alt ? secondary : primary;
      }
      for (int c = 0; c < 3; ++c) px[c][i][j] = color[c];
    }
  }
  return image;
}

torch::Tensor cloth_silhouette(const torch::Tensor& cloth) {
  require(cloth.dim() == 3, "cloth_silhouette expects [3,H,W]");
  return (cloth < kWhite - 1e-3f).any(0).to(torch::kFloat32);
}

TpsTheta random_smooth_theta(uint64_t seed, double magnitude) {
  require(magnitude >= 0.0 && magnitude <= kMaxWarpMagnitude, "warp magnitude must lie in [0, 0.3]");
  auto identity = TpsTheta::identity(1, torch::kFloat64).points().squeeze(0);  // [25, 2]
  if (magnitude == 0.0) return TpsTheta(identity.reshape({kThetaSize}).to(torch::kFloat32));

  SplitMix64 rng(seed);
  double c[10];
  for (double& value : c) value = rng.uniform(-1.0, 1.0);
  auto x = identity.select(1, 0);
  auto y = identity.select(1, 1);
  // Affine motion plus a low-order bend.
  auto dx = c[0] + c[1] * x + c[2] * y + 0.5 * c[3] * x * y + 0.5 * c[4] * y * y;
  auto dy = c[5] + c[6] * x + c[7] * y + 0.5 * c[8] * x * y + 0.5 * c[9] * x * x;
  auto displacement = torch::stack({dx, dy}, 1);
  const double peak = displacement.norm(2, 1).max().item<double>();
  const double target = magnitude * rng.uniform(0.6, 1.0);
  displacement = displacement * (target / std::max(peak, 1e-12));
  return TpsTheta((identity + displacement).reshape({kThetaSize}).to(torch::kFloat32));
}

PersonSample synthesize_person(const torch::Tensor& cloth, uint64_t body_seed, double warp_magnitude) {
  require(cloth.dim() == 3 && cloth.size(0) == 3, "synthesize_person expects a [3,H,W] cloth");
  require(warp_magnitude >= 0.0 && warp_magnitude <= kMaxWarpMagnitude,
          "warp magnitude must lie in [0, 0.3]");
  const int64_t height = cloth.size(1);
  const int64_t width = cloth.size(2);
  SplitMix64 rng(body_seed);

  Rgb background{};
  for (auto& c : background) c = static_cast<float>(rng.uniform(0.1, 0.7));
  const float skin_r = static_cast<float>(rng.uniform(0.2, 0.8));
  const float skin_g = skin_r - static_cast<float>(rng.uniform(0.1, 0.3));
  const Rgb skin{skin_r, skin_g, skin_g - static_cast<float>(rng.uniform(0.05, 0.2))};
  const double head_u = rng.uniform(-0.05, 0.05);
  const double head_ru = rng.uniform(0.16, 0.2);
  const double torso_half = rng.uniform(0.38, 0.45);

  auto body = torch::empty({3, height, width}, torch::kFloat32);
  auto torso = torch::zeros({height, width}, torch::kFloat32);
  auto body_px = body.accessor<float, 3>();
  auto torso_px = torso.accessor<float, 2>();
  for (int64_t i = 0; i < height; ++i) {
    const double v = coord(i, height);
    for (int64_t j = 0; j < width; ++j) {
      const double u = coord(j, width);
      const double hu = (u - head_u) / head_ru;
      const double hv = (v + 0.78) / 0.2;
      const bool head = hu * hu + hv * hv <= 1.0;
      const bool neck = std::abs(u - head_u) < 0.09 && v >= -0.66 && v < -0.5;
      const bool trunk = std::abs(u) < torso_half && v >= -0.56;
      if (neck || trunk) torso_px[i][j] = 1.0f;
      for (int c = 0; c < 3; ++c) {
        const float shade = background[c] + 0.15f * static_cast<float>(v);
        body_px[c][i][j] = (head || neck || trunk) ? skin[c] : shade;
      }
    }
  }

  const TpsTheta theta = random_smooth_theta(mix_seed(body_seed, 0x7e7a), warp_magnitude);
  auto warped = warp_image(theta, cloth.unsqueeze(0), PadMode::kBorder).squeeze(0);
  auto warped_silhouette =
      warp_image(theta, cloth_silhouette(cloth).view({1, 1, height, width}), PadMode::kBorder).view({height, width});
  auto cloth_mask = (warped_silhouette >= 0.5).to(torch::kFloat32);
  auto garment = cloth_mask.to(torch::kBool).unsqueeze(0);

  auto person = torch::where(garment, warped, body);
  auto worn = torch::where(garment, warped, torch::full_like(warped, kWhite));
  auto covered = torch::maximum(cloth_mask, torso).view({1, 1, height, width});
  auto body_mask = torch::max_pool2d(covered, 3, 1, 1).view({height, width});
  return {person, theta, worn, cloth_mask, body_mask};
}

AgnosticResult make_agnostic(const torch::Tensor& person, const torch::Tensor& region, const MaskSpec& spec) {
  require(person.dim() == 3, "make_agnostic expects a [3,H,W] person");
  require(region.dim() == 2 && region.size(0) == person.size(1) && region.size(1) == person.size(2),
          "make_agnostic: mask resolution differs from the person image");
  auto mask = (region > 0.5).to(torch::kFloat32);
  if (spec.mode == MaskMode::kBoundingBox && mask.sum().item<float>() > 0) {
    auto rows = torch::nonzero(mask.amax(1)).view(-1);
    auto cols = torch::nonzero(mask.amax(0)).view(-1);
    const int64_t top = rows.min().item<int64_t>();
    const int64_t bottom = rows.max().item<int64_t>();
    const int64_t left = cols.min().item<int64_t>();
    const int64_t right = cols.max().item<int64_t>();
    mask.zero_();
    mask.slice(0, top, bottom + 1).slice(1, left, right + 1).fill_(1.0f);
  }
  auto agnostic = torch::where(mask.to(torch::kBool).unsqueeze(0), torch::full_like(person, spec.fill), person);
  return {agnostic, mask};
}

TryOnTriplet sample_triplet(uint64_t dataset_seed, int64_t index, const SyntheticOptions& options) {
  require(index >= 0 && index < options.epoch_size, "sample_triplet: index outside the epoch");
  SplitMix64 rng(mix_seed(dataset_seed, static_cast<uint64_t>(index)));
  const auto pattern = kAllPatterns[rng.below(4)];
  const uint64_t cloth_seed = rng.next();
  const auto alt_pattern = kAllPatterns[(static_cast<uint64_t>(pattern) + 1 + rng.below(3)) % 4];
  const uint64_t alt_seed = rng.next();
  const uint64_t body_seed = rng.next();

  TryOnTriplet triplet;
  triplet.cloth = generate_cloth(pattern, cloth_seed, options.height, options.width);
  triplet.alt_cloth = generate_cloth(alt_pattern, alt_seed, options.height, options.width);
  auto sample = synthesize_person(triplet.cloth, body_seed, options.warp_magnitude);
  auto agnostic = make_agnostic(sample.person, sample.body_mask, options.mask);
  triplet.person = sample.person;
  triplet.worn_cloth = sample.worn_cloth;
  triplet.true_theta = sample.theta.values().view({kThetaSize});
  triplet.agnostic = agnostic.agnostic;
  triplet.mask = agnostic.mask;
  triplet.cloth_mask = sample.cloth_mask;
  return triplet;
}

std::vector<std::string> check_triplet(const TryOnTriplet& t, const MaskSpec& spec, double warp_tolerance) {
  std::vector<std::string> problems;
  const auto shape = t.person.sizes();
  for (const auto* image : {&t.cloth, &t.worn_cloth, &t.agnostic, &t.alt_cloth}) {
    if (image->sizes() != shape) problems.emplace_back("image resolutions differ");
  }
  if (!problems.empty()) return problems;
  const auto hidden = t.mask.to(torch::kBool).unsqueeze(0).expand_as(t.person);
  if (!((t.mask == 0) | (t.mask == 1)).all().item<bool>()) problems.emplace_back("mask is not binary");
  if (!torch::equal(t.agnostic.masked_select(~hidden), t.person.masked_select(~hidden))) {
    problems.emplace_back("agnostic differs from person outside the mask");
  }
  if (!(t.agnostic.masked_select(hidden) == spec.fill).all().item<bool>()) {
    problems.emplace_back("agnostic is not the fill value inside the mask");
  }
  if (!(t.worn_cloth.masked_select(~hidden) == kWhite).all().item<bool>()) {
    problems.emplace_back("worn cloth is not background outside the mask");
  }
  if (t.cloth_mask.defined() && (t.cloth_mask > t.mask).any().item<bool>()) {
    problems.emplace_back("cloth mask extends beyond the mask");
  }
  if (t.true_theta) {
    const double loss = warp_loss(TpsTheta(*t.true_theta), t.cloth.unsqueeze(0), t.worn_cloth.unsqueeze(0))
                            .item<double>();
    if (loss > warp_tolerance) problems.emplace_back("warp loss at the true theta is " + std::to_string(loss));
  }
  return problems;
}

torch::Tensor stack_field(const std::vector<TryOnTriplet>& batch, torch::Tensor TryOnTriplet::*field) {
  std::vector<torch::Tensor> items;
  items.reserve(batch.size());
  for (const auto& t : batch) items.push_back(t.*field);
  return torch::stack(items);
}

}  // namespace tryon
