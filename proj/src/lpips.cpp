#include "tryon/lpips.hpp"

#include <algorithm>
#include <cmath>

#include "tryon/errors.hpp"
#include "tryon/image_io.hpp"

namespace tryon {

LpipsWeights LpipsWeights::ones(const PerceptualExtractor& extractor) {
  LpipsWeights weights;
  for (int64_t depth : extractor->depths()) weights.per_stage.push_back(torch::ones({depth}));
  return weights;
}

void LpipsWeights::validate(const PerceptualExtractor& extractor) const {
  const auto& depths = extractor->depths();
  require(per_stage.size() == depths.size(), "LPIPS weights: stage count differs from extractor");
  for (size_t i = 0; i < depths.size(); ++i) {
    require(per_stage[i].dim() == 1 && per_stage[i].size(0) == depths[i],
            "LPIPS weights: channel count differs from extractor at stage " + std::to_string(i));
    require((per_stage[i] >= 0).all().item<bool>(), "LPIPS weights must be nonnegative");
  }
}

torch::Tensor unit_normalize(const torch::Tensor& features, double epsilon) {
  return features / (features.square().sum(1, /*keepdim=*/true).sqrt() + epsilon);
}

torch::Tensor lpips_per_sample(const torch::Tensor& a, const torch::Tensor& b, PerceptualExtractor& extractor,
                               const LpipsWeights& weights) {
  require(a.sizes() == b.sizes(), "lpips: image shapes differ");
  weights.validate(extractor);
  auto fa = extractor->forward(a);
  auto fb = extractor->forward(b);
  auto total = torch::zeros({a.size(0)}, a.options());
  for (size_t i = 0; i < fa.size(); ++i) {
    auto w = weights.per_stage[i].to(a.options()).view({1, -1, 1, 1});
    auto diff = w * (unit_normalize(fa[i]) - unit_normalize(fb[i]));
    total = total + diff.square().sum(1).mean({1, 2});
  }
  return total;
}

double lpips(const torch::Tensor& a, const torch::Tensor& b, PerceptualExtractor& extractor,
             const LpipsWeights& weights) {
  torch::NoGradGuard no_grad;
  auto batch_a = a.dim() == 3 ? a.unsqueeze(0) : a;
  auto batch_b = b.dim() == 3 ? b.unsqueeze(0) : b;
  return lpips_per_sample(batch_a, batch_b, extractor, weights).mean().item<double>();
}

void summarize(LpipsReport& report) {
  report.count = report.pairs.size();
  if (report.count == 0) {
    report.mean = report.std = 0.0;
    return;
  }
  double sum = 0.0;
  for (const auto& p : report.pairs) sum += p.score;
  report.mean = sum / static_cast<double>(report.count);
  double sq = 0.0;
  for (const auto& p : report.pairs) sq += (p.score - report.mean) * (p.score - report.mean);
  report.std = std::sqrt(sq / static_cast<double>(report.count));
}

nlohmann::json LpipsReport::to_json() const {
  nlohmann::json pairs_json = nlohmann::json::array();
  for (const auto& p : pairs) pairs_json.push_back({{"name", p.name}, {"score", p.score}});
  return {{"pairs", pairs_json}, {"mean", mean}, {"std", std}, {"count", count}, {"errors", errors}};
}

LpipsReport lpips_directory(const std::filesystem::path& dir_a, const std::filesystem::path& dir_b,
                            PerceptualExtractor& extractor, const LpipsWeights& weights) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir_a)) throw IoError("not a directory: " + dir_a.string());
  if (!fs::is_directory(dir_b)) throw IoError("not a directory: " + dir_b.string());
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir_a)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") {
      names.push_back(entry.path().filename().string());
    }
  }
  std::sort(names.begin(), names.end());

  LpipsReport report;
  for (const auto& name : names) {
    const auto other = dir_b / name;
    if (!fs::exists(other)) {
      report.errors.push_back(name + ": missing counterpart in " + dir_b.string());
      continue;
    }
    auto a = read_png(dir_a / name);
    auto b = read_png(other);
    if (a.sizes() != b.sizes()) {
      report.errors.push_back(name + ": shape mismatch");
      continue;
    }
    report.pairs.push_back({name, lpips(a, b, extractor, weights)});
  }
  summarize(report);
  return report;
}

}  // namespace tryon
