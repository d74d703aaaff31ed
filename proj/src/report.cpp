#include "tryon/report.hpp"

#include <fstream>

#include "tryon/errors.hpp"
#include "tryon/image_io.hpp"

namespace tryon {

torch::Tensor tile_report(const std::vector<ReportRow>& rows) {
  require(!rows.empty(), "report needs at least one row");
  const auto shape = rows.front().reference.sizes().vec();
  require(shape.size() == 3 && shape[0] == 3, "report images must be [3,H,W]");
  std::vector<torch::Tensor> lines;
  for (const auto& row : rows) {
    for (const auto* image : {&row.reference, &row.cloth, &row.output}) {
      require(image->sizes().vec() == shape, "report rows mix resolutions");
    }
    lines.push_back(torch::cat({row.reference, row.cloth, row.output.detach().to(row.reference.dtype())}, 2));
  }
  return torch::cat(lines, 1);
}

nlohmann::json report_metrics(const std::vector<ReportRow>& rows, PerceptualExtractor& extractor,
                              const LpipsWeights& weights) {
  nlohmann::json per_row = nlohmann::json::array();
  double l1_sum = 0.0;
  double lpips_sum = 0.0;
  for (const auto& row : rows) {
    const double l1 = (row.output - row.reference).abs().mean().item<double>();
    const double distance = lpips(row.output, row.reference, extractor, weights);
    per_row.push_back({{"l1", l1}, {"lpips", distance}});
    l1_sum += l1;
    lpips_sum += distance;
  }
  const double n = static_cast<double>(rows.size());
  return {{"rows", per_row}, {"mean_l1", l1_sum / n}, {"mean_lpips", lpips_sum / n}, {"count", rows.size()}};
}

void emit_report(const std::vector<ReportRow>& rows, const std::filesystem::path& stem,
                 PerceptualExtractor& extractor, const LpipsWeights& weights) {
  auto grid = tile_report(rows);
  auto png = stem;
  png += ".png";
  auto json_path = stem;
  json_path += ".json";
  write_png(png, grid);
  std::ofstream out(json_path);
  if (!out) throw IoError("cannot write '" + json_path.string() + "'");
  out << report_metrics(rows, extractor, weights).dump(2) << "\n";
}

}  // namespace tryon
