#pragma once

#include <filesystem>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

#include "tryon/lpips.hpp"
#include "tryon/objectives.hpp"

namespace tryon {

struct ReportRow {
  torch::Tensor reference;  // [3, H, W]
  torch::Tensor cloth;
  torch::Tensor output;
};

/// Tiles rows of (reference, cloth, output) into one [3, rows*H, 3*W] image.
/// Throws ContractViolation for an empty list or mixed resolutions.
torch::Tensor tile_report(const std::vector<ReportRow>& rows);

/// Per-row L1 and LPIPS of output against reference, with means.
nlohmann::json report_metrics(const std::vector<ReportRow>& rows, PerceptualExtractor& extractor,
                              const LpipsWeights& weights);

/// Writes `<stem>.png` (the grid) and `<stem>.json` (the metrics).
void emit_report(const std::vector<ReportRow>& rows, const std::filesystem::path& stem,
                 PerceptualExtractor& extractor, const LpipsWeights& weights);

}  // namespace tryon
