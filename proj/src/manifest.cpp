#include "tryon/manifest.hpp"

#include <fstream>
#include <sstream>

#include "tryon/errors.hpp"
#include "tryon/image_io.hpp"

namespace tryon {
namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream stream(line);
  std::string field;
  while (std::getline(stream, field, ',')) {
    const auto first = field.find_first_not_of(" \t\r");
    const auto last = field.find_last_not_of(" \t\r");
    fields.push_back(first == std::string::npos ? "" : field.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string where(const std::filesystem::path& manifest, size_t line) {
  return manifest.string() + ":" + std::to_string(line) + ": ";
}

}  // namespace

std::vector<ManifestRow> parse_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw IoError("cannot open manifest '" + manifest.string() + "'");
  const auto base = manifest.parent_path();
  std::vector<ManifestRow> rows;
  std::string line;
  size_t number = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos || line.front() == '#') continue;
    const auto fields = split_csv(line);
    if (!header_seen) {
      header_seen = true;
      const bool valid = (fields.size() == 4 || fields.size() == 5) && fields[0] == "person" &&
                         fields[1] == "cloth" && fields[2] == "mask" && fields[3] == "view" &&
                         (fields.size() == 4 || fields[4] == "cloth_mask");
      if (!valid) throw IoError(where(manifest, number) + "expected header '" + kManifestHeader + "'");
      continue;
    }
    if (fields.size() != 4 && fields.size() != 5) {
      throw IoError(where(manifest, number) + "malformed row: expected 4 or 5 fields, got " +
                    std::to_string(fields.size()));
    }
    for (size_t i = 0; i < 4; ++i) {
      if (fields[i].empty()) throw IoError(where(manifest, number) + "malformed row: empty field");
    }
    if (fields[3] != "front" && fields[3] != "back") {
      throw IoError(where(manifest, number) + "malformed row: view must be 'front' or 'back'");
    }
    ManifestRow row;
    row.line = number;
    row.person = base / fields[0];
    row.cloth = base / fields[1];
    row.mask = base / fields[2];
    row.view = fields[3];
    if (fields.size() == 5 && !fields[4].empty()) row.cloth_mask = base / fields[4];
    rows.push_back(std::move(row));
  }
  return rows;
}

ManifestDataset::ManifestDataset(const std::filesystem::path& manifest, MaskSpec mask_spec)
    : manifest_(manifest), mask_spec_(mask_spec) {
  for (auto& row : parse_manifest(manifest)) {
    if (row.view == "front") rows_.push_back(std::move(row));
  }
}

TryOnTriplet ManifestDataset::get(size_t i) const {
  const auto& row = rows_.at(i);
  const auto& alt_row = rows_.at((i + 1) % rows_.size());
  auto load = [this](const ManifestRow& owner, const std::filesystem::path& path, bool is_mask) {
    if (!std::filesystem::exists(path)) {
      throw IoError(where(manifest_, owner.line) + "missing file '" + path.string() + "'");
    }
    return is_mask ? read_mask_png(path) : read_png(path);
  };
  TryOnTriplet t;
  t.person = load(row, row.person, false);
  t.cloth = load(row, row.cloth, false);
  auto region = load(row, row.mask, true);
  t.cloth_mask = row.cloth_mask.empty() ? region : load(row, row.cloth_mask, true);
  t.alt_cloth = i == (i + 1) % rows_.size() ? t.cloth : load(alt_row, alt_row.cloth, false);
  const auto shape = t.person.sizes();
  const bool consistent = t.cloth.sizes() == shape && t.alt_cloth.sizes() == shape &&
                          region.size(0) == shape[1] && region.size(1) == shape[2] &&
                          t.cloth_mask.sizes() == region.sizes();
  if (!consistent) {
    throw IoError(where(manifest_, row.line) + "resolution mismatch between images");
  }
  t.cloth_mask = torch::minimum(t.cloth_mask, region);
  auto agnostic = make_agnostic(t.person, region, mask_spec_);
  t.agnostic = agnostic.agnostic;
  t.mask = agnostic.mask;
  t.worn_cloth = torch::where(t.cloth_mask.to(torch::kBool).unsqueeze(0), t.person, torch::ones_like(t.person));
  return t;
}

void ingest_real(const std::filesystem::path& manifest, const std::function<void(TryOnTriplet&&)>& sink,
                 MaskSpec mask_spec) {
  ManifestDataset dataset(manifest, mask_spec);
  for (size_t i = 0; i < dataset.size(); ++i) sink(dataset.get(i));
}

}  // namespace tryon
