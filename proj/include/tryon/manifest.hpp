#pragma once

// Ingestion of real (or exported synthetic) try-on data.
//
// Manifest: UTF-8 text, one record per line, comma separated. The first
// non-comment line is the header
//
//   person,cloth,mask,view[,cloth_mask]
//
// Paths are relative to the manifest's directory. `mask` marks the
// upper-body region hidden in the agnostic image; the optional `cloth_mask`
// marks the worn garment (defaults to `mask`). `view` is `front` or `back`;
// back views are skipped. Blank lines and lines starting with '#' are ignored.

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "tryon/synthetic.hpp"

namespace tryon {

inline constexpr const char* kManifestHeader = "person,cloth,mask,view,cloth_mask";

struct ManifestRow {
  size_t line = 0;  // 1-based line in the manifest file
  std::filesystem::path person;
  std::filesystem::path cloth;
  std::filesystem::path mask;
  std::filesystem::path cloth_mask;  // empty when absent
  std::string view;
};

/// Parses and validates every row (format only; images are not opened).
/// Throws IoError naming the line of the first malformed row.
std::vector<ManifestRow> parse_manifest(const std::filesystem::path& manifest);

/// Random-access dataset over the front-view rows of a manifest. The
/// alternative cloth of item i is the cloth of item (i + 1) mod size.
class ManifestDataset {
 public:
  ManifestDataset(const std::filesystem::path& manifest, MaskSpec mask_spec = {});

  size_t size() const { return rows_.size(); }
  const ManifestRow& row(size_t i) const { return rows_.at(i); }

  /// Loads item i. Throws IoError (with the manifest line) for missing
  /// files or resolution mismatches.
  TryOnTriplet get(size_t i) const;

 private:
  std::filesystem::path manifest_;
  std::vector<ManifestRow> rows_;
  MaskSpec mask_spec_;
};

/// Streams every front-view triplet of the manifest to `sink`, in file order.
void ingest_real(const std::filesystem::path& manifest, const std::function<void(TryOnTriplet&&)>& sink,
                 MaskSpec mask_spec = {});

}  // namespace tryon
