#pragma once

// Training configuration, read from a flat `key = value` text file. Lines
// starting with '#' are comments; unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <string>

#include "tryon/adversary.hpp"
#include "tryon/objectives.hpp"
#include "tryon/synthetic.hpp"

namespace tryon {

enum class DataSource { kSynthetic, kManifest };

struct TrainConfig {
  // Optimization (Adam for both the generator side and the discriminator).
  double learning_rate = 1e-3;
  double beta1 = 0.5;
  double beta2 = 0.999;
  int64_t batch_size = 8;
  int64_t iterations = 2000;  // one paired + one unpaired step each
  LossWeights weights{};
  double gp_weight = 10.0;
  RelativisticVariant adv_variant = RelativisticVariant::kPairwise;

  // Determinism.
  uint64_t seed = 7;
  int64_t threads = 1;

  // Data.
  int64_t height = 64;
  int64_t width = 64;
  DataSource data_source = DataSource::kSynthetic;
  std::filesystem::path manifest_path;
  int64_t dataset_size = 16;
  uint64_t dataset_seed = 1;
  double warp_magnitude = 0.2;
  PadMode pixel_pad = PadMode::kBorder;
  uint64_t perceptual_seed = 0x5eed;

  // Checkpointing and logging.
  std::filesystem::path checkpoint_path = "checkpoint.pt";
  int64_t checkpoint_interval = 500;
  std::filesystem::path resume_from;
  std::filesystem::path log_path;
  int64_t log_interval = 50;

  // Ablations.
  bool no_adv = false;       // drop the adversarial term and the unpaired step
  bool paired_adv = false;   // adversarial term on the paired output instead
  bool no_e2e_warp = false;  // theta trained by the warp loss only
  bool box_mask = false;     // agnostic mask is the bounding box of the body mask

  MaskSpec mask_spec() const;
  SyntheticOptions synthetic_options() const;

  /// Throws ContractViolation when a value is out of range or flags conflict.
  void validate() const;

  /// Every key, one per line, in a form parse_config accepts.
  std::string to_text() const;
};

/// Applies `key = value` lines on top of the defaults.
TrainConfig parse_config_text(const std::string& text);
TrainConfig load_config(const std::filesystem::path& path);

/// Sets one key from its textual value. Throws ContractViolation for unknown
/// keys or unparsable values.
void set_config_value(TrainConfig& config, const std::string& key, const std::string& value);

}  // namespace tryon
