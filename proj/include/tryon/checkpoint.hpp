#pragma once

// Unified checkpoint: a torch serialization archive holding
//
//   format_version      int
//   step                int
//   config_snapshot     string (TrainConfig::to_text)
//   matcher, generator, discriminator, perceptual_extractor   module sections
//   optimizer_state     { generator, discriminator, rng }
//
// The perceptual extractor weights file uses the same layout with only
// format_version and perceptual_extractor present.

#include <cstdint>
#include <filesystem>
#include <optional>

#include <torch/torch.h>

#include "tryon/config.hpp"
#include "tryon/model.hpp"

namespace tryon {

inline constexpr int64_t kCheckpointVersion = 1;

struct OptimizerRefs {
  torch::optim::Optimizer* generator = nullptr;
  torch::optim::Optimizer* discriminator = nullptr;
  at::Generator* rng = nullptr;  // the trainer's sampling generator
};

void save_checkpoint(const std::filesystem::path& path, TryOnModel& model, const TrainConfig& config,
                     int64_t step, OptimizerRefs optimizers = {});

struct LoadedCheckpoint {
  TrainConfig config;
  int64_t step = 0;
};

/// Reads only the header: version, step, config. Throws IoError on an
/// unreadable file or version mismatch.
LoadedCheckpoint read_checkpoint_header(const std::filesystem::path& path);

/// Restores module weights (and optimizer state when given) into an
/// already-constructed model whose shape matches the stored config.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, TryOnModel& model,
                                 OptimizerRefs optimizers = {});

void save_extractor(const std::filesystem::path& path, PerceptualExtractor& extractor);
void load_extractor(const std::filesystem::path& path, PerceptualExtractor& extractor);

}  // namespace tryon
