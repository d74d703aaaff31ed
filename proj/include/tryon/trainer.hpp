#pragma once

// Training harness: alternates one paired step (warp, pixel and perceptual
// losses against the ground-truth person) with one unpaired step (the
// agnostic person dressed in a different cloth, supervised only by the
// relativistic adversarial loss). The matcher and generator share one Adam
// optimizer; the discriminator has its own.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "tryon/checkpoint.hpp"
#include "tryon/config.hpp"
#include "tryon/model.hpp"
#include "tryon/synthetic.hpp"

namespace tryon {

/// Loss values of one step. Terms a step does not compute stay empty.
struct LossBreakdown {
  std::optional<double> warp;
  std::optional<double> perceptual;
  std::optional<double> l1;
  std::optional<double> adv;     // generator-side relativistic loss
  std::optional<double> d_loss;  // discriminator relativistic loss
  std::optional<double> gp;      // gradient penalty (unweighted)
  double total = 0.0;            // weighted generator-side objective
};

/// Stacked [B, ...] tensors of a batch of triplets.
struct Batch {
  torch::Tensor person;
  torch::Tensor cloth;
  torch::Tensor worn_cloth;
  torch::Tensor agnostic;
  torch::Tensor alt_cloth;

  static Batch from(const std::vector<TryOnTriplet>& triplets);
};

/// Graph-attached paired losses (before any optimizer step).
struct PairedForward {
  TpsTheta theta;
  torch::Tensor generated;
  LossParts parts;
  torch::Tensor total;
};

enum class UpdateKind : char { kGenerator = 'G', kDiscriminator = 'D' };

struct IterationLog {
  int64_t step = 0;
  LossBreakdown paired;
  std::optional<LossBreakdown> unpaired;
};

class Trainer {
 public:
  explicit Trainer(TrainConfig config);

  const TrainConfig& config() const { return config_; }
  TryOnModel& model() { return *model_; }
  int64_t step() const { return step_; }
  int64_t dataset_size() const;
  const TryOnTriplet& item(int64_t index);

  /// Builds losses and graph without stepping. `generated` is p~_a.
  PairedForward paired_forward(const Batch& batch);
  /// Generator-side adversarial loss of the unpaired pass, graph attached.
  torch::Tensor unpaired_generator_loss(const Batch& batch);

  LossBreakdown train_step_paired(const Batch& batch);
  LossBreakdown train_step_unpaired(const Batch& batch);

  /// Indices of the batch used at iteration `step` (deterministic shuffling).
  std::vector<int64_t> batch_indices(int64_t step) const;
  Batch make_batch(const std::vector<int64_t>& indices);

  /// One paired step and, unless adversarial training is off or paired,
  /// one unpaired step on the same batch; advances the step counter.
  IterationLog run_iteration();

  /// Runs until `config().iterations`, checkpointing every
  /// `checkpoint_interval` steps and at the end. On divergence the last
  /// checkpoint on disk is left untouched and DivergenceError propagates.
  std::vector<IterationLog> train(const std::function<void(const IterationLog&)>& on_iteration = {});

  void save(const std::filesystem::path& path);
  /// Restores weights, optimizer state, RNG and the step counter.
  void resume(const std::filesystem::path& path);

  const std::vector<UpdateKind>& update_log() const { return update_log_; }

 private:
  TpsTheta theta_for_generator(const TpsTheta& theta) const;
  /// One discriminator update on (real, fake); returns (d_loss, gp).
  std::pair<double, double> discriminator_step(const torch::Tensor& real, const torch::Tensor& fake);

  TrainConfig config_;
  std::unique_ptr<TryOnModel> model_;
  std::unique_ptr<torch::optim::Adam> generator_optimizer_;
  std::unique_ptr<torch::optim::Adam> discriminator_optimizer_;
  at::Generator rng_;  // gradient-penalty interpolation weights
  std::vector<std::optional<TryOnTriplet>> cache_;
  std::function<TryOnTriplet(int64_t)> source_;
  int64_t step_ = 0;
  std::vector<UpdateKind> update_log_;
};

/// Human-readable one-line summary of an iteration.
std::string format_iteration(const IterationLog& log);

}  // namespace tryon
