#include "tryon/trainer.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "tryon/errors.hpp"
#include "tryon/manifest.hpp"

namespace tryon {
namespace {

MatcherOptions matcher_options() { return {}; }

void check_finite(const torch::Tensor& value, const char* term) {
  if (!torch::isfinite(value.detach()).all().item<bool>()) {
    throw DivergenceError(term, std::string("loss term '") + term + "' is not finite");
  }
}

std::optional<double> value_of(const torch::Tensor& t) {
  if (!t.defined()) return std::nullopt;
  return t.item<double>();
}

}  // namespace

TryOnModel::TryOnModel(const TrainConfig& config) {
  matcher = GeometricMatcher(config.height, config.width, matcher_options());
  generator = WarpingUNet(GeneratorOptions{});
  discriminator = Discriminator(DiscriminatorOptions{});
  extractor = PerceptualExtractor(config.perceptual_seed);
}

void TryOnModel::set_training(bool training) {
  matcher->train(training);
  generator->train(training);
  discriminator->train(training);
  extractor->eval();
}

TpsTheta TryOnModel::predict_theta(const torch::Tensor& agnostic, const torch::Tensor& cloth) {
  torch::NoGradGuard no_grad;
  const bool was_training = matcher->is_training();
  matcher->eval();
  auto theta = matcher->forward(cloth, agnostic);
  matcher->train(was_training);
  return theta;
}

torch::Tensor TryOnModel::infer(const torch::Tensor& agnostic, const torch::Tensor& cloth) {
  require(agnostic.dim() == 4 && agnostic.sizes() == cloth.sizes(), "infer: expects matching [B,3,H,W] inputs");
  require_divisible(agnostic, 5, "infer");
  torch::NoGradGuard no_grad;
  const bool matcher_training = matcher->is_training();
  const bool generator_training = generator->is_training();
  matcher->eval();
  generator->eval();
  auto theta = matcher->forward(cloth, agnostic);
  auto output = generator->forward(agnostic, cloth, theta);
  matcher->train(matcher_training);
  generator->train(generator_training);
  return output;
}

Batch Batch::from(const std::vector<TryOnTriplet>& triplets) {
  require(!triplets.empty(), "empty batch");
  return {stack_field(triplets, &TryOnTriplet::person), stack_field(triplets, &TryOnTriplet::cloth),
          stack_field(triplets, &TryOnTriplet::worn_cloth), stack_field(triplets, &TryOnTriplet::agnostic),
          stack_field(triplets, &TryOnTriplet::alt_cloth)};
}

Trainer::Trainer(TrainConfig config) : config_(std::move(config)) {
  config_.validate();
  rng_ = at::detail::createCPUGenerator(mix_seed(config_.seed, 0x6a7));
  torch::set_num_threads(static_cast<int>(config_.threads));
  torch::manual_seed(config_.seed);
  model_ = std::make_unique<TryOnModel>(config_);
  model_->set_training(true);

  std::vector<torch::Tensor> generator_params = model_->matcher->parameters();
  for (auto& p : model_->generator->parameters()) generator_params.push_back(p);
  const auto adam = torch::optim::AdamOptions(config_.learning_rate).betas({config_.beta1, config_.beta2});
  generator_optimizer_ = std::make_unique<torch::optim::Adam>(generator_params, adam);
  discriminator_optimizer_ = std::make_unique<torch::optim::Adam>(model_->discriminator->parameters(), adam);

  if (config_.data_source == DataSource::kSynthetic) {
    const auto options = config_.synthetic_options();
    const uint64_t seed = config_.dataset_seed;
    cache_.resize(static_cast<size_t>(config_.dataset_size));
    source_ = [options, seed](int64_t index) { return sample_triplet(seed, index, options); };
  } else {
    auto dataset = std::make_shared<ManifestDataset>(config_.manifest_path, config_.mask_spec());
    require(dataset->size() > 0, "manifest contains no front-view rows");
    cache_.resize(dataset->size());
    source_ = [dataset](int64_t index) { return dataset->get(static_cast<size_t>(index)); };
  }
  if (!config_.resume_from.empty()) resume(config_.resume_from);
}

int64_t Trainer::dataset_size() const { return static_cast<int64_t>(cache_.size()); }

const TryOnTriplet& Trainer::item(int64_t index) {
  auto& slot = cache_.at(static_cast<size_t>(index));
  if (!slot) {
    auto triplet = source_(index);
    require(triplet.person.size(1) == config_.height && triplet.person.size(2) == config_.width,
            "data resolution differs from the configured height/width");
    slot = std::move(triplet);
  }
  return *slot;
}

std::vector<int64_t> Trainer::batch_indices(int64_t step) const {
  const int64_t n = dataset_size();
  const int64_t b = config_.batch_size;
  std::vector<int64_t> indices;
  indices.reserve(static_cast<size_t>(b));
  // Each epoch is a seeded permutation; batches wrap across epochs.
  int64_t position = step * b;
  std::vector<int64_t> order;
  int64_t order_epoch = -1;
  while (static_cast<int64_t>(indices.size()) < b) {
    const int64_t epoch = position / n;
    if (epoch != order_epoch) {
      order.resize(static_cast<size_t>(n));
      std::iota(order.begin(), order.end(), 0);
      SplitMix64 rng(mix_seed(config_.seed, static_cast<uint64_t>(epoch)));
      for (int64_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(static_cast<uint64_t>(i + 1))]);
      order_epoch = epoch;
    }
    indices.push_back(order[static_cast<size_t>(position % n)]);
    ++position;
  }
  return indices;
}

Batch Trainer::make_batch(const std::vector<int64_t>& indices) {
  std::vector<TryOnTriplet> triplets;
  triplets.reserve(indices.size());
  for (int64_t i : indices) triplets.push_back(item(i));
  return Batch::from(triplets);
}

TpsTheta Trainer::theta_for_generator(const TpsTheta& theta) const {
  return config_.no_e2e_warp ? TpsTheta(theta.values().detach()) : theta;
}

PairedForward Trainer::paired_forward(const Batch& batch) {
  auto& m = *model_;
  auto theta = m.matcher->forward(batch.cloth, batch.agnostic);
  auto generated = m.generator->forward(batch.agnostic, batch.cloth, theta_for_generator(theta));
  LossParts parts;
  parts.warp = warp_loss(theta, batch.cloth, batch.worn_cloth, config_.pixel_pad);
  parts.l1 = pixel_l1(generated, batch.person);
  parts.perceptual = perceptual_loss(generated, batch.person, m.extractor);
  auto total = total_loss(parts, config_.weights);
  return {theta, generated, parts, total};
}

std::pair<double, double> Trainer::discriminator_step(const torch::Tensor& real, const torch::Tensor& fake) {
  auto& d = model_->discriminator;
  auto real_scores = d->forward(real);
  auto fake_scores = d->forward(fake.detach());
  auto adversarial = relativistic_d_loss(real_scores, fake_scores, config_.adv_variant);
  auto alpha = at::rand({real.size(0)}, rng_, real.options());
  auto penalty = gradient_penalty([&d](const torch::Tensor& x) { return d->forward(x); }, real, fake, alpha);
  auto loss = adversarial + config_.gp_weight * penalty;
  check_finite(loss, "d_loss");
  discriminator_optimizer_->zero_grad();
  loss.backward();
  discriminator_optimizer_->step();
  update_log_.push_back(UpdateKind::kDiscriminator);
  return {adversarial.item<double>(), penalty.item<double>()};
}

LossBreakdown Trainer::train_step_paired(const Batch& batch) {
  model_->set_training(true);
  auto forward = paired_forward(batch);
  LossBreakdown breakdown;
  if (config_.paired_adv) {
    const auto [d_loss, gp] = discriminator_step(batch.person, forward.generated);
    breakdown.d_loss = d_loss;
    breakdown.gp = gp;
    auto& d = model_->discriminator;
    forward.parts.adv =
        relativistic_g_loss(d->forward(batch.person), d->forward(forward.generated), config_.adv_variant);
    forward.total = total_loss(forward.parts, config_.weights);
  }
  generator_optimizer_->zero_grad();
  forward.total.backward();
  generator_optimizer_->step();
  update_log_.push_back(UpdateKind::kGenerator);

  breakdown.warp = value_of(forward.parts.warp);
  breakdown.l1 = value_of(forward.parts.l1);
  breakdown.perceptual = value_of(forward.parts.perceptual);
  breakdown.adv = value_of(forward.parts.adv);
  breakdown.total = forward.total.item<double>();
  return breakdown;
}

torch::Tensor Trainer::unpaired_generator_loss(const Batch& batch) {
  auto& m = *model_;
  auto theta = m.matcher->forward(batch.alt_cloth, batch.agnostic);
  auto fake = m.generator->forward(batch.agnostic, batch.alt_cloth, theta_for_generator(theta));
  return relativistic_g_loss(m.discriminator->forward(batch.person), m.discriminator->forward(fake),
                             config_.adv_variant);
}

LossBreakdown Trainer::train_step_unpaired(const Batch& batch) {
  model_->set_training(true);
  auto& m = *model_;
  auto theta = m.matcher->forward(batch.alt_cloth, batch.agnostic);
  auto fake = m.generator->forward(batch.agnostic, batch.alt_cloth, theta_for_generator(theta));

  LossBreakdown breakdown;
  const auto [d_loss, gp] = discriminator_step(batch.person, fake);
  breakdown.d_loss = d_loss;
  breakdown.gp = gp;

  auto adv = relativistic_g_loss(m.discriminator->forward(batch.person), m.discriminator->forward(fake),
                                 config_.adv_variant);
  LossParts parts;
  parts.adv = adv;
  auto total = total_loss(parts, config_.weights);
  generator_optimizer_->zero_grad();
  total.backward();
  generator_optimizer_->step();
  update_log_.push_back(UpdateKind::kGenerator);

  breakdown.adv = adv.item<double>();
  breakdown.total = total.item<double>();
  return breakdown;
}

IterationLog Trainer::run_iteration() {
  const auto batch = make_batch(batch_indices(step_));
  IterationLog log;
  log.step = step_;
  log.paired = train_step_paired(batch);
  if (!config_.no_adv && !config_.paired_adv) log.unpaired = train_step_unpaired(batch);
  ++step_;
  return log;
}

std::vector<IterationLog> Trainer::train(const std::function<void(const IterationLog&)>& on_iteration) {
  std::vector<IterationLog> history;
  while (step_ < config_.iterations) {
    history.push_back(run_iteration());
    if (on_iteration) on_iteration(history.back());
    if (config_.checkpoint_interval > 0 && step_ % config_.checkpoint_interval == 0) save(config_.checkpoint_path);
  }
  if (!config_.checkpoint_path.empty()) save(config_.checkpoint_path);
  return history;
}

void Trainer::save(const std::filesystem::path& path) {
  save_checkpoint(path, *model_, config_, step_,
                  {generator_optimizer_.get(), discriminator_optimizer_.get(), &rng_});
}

void Trainer::resume(const std::filesystem::path& path) {
  const auto header = read_checkpoint_header(path);
  require(header.config.height == config_.height && header.config.width == config_.width,
          "checkpoint resolution differs from the configuration");
  const auto loaded =
      load_checkpoint(path, *model_, {generator_optimizer_.get(), discriminator_optimizer_.get(), &rng_});
  step_ = loaded.step;
}

std::string format_iteration(const IterationLog& log) {
  std::ostringstream out;
  out.precision(5);
  out << "step " << log.step;
  auto field = [&out](const char* name, const std::optional<double>& v) {
    if (v) out << " " << name << "=" << *v;
  };
  field("warp", log.paired.warp);
  field("l1", log.paired.l1);
  field("perc", log.paired.perceptual);
  field("paired_adv", log.paired.adv);
  if (log.unpaired) {
    field("adv", log.unpaired->adv);
    field("d", log.unpaired->d_loss);
    field("gp", log.unpaired->gp);
  }
  return out.str();
}

}  // namespace tryon
