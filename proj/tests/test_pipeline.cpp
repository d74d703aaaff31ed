#include "doctest_torch.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>

#include "test_util.hpp"
#include "tryon/checkpoint.hpp"
#include "tryon/errors.hpp"
#include "tryon/image_io.hpp"
#include "tryon/manifest.hpp"
#include "tryon/report.hpp"
#include "tryon/trainer.hpp"

namespace tryon {
std::ostream& operator<<(std::ostream& out, UpdateKind kind) { return out << static_cast<char>(kind); }
}  // namespace tryon

using namespace tryon;
namespace fs = std::filesystem;

namespace {

TrainConfig small_config() {
  TrainConfig config;
  config.batch_size = 2;
  config.dataset_size = 4;
  config.iterations = 3;
  config.checkpoint_interval = 0;
  config.checkpoint_path.clear();
  return config;
}

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("tryon_pipeline_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

double grad_norm(const std::vector<torch::Tensor>& params) {
  double total = 0.0;
  for (const auto& p : params) {
    if (p.grad().defined()) total += p.grad().square().sum().item<double>();
  }
  return std::sqrt(total);
}

void zero_grads(TryOnModel& m) {
  m.matcher->zero_grad();
  m.generator->zero_grad();
  m.discriminator->zero_grad();
}

bool same_parameters(torch::nn::Module& a, torch::nn::Module& b) {
  auto pa = a.named_parameters();
  auto pb = b.named_parameters();
  if (pa.size() != pb.size()) return false;
  for (const auto& item : pa) {
    if (!torch::equal(item.value(), pb[item.key()])) return false;
  }
  auto ba = a.named_buffers();
  auto bb = b.named_buffers();
  for (const auto& item : ba) {
    if (!torch::equal(item.value(), bb[item.key()])) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("config defaults") {
  TrainConfig config;
  CHECK(config.beta1 == 0.5);
  CHECK(config.beta2 == 0.999);
  CHECK(config.batch_size == 8);
  CHECK(config.learning_rate == 1e-3);
  CHECK(config.weights.warp == 1.0);
  CHECK(config.weights.perceptual == 1.0);
  CHECK(config.weights.l1 == 1.0);
  CHECK(config.weights.adv == 1.0);
  CHECK_NOTHROW(config.validate());
}

TEST_CASE("config text round trip and errors") {
  TrainConfig config;
  config.learning_rate = 2.5e-4;
  config.seed = 123;
  config.no_e2e_warp = true;
  config.adv_variant = RelativisticVariant::kAverage;
  config.pixel_pad = PadMode::kZeros;
  config.manifest_path = "data/manifest.csv";
  auto parsed = parse_config_text(config.to_text());
  CHECK(parsed.to_text() == config.to_text());
  CHECK(parsed.learning_rate == 2.5e-4);

  auto custom = parse_config_text("# comment\n\n  batch_size = 4 \nbox_mask=true\n");
  CHECK(custom.batch_size == 4);
  CHECK(custom.box_mask);
  CHECK(custom.mask_spec().mode == MaskMode::kBoundingBox);

  CHECK_THROWS_AS(parse_config_text("nonsense = 1\n"), ContractViolation);
  CHECK_THROWS_AS(parse_config_text("batch_size = four\n"), ContractViolation);
  CHECK_THROWS_AS(parse_config_text("batch_size\n"), ContractViolation);
  CHECK_THROWS_AS(parse_config_text("no_adv = maybe\n"), ContractViolation);
  CHECK_THROWS_AS(load_config("/nonexistent/config.cfg"), IoError);

  auto dir = fresh_dir("config");
  std::ofstream(dir / "c.cfg") << "iterations = 17\n";
  CHECK(load_config(dir / "c.cfg").iterations == 17);
  fs::remove_all(dir);
}

TEST_CASE("config validation") {
  auto invalid = [](auto mutate) {
    TrainConfig config;
    mutate(config);
    return config;
  };
  CHECK_THROWS_AS(invalid([](TrainConfig& c) { c.batch_size = 1; }).validate(), ContractViolation);
  CHECK_THROWS_AS(invalid([](TrainConfig& c) { c.height = 48; }).validate(), ContractViolation);
  CHECK_THROWS_AS(invalid([](TrainConfig& c) { c.no_adv = c.paired_adv = true; }).validate(), ContractViolation);
  CHECK_THROWS_AS(invalid([](TrainConfig& c) { c.warp_magnitude = 0.5; }).validate(), ContractViolation);
  CHECK_THROWS_AS(invalid([](TrainConfig& c) { c.weights.l1 = -1; }).validate(), ContractViolation);
  CHECK_THROWS_AS(invalid([](TrainConfig& c) { c.data_source = DataSource::kManifest; }).validate(),
                  ContractViolation);
  CHECK_THROWS_AS(Trainer(invalid([](TrainConfig& c) { c.batch_size = 0; })), ContractViolation);
}

TEST_CASE("batches walk seeded epoch permutations") {
  auto config = small_config();
  config.dataset_size = 6;
  config.batch_size = 4;
  Trainer trainer(config);
  std::vector<int64_t> seen;
  for (int64_t step = 0; step < 3; ++step) {
    auto idx = trainer.batch_indices(step);
    CHECK(idx.size() == 4);
    seen.insert(seen.end(), idx.begin(), idx.end());
  }
  for (int epoch = 0; epoch < 2; ++epoch) {
    std::vector<int64_t> block(seen.begin() + epoch * 6, seen.begin() + epoch * 6 + 6);
    std::sort(block.begin(), block.end());
    CHECK(block == std::vector<int64_t>{0, 1, 2, 3, 4, 5});
  }
  Trainer again(config);
  CHECK(again.batch_indices(2) == trainer.batch_indices(2));
}

TEST_CASE("paired step: itemized losses sum to the total") {
  Trainer trainer(small_config());
  auto batch = trainer.make_batch({0, 1});
  auto breakdown = trainer.train_step_paired(batch);
  REQUIRE(breakdown.warp);
  REQUIRE(breakdown.l1);
  REQUIRE(breakdown.perceptual);
  CHECK(!breakdown.adv);
  CHECK(!breakdown.d_loss);
  CHECK(breakdown.total == doctest::Approx(*breakdown.warp + *breakdown.l1 + *breakdown.perceptual).epsilon(1e-6));
  CHECK(trainer.update_log() == std::vector<UpdateKind>{UpdateKind::kGenerator});
}

TEST_CASE("unpaired step: one discriminator update, then one generator update") {
  Trainer trainer(small_config());
  auto batch = trainer.make_batch({2, 3});
  auto breakdown = trainer.train_step_unpaired(batch);
  CHECK(trainer.update_log() == std::vector<UpdateKind>{UpdateKind::kDiscriminator, UpdateKind::kGenerator});
  CHECK(breakdown.adv);
  CHECK(breakdown.d_loss);
  CHECK(breakdown.gp);
  CHECK(!breakdown.warp);
  CHECK(!breakdown.l1);
  CHECK(!breakdown.perceptual);
  CHECK(breakdown.total == doctest::Approx(*breakdown.adv));

  trainer.run_iteration();
  const auto& log = trainer.update_log();
  REQUIRE(log.size() == 5);
  CHECK(log[2] == UpdateKind::kGenerator);
  CHECK(log[3] == UpdateKind::kDiscriminator);
  CHECK(log[4] == UpdateKind::kGenerator);
}

TEST_CASE("every trainable group receives gradient from the paired loss") {
  Trainer trainer(small_config());
  auto& m = trainer.model();
  auto batch = trainer.make_batch({0, 1});
  // The regression head starts at zero, which blocks gradient to everything
  // upstream of it until the first update.
  trainer.train_step_paired(batch);
  zero_grads(m);
  trainer.paired_forward(batch).total.backward();
  CHECK(grad_norm(m.matcher->cloth_extractor()->parameters()) > 0.0);
  CHECK(grad_norm(m.matcher->person_extractor()->parameters()) > 0.0);
  CHECK(grad_norm(m.matcher->regressor()->parameters()) > 0.0);
  CHECK(grad_norm(m.generator->cloth_encoder()->parameters()) > 0.0);
  CHECK(grad_norm(m.generator->person_encoder()->parameters()) > 0.0);
  CHECK(grad_norm(m.generator->decoder()->parameters()) > 0.0);
  for (auto& p : m.extractor->parameters()) CHECK(!p.grad().defined());
}

TEST_CASE("the adversarial loss reaches the theta regressor") {
  Trainer trainer(small_config());
  auto& m = trainer.model();
  auto batch = trainer.make_batch({0, 1});
  zero_grads(m);
  trainer.unpaired_generator_loss(batch).backward();
  CHECK(m.matcher->regressor()->head()->weight.grad().norm().item<double>() > 0.0);
  trainer.run_iteration();
  zero_grads(m);
  trainer.unpaired_generator_loss(batch).backward();
  CHECK(grad_norm(m.matcher->regressor()->parameters()) > 0.0);
  CHECK(grad_norm(m.matcher->cloth_extractor()->parameters()) > 0.0);
}

TEST_CASE("no-e2e-warp leaves theta to the warp loss alone") {
  auto config = small_config();
  config.no_e2e_warp = true;
  Trainer trainer(config);
  auto& m = trainer.model();
  auto batch = trainer.make_batch({0, 1});
  trainer.train_step_paired(batch);

  zero_grads(m);
  auto forward = trainer.paired_forward(batch);
  (forward.parts.l1 + forward.parts.perceptual).backward();
  CHECK(grad_norm(m.matcher->parameters()) == 0.0);
  CHECK(grad_norm(m.generator->parameters()) > 0.0);

  zero_grads(m);
  trainer.paired_forward(batch).parts.warp.backward();
  CHECK(grad_norm(m.matcher->parameters()) > 0.0);

  // With end-to-end training the image losses do reach the matcher.
  Trainer e2e(small_config());
  e2e.train_step_paired(batch);
  zero_grads(e2e.model());
  auto f2 = e2e.paired_forward(batch);
  (f2.parts.l1 + f2.parts.perceptual).backward();
  CHECK(grad_norm(e2e.model().matcher->parameters()) > 0.0);
}

TEST_CASE("ablation flags change only their own terms") {
  auto run = [](auto mutate) {
    auto config = small_config();
    mutate(config);
    Trainer trainer(config);
    return trainer.run_iteration();
  };
  auto base = run([](TrainConfig&) {});
  auto no_adv = run([](TrainConfig& c) { c.no_adv = true; });
  auto paired_adv = run([](TrainConfig& c) { c.paired_adv = true; });
  auto no_e2e = run([](TrainConfig& c) { c.no_e2e_warp = true; });

  REQUIRE(base.unpaired);
  CHECK(base.unpaired->adv);
  // The paired step runs first, so its terms are identical across flags.
  for (const auto* other : {&no_adv, &no_e2e}) {
    CHECK(*other->paired.warp == *base.paired.warp);
    CHECK(*other->paired.l1 == *base.paired.l1);
    CHECK(*other->paired.perceptual == *base.paired.perceptual);
    CHECK(!other->paired.adv);
  }
  CHECK(!no_adv.unpaired);
  CHECK(no_e2e.unpaired);

  CHECK(!paired_adv.unpaired);
  REQUIRE(paired_adv.paired.adv);
  CHECK(paired_adv.paired.d_loss);
  CHECK(*paired_adv.paired.warp == *base.paired.warp);
  CHECK(paired_adv.paired.total == doctest::Approx(*paired_adv.paired.warp + *paired_adv.paired.l1 +
                                                   *paired_adv.paired.perceptual + *paired_adv.paired.adv)
                                       .epsilon(1e-6));
}

TEST_CASE("box-mask ablation changes only the agnostic masking") {
  auto config = small_config();
  Trainer parsing(config);
  config.box_mask = true;
  Trainer box(config);
  for (int64_t i = 0; i < 2; ++i) {
    const auto& a = parsing.item(i);
    const auto& b = box.item(i);
    CHECK(torch::equal(a.person, b.person));
    CHECK(torch::equal(a.cloth, b.cloth));
    CHECK(torch::equal(a.worn_cloth, b.worn_cloth));
    CHECK(b.mask.sum().item<float>() > a.mask.sum().item<float>());
    CHECK(!torch::equal(a.agnostic, b.agnostic));
    CHECK(check_triplet(b, config.mask_spec()).empty());
  }
}

TEST_CASE("same seed gives the same loss curve") {
  Trainer a(small_config());
  Trainer b(small_config());
  for (int step = 0; step < 3; ++step) {
    auto la = a.run_iteration();
    auto lb = b.run_iteration();
    CHECK(la.paired.total == lb.paired.total);
    CHECK(la.unpaired->total == lb.unpaired->total);
    CHECK(*la.unpaired->d_loss == *lb.unpaired->d_loss);
  }
  auto config = small_config();
  config.seed = 8;
  Trainer c(config);
  Trainer d(small_config());
  CHECK(c.run_iteration().paired.total != d.run_iteration().paired.total);
}

TEST_CASE("checkpoint round trip is bit-exact") {
  auto dir = fresh_dir("checkpoint");
  Trainer trainer(small_config());
  trainer.run_iteration();
  trainer.run_iteration();
  trainer.save(dir / "ck.pt");
  CHECK(!fs::exists(dir / "ck.pt.tmp"));

  const auto header = read_checkpoint_header(dir / "ck.pt");
  CHECK(header.step == 2);
  CHECK(header.config.to_text() == trainer.config().to_text());
  CHECK(header.config.weights.adv == 1.0);

  Trainer restored(small_config());
  restored.resume(dir / "ck.pt");
  CHECK(restored.step() == 2);
  auto& a = trainer.model();
  auto& b = restored.model();
  CHECK(same_parameters(*a.matcher, *b.matcher));
  CHECK(same_parameters(*a.generator, *b.generator));
  CHECK(same_parameters(*a.discriminator, *b.discriminator));
  CHECK(same_parameters(*a.extractor, *b.extractor));

  const auto& t = trainer.item(0);
  auto out_a = a.infer(t.agnostic.unsqueeze(0), t.cloth.unsqueeze(0));
  auto out_b = b.infer(t.agnostic.unsqueeze(0), t.cloth.unsqueeze(0));
  CHECK(torch::equal(out_a, out_b));
  fs::remove_all(dir);
}

TEST_CASE("resuming continues the run exactly") {
  auto dir = fresh_dir("resume");
  auto config = small_config();
  config.iterations = 4;
  Trainer straight(config);
  auto full = straight.train();

  config.iterations = 2;
  config.checkpoint_path = dir / "ck.pt";
  Trainer first(config);
  first.train();
  config.iterations = 4;
  config.resume_from = dir / "ck.pt";
  Trainer second(config);
  CHECK(second.step() == 2);
  auto rest = second.train();
  REQUIRE(rest.size() == 2);
  CHECK(rest[0].step == 2);
  CHECK(rest[1].step == 3);
  CHECK(rest[1].paired.total == full[3].paired.total);
  CHECK(rest[1].unpaired->total == full[3].unpaired->total);
  fs::remove_all(dir);
}

TEST_CASE("unreadable or foreign checkpoints are rejected") {
  auto dir = fresh_dir("bad_checkpoint");
  CHECK_THROWS_AS(read_checkpoint_header(dir / "missing.pt"), IoError);
  std::ofstream(dir / "junk.pt") << "junk";
  CHECK_THROWS_AS(read_checkpoint_header(dir / "junk.pt"), IoError);

  torch::serialize::OutputArchive archive;
  archive.write("format_version", c10::IValue(int64_t{2}));
  archive.save_to((dir / "v2.pt").string());
  CHECK_THROWS_AS(read_checkpoint_header(dir / "v2.pt"), IoError);
  fs::remove_all(dir);
}

TEST_CASE("divergence names the term and keeps the last checkpoint") {
  auto dir = fresh_dir("divergence");
  auto config = small_config();
  config.checkpoint_path = dir / "ck.pt";
  Trainer trainer(config);
  trainer.run_iteration();
  trainer.save(config.checkpoint_path);
  const auto before = fs::file_size(config.checkpoint_path);

  auto batch = trainer.make_batch({0, 1});
  batch.person = batch.person.clone();
  batch.person[0][0][0][0] = std::numeric_limits<float>::quiet_NaN();
  try {
    trainer.train_step_paired(batch);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK((e.term() == "l1" || e.term() == "perceptual"));
  }
  CHECK(fs::file_size(config.checkpoint_path) == before);
  CHECK(read_checkpoint_header(config.checkpoint_path).step == 1);
  fs::remove_all(dir);
}

TEST_CASE("inference is deterministic and shape preserving") {
  Trainer trainer(small_config());
  trainer.run_iteration();
  const auto& t = trainer.item(1);
  auto& m = trainer.model();
  auto a = m.infer(t.agnostic.unsqueeze(0), t.cloth.unsqueeze(0));
  auto b = m.infer(t.agnostic.unsqueeze(0), t.cloth.unsqueeze(0));
  CHECK(torch::equal(a, b));
  CHECK(a.sizes() == torch::IntArrayRef({1, 3, 64, 64}));
  CHECK_THROWS_AS(m.infer(torch::zeros({1, 3, 60, 64}), torch::zeros({1, 3, 60, 64})), ContractViolation);
  CHECK(m.matcher->is_training());
}

TEST_CASE("training from a manifest") {
  auto dir = fresh_dir("manifest_train");
  std::ofstream manifest(dir / "manifest.csv");
  manifest << kManifestHeader << "\n";
  for (int i = 0; i < 3; ++i) {
    auto t = sample_triplet(6, i);
    const auto stem = "item" + std::to_string(i);
    write_png(dir / (stem + "_p.png"), t.person);
    write_png(dir / (stem + "_c.png"), t.cloth);
    write_mask_png(dir / (stem + "_m.png"), t.mask);
    write_mask_png(dir / (stem + "_cm.png"), t.cloth_mask);
    manifest << stem << "_p.png," << stem << "_c.png," << stem << "_m.png,front," << stem << "_cm.png\n";
  }
  manifest.close();
  auto config = small_config();
  config.data_source = DataSource::kManifest;
  config.manifest_path = dir / "manifest.csv";
  config.iterations = 2;
  Trainer trainer(config);
  CHECK(trainer.dataset_size() == 3);
  CHECK(!trainer.item(0).true_theta);
  auto history = trainer.train();
  CHECK(history.size() == 2);
  CHECK(std::isfinite(history.back().paired.total));
  fs::remove_all(dir);
}

TEST_CASE("extractor weights file round trip") {
  auto dir = fresh_dir("extractor");
  PerceptualExtractor a(11), b(12);
  save_extractor(dir / "phi.pt", a);
  load_extractor(dir / "phi.pt", b);
  CHECK(same_parameters(*a, *b));
  for (auto& p : b->parameters()) CHECK(!p.requires_grad());
  fs::remove_all(dir);
}

TEST_CASE("report grids and metrics") {
  auto row = [](int64_t i) {
    auto t = sample_triplet(3, i);
    return ReportRow{t.person, t.cloth, t.agnostic};
  };
  CHECK(tile_report({row(0)}).sizes() == torch::IntArrayRef({3, 64, 192}));
  auto grid = tile_report({row(0), row(1), row(2)});
  CHECK(grid.sizes() == torch::IntArrayRef({3, 192, 192}));
  CHECK(torch::equal(grid.slice(1, 64, 128).slice(2, 64, 128), row(1).cloth));
  CHECK_THROWS_AS(tile_report({}), ContractViolation);
  auto odd = row(1);
  odd.output = torch::zeros({3, 32, 64});
  CHECK_THROWS_AS(tile_report({row(0), odd}), ContractViolation);

  PerceptualExtractor extractor;
  auto dir = fresh_dir("report");
  emit_report({row(0), row(1)}, dir / "grid", extractor, LpipsWeights::ones(extractor));
  CHECK(read_png(dir / "grid.png").sizes() == torch::IntArrayRef({3, 128, 192}));
  std::ifstream in(dir / "grid.json");
  auto json = nlohmann::json::parse(in);
  CHECK(json["rows"].size() == 2);
  CHECK(json.contains("mean_lpips"));
  CHECK(json.contains("mean_l1"));
  fs::remove_all(dir);
}
