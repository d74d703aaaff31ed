// Command-line front end: train, infer, eval-lpips, gen-data, warp-demo.

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <torch/torch.h>

#include "tryon/checkpoint.hpp"
#include "tryon/errors.hpp"
#include "tryon/image_io.hpp"
#include "tryon/manifest.hpp"
#include "tryon/lpips.hpp"
#include "tryon/report.hpp"
#include "tryon/synthetic.hpp"
#include "tryon/tps.hpp"
#include "tryon/trainer.hpp"

namespace fs = std::filesystem;
using namespace tryon;

namespace {

struct TrainArgs {
  std::string config;
  std::vector<std::string> overrides;
  bool no_adv = false;
  bool paired_adv = false;
  bool no_e2e_warp = false;
  bool box_mask = false;
  std::string report;
};

int run_train(const TrainArgs& args) {
  TrainConfig config = args.config.empty() ? TrainConfig{} : load_config(args.config);
  for (const auto& item : args.overrides) {
    const auto eq = item.find('=');
    require(eq != std::string::npos, "--set expects key=value");
    set_config_value(config, item.substr(0, eq), item.substr(eq + 1));
  }
  config.no_adv |= args.no_adv;
  config.paired_adv |= args.paired_adv;
  config.no_e2e_warp |= args.no_e2e_warp;
  config.box_mask |= args.box_mask;

  Trainer trainer(config);
  std::ofstream log;
  if (!config.log_path.empty()) {
    log.open(config.log_path);
    if (!log) throw IoError("cannot open log '" + config.log_path.string() + "'");
    log << "step,warp,l1,perceptual,adv,d_loss,gp,total\n";
  }
  auto opt = [](const std::optional<double>& v) { return v ? std::to_string(*v) : std::string(); };
  trainer.train([&](const IterationLog& it) {
    if (log.is_open()) {
      const auto& u = it.unpaired;
      log << it.step << "," << opt(it.paired.warp) << "," << opt(it.paired.l1) << "," << opt(it.paired.perceptual)
          << "," << opt(u ? u->adv : it.paired.adv) << "," << opt(u ? u->d_loss : it.paired.d_loss) << ","
          << opt(u ? u->gp : it.paired.gp) << "," << it.paired.total + (u ? u->total : 0.0) << "\n";
    }
    if (config.log_interval > 0 && it.step % config.log_interval == 0) {
      std::cout << format_iteration(it) << std::endl;
    }
  });
  std::cout << "checkpoint: " << config.checkpoint_path << " (step " << trainer.step() << ")\n";

  if (!args.report.empty()) {
    std::vector<ReportRow> rows;
    const int64_t n = std::min<int64_t>(4, trainer.dataset_size());
    for (int64_t i = 0; i < n; ++i) {
      const auto& t = trainer.item(i);
      auto out = trainer.model().infer(t.agnostic.unsqueeze(0), t.cloth.unsqueeze(0)).squeeze(0);
      rows.push_back({t.person, t.cloth, out});
    }
    emit_report(rows, args.report, trainer.model().extractor, LpipsWeights::ones(trainer.model().extractor));
    std::cout << "report: " << args.report << ".png/.json\n";
  }
  return kExitOk;
}

struct InferArgs {
  std::string checkpoint, person, mask, cloth, out;
  bool box_mask = false;
};

int run_infer(const InferArgs& args) {
  const auto header = read_checkpoint_header(args.checkpoint);
  TryOnModel model(header.config);
  load_checkpoint(args.checkpoint, model);
  auto person = read_png(args.person);
  auto cloth = read_png(args.cloth);
  auto region = read_mask_png(args.mask);
  require(person.sizes() == cloth.sizes(), "person and cloth resolutions differ");
  require(person.size(1) == header.config.height && person.size(2) == header.config.width,
          "input resolution differs from the checkpoint's");
  MaskSpec spec{args.box_mask ? MaskMode::kBoundingBox : MaskMode::kParsingLike, 0.0f};
  auto agnostic = make_agnostic(person, region, spec).agnostic;
  auto output = model.infer(agnostic.unsqueeze(0), cloth.unsqueeze(0)).squeeze(0);
  write_png(args.out, output);
  return kExitOk;
}

struct LpipsArgs {
  std::string dir_a, dir_b, out, extractor;
  uint64_t seed = 0x5eed;
};

int run_eval_lpips(const LpipsArgs& args) {
  PerceptualExtractor extractor(args.seed);
  if (!args.extractor.empty()) load_extractor(args.extractor, extractor);
  extractor->eval();
  const auto report = lpips_directory(args.dir_a, args.dir_b, extractor, LpipsWeights::ones(extractor));
  const auto json = report.to_json().dump(2);
  if (args.out.empty()) {
    std::cout << json << "\n";
  } else {
    std::ofstream out(args.out);
    if (!out) throw IoError("cannot write '" + args.out + "'");
    out << json << "\n";
  }
  std::cerr << "lpips: " << report.mean << " +- " << report.std << " over " << report.count << " pairs\n";
  for (const auto& e : report.errors) std::cerr << "error: " << e << "\n";
  return report.ok() ? kExitOk : kExitIoError;
}

struct GenArgs {
  std::string out;
  int64_t count = 16;
  uint64_t seed = 1;
  int64_t height = 64, width = 64;
  double warp_magnitude = 0.2;
  bool box_mask = false;
};

int run_gen_data(const GenArgs& args) {
  SyntheticOptions options;
  options.height = args.height;
  options.width = args.width;
  options.warp_magnitude = args.warp_magnitude;
  options.epoch_size = args.count;
  options.mask.mode = args.box_mask ? MaskMode::kBoundingBox : MaskMode::kParsingLike;
  const fs::path root = args.out;
  fs::create_directories(root);
  std::ofstream manifest(root / "manifest.csv");
  if (!manifest) throw IoError("cannot write manifest in '" + root.string() + "'");
  manifest << kManifestHeader << "\n";
  for (int64_t i = 0; i < args.count; ++i) {
    std::ostringstream name;
    name << std::setw(5) << std::setfill('0') << i;
    const auto stem = name.str();
    const auto t = sample_triplet(args.seed, i, options);
    write_png(root / "person" / (stem + ".png"), t.person);
    write_png(root / "cloth" / (stem + ".png"), t.cloth);
    write_png(root / "agnostic" / (stem + ".png"), t.agnostic);
    write_mask_png(root / "mask" / (stem + ".png"), t.mask);
    write_mask_png(root / "cloth_mask" / (stem + ".png"), t.cloth_mask);
    fs::create_directories(root / "theta");
    std::ofstream theta(root / "theta" / (stem + ".txt"));
    theta.precision(9);
    auto values = t.true_theta->contiguous();
    for (int64_t k = 0; k < kThetaSize; ++k) theta << values[k].item<float>() << (k + 1 < kThetaSize ? " " : "\n");
    manifest << "person/" << stem << ".png,cloth/" << stem << ".png,mask/" << stem << ".png,front,cloth_mask/"
             << stem << ".png\n";
  }
  std::cout << "wrote " << args.count << " triplets to " << root << "\n";
  return kExitOk;
}

struct WarpDemoArgs {
  std::string theta_file, out;
  int64_t height = 256, width = 192, cells = 8;
};

torch::Tensor read_theta_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open theta file '" + path.string() + "'");
  std::vector<float> values;
  float v = 0.0f;
  while (in >> v) values.push_back(v);
  if (!in.eof()) throw IoError("theta file '" + path.string() + "' contains a non-numeric token");
  require(values.size() == static_cast<size_t>(kThetaSize), "theta file must hold exactly 50 numbers");
  return torch::tensor(values);
}

int run_warp_demo(const WarpDemoArgs& args) {
  require(args.height >= 1 && args.width >= 1 && args.cells >= 1, "warp-demo: sizes must be positive");
  const TpsTheta theta(read_theta_file(args.theta_file));
  auto rows = torch::div(torch::arange(args.height).view({-1, 1}) * args.cells, args.height, "floor");
  auto cols = torch::div(torch::arange(args.width).view({1, -1}) * args.cells, args.width, "floor");
  auto board = ((rows + cols) % 2).to(torch::kFloat32) * 2.0 - 1.0;
  auto image = board.unsqueeze(0).expand({3, -1, -1}).unsqueeze(0).contiguous();
  auto warped = warp_image(theta, image, PadMode::kBorder).squeeze(0);
  write_png(args.out, warped);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Warping U-net virtual try-on: training, inference and evaluation"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train matcher, generator and discriminator");
  train->add_option("--config", train_args.config, "key = value configuration file");
  train->add_option("--set", train_args.overrides, "Override one config key (key=value), repeatable");
  train->add_flag("--no-adv", train_args.no_adv, "Ablation: no adversarial loss");
  train->add_flag("--paired-adv", train_args.paired_adv, "Ablation: adversarial loss on the paired output");
  train->add_flag("--no-e2e-warp", train_args.no_e2e_warp, "Ablation: matcher trained by the warp loss only");
  train->add_flag("--box-mask", train_args.box_mask, "Ablation: bounding-box agnostic masks");
  train->add_option("--report", train_args.report, "Write <stem>.png/.json with results on training items");

  InferArgs infer_args;
  auto* infer = app.add_subcommand("infer", "Dress a person in a cloth with a trained checkpoint");
  infer->add_option("--ckpt", infer_args.checkpoint, "Checkpoint file")->required();
  infer->add_option("--person", infer_args.person, "Person PNG")->required();
  infer->add_option("--mask", infer_args.mask, "Upper-body mask PNG")->required();
  infer->add_option("--cloth", infer_args.cloth, "In-shop cloth PNG")->required();
  infer->add_option("--out", infer_args.out, "Output PNG")->required();
  infer->add_flag("--box-mask", infer_args.box_mask, "Mask the bounding box of the mask");

  LpipsArgs lpips_args;
  auto* eval = app.add_subcommand("eval-lpips", "LPIPS between identically named PNGs of two directories");
  eval->add_option("--dir-a", lpips_args.dir_a)->required();
  eval->add_option("--dir-b", lpips_args.dir_b)->required();
  eval->add_option("--out", lpips_args.out, "JSON report path (stdout when omitted)");
  eval->add_option("--extractor", lpips_args.extractor, "Feature extractor weights file");
  eval->add_option("--extractor-seed", lpips_args.seed, "Seed of the default extractor");

  GenArgs gen_args;
  auto* gen = app.add_subcommand("gen-data", "Export a synthetic dataset with a manifest");
  gen->add_option("--out", gen_args.out)->required();
  gen->add_option("--count", gen_args.count)->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_args.seed);
  gen->add_option("--height", gen_args.height);
  gen->add_option("--width", gen_args.width);
  gen->add_option("--warp-magnitude", gen_args.warp_magnitude);
  gen->add_flag("--box-mask", gen_args.box_mask);

  WarpDemoArgs demo_args;
  auto* demo = app.add_subcommand("warp-demo", "Render a checkerboard warped by a TPS theta");
  demo->add_option("--theta-file", demo_args.theta_file, "50 whitespace-separated numbers")->required();
  demo->add_option("--out", demo_args.out)->required();
  demo->add_option("--height", demo_args.height);
  demo->add_option("--width", demo_args.width);
  demo->add_option("--cells", demo_args.cells);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitContractViolation;
  }

  try {
    if (*train) return run_train(train_args);
    if (*infer) return run_infer(infer_args);
    if (*eval) return run_eval_lpips(lpips_args);
    if (*gen) return run_gen_data(gen_args);
    if (*demo) return run_warp_demo(demo_args);
  } catch (const ContractViolation& e) {
    std::cerr << "contract violation: " << e.what() << "\n";
    return kExitContractViolation;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIoError;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIoError;
  } catch (const c10::Error& e) {
    std::cerr << "contract violation: " << e.what_without_backtrace() << "\n";
    return kExitContractViolation;
  }
  return kExitContractViolation;
}
