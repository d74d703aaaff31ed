#include "tryon/checkpoint.hpp"

#include <string>

#include "tryon/errors.hpp"

namespace tryon {
namespace {

using torch::serialize::InputArchive;
using torch::serialize::OutputArchive;

InputArchive open_archive(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("checkpoint not found: " + path.string());
  InputArchive archive;
  try {
    archive.load_from(path.string());
  } catch (const c10::Error& e) {
    throw IoError("unreadable checkpoint '" + path.string() + "': " + e.what_without_backtrace());
  }
  c10::IValue version;
  if (!archive.try_read("format_version", version) || !version.isInt()) {
    throw IoError("checkpoint '" + path.string() + "' has no format_version");
  }
  if (version.toInt() != kCheckpointVersion) {
    throw IoError("checkpoint '" + path.string() + "' has format version " + std::to_string(version.toInt()) +
                  ", expected " + std::to_string(kCheckpointVersion));
  }
  return archive;
}

template <typename Fn>
void read_section(InputArchive& archive, const char* name, const std::filesystem::path& path, Fn&& fn) {
  InputArchive section;
  if (!archive.try_read(name, section)) {
    throw IoError("checkpoint '" + path.string() + "' lacks section '" + name + "'");
  }
  try {
    fn(section);
  } catch (const c10::Error& e) {
    throw IoError("checkpoint '" + path.string() + "' section '" + name + "': " + e.what_without_backtrace());
  }
}

void write_atomically(OutputArchive& archive, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto temporary = path;
  temporary += ".tmp";
  try {
    archive.save_to(temporary.string());
  } catch (const c10::Error& e) {
    throw IoError("cannot write checkpoint '" + path.string() + "': " + e.what_without_backtrace());
  }
  std::filesystem::rename(temporary, path);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, TryOnModel& model, const TrainConfig& config,
                     int64_t step, OptimizerRefs optimizers) {
  OutputArchive archive;
  archive.write("format_version", c10::IValue(kCheckpointVersion));
  archive.write("step", c10::IValue(step));
  archive.write("config_snapshot", c10::IValue(config.to_text()));

  auto section = [&archive](const char* name, torch::nn::Module& module) {
    OutputArchive out;
    module.save(out);
    archive.write(name, out);
  };
  section("matcher", *model.matcher);
  section("generator", *model.generator);
  section("discriminator", *model.discriminator);
  section("perceptual_extractor", *model.extractor);

  OutputArchive optimizer_state;
  if (optimizers.generator) {
    OutputArchive out;
    optimizers.generator->save(out);
    optimizer_state.write("generator", out);
  }
  if (optimizers.discriminator) {
    OutputArchive out;
    optimizers.discriminator->save(out);
    optimizer_state.write("discriminator", out);
  }
  if (optimizers.rng) optimizer_state.write("rng", optimizers.rng->get_state());
  archive.write("optimizer_state", optimizer_state);
  write_atomically(archive, path);
}

LoadedCheckpoint read_checkpoint_header(const std::filesystem::path& path) {
  auto archive = open_archive(path);
  LoadedCheckpoint loaded;
  c10::IValue step;
  c10::IValue snapshot;
  if (!archive.try_read("step", step) || !archive.try_read("config_snapshot", snapshot) || !step.isInt() ||
      !snapshot.isString()) {
    throw IoError("checkpoint '" + path.string() + "' lacks step or config_snapshot");
  }
  loaded.step = step.toInt();
  loaded.config = parse_config_text(snapshot.toStringRef());
  return loaded;
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, TryOnModel& model, OptimizerRefs optimizers) {
  auto loaded = read_checkpoint_header(path);
  auto archive = open_archive(path);
  read_section(archive, "matcher", path, [&](InputArchive& in) { model.matcher->load(in); });
  read_section(archive, "generator", path, [&](InputArchive& in) { model.generator->load(in); });
  read_section(archive, "discriminator", path, [&](InputArchive& in) { model.discriminator->load(in); });
  read_section(archive, "perceptual_extractor", path, [&](InputArchive& in) { model.extractor->load(in); });
  for (auto& p : model.extractor->parameters()) p.set_requires_grad(false);
  read_section(archive, "optimizer_state", path, [&](InputArchive& state) {
    InputArchive section;
    if (optimizers.generator && state.try_read("generator", section)) optimizers.generator->load(section);
    if (optimizers.discriminator && state.try_read("discriminator", section)) optimizers.discriminator->load(section);
    torch::Tensor rng;
    if (optimizers.rng && state.try_read("rng", rng)) optimizers.rng->set_state(rng);
  });
  return loaded;
}

void save_extractor(const std::filesystem::path& path, PerceptualExtractor& extractor) {
  OutputArchive archive;
  archive.write("format_version", c10::IValue(kCheckpointVersion));
  OutputArchive section;
  extractor->save(section);
  archive.write("perceptual_extractor", section);
  write_atomically(archive, path);
}

void load_extractor(const std::filesystem::path& path, PerceptualExtractor& extractor) {
  auto archive = open_archive(path);
  read_section(archive, "perceptual_extractor", path, [&](InputArchive& in) { extractor->load(in); });
  for (auto& p : extractor->parameters()) p.set_requires_grad(false);
}

}  // namespace tryon
