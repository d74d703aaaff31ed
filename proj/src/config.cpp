#include "tryon/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "tryon/errors.hpp"

namespace tryon {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
}

double to_double(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    const double parsed = std::stod(value, &used);
    if (used == value.size()) return parsed;
  } catch (const std::exception&) {
  }
  throw ContractViolation("config key '" + key + "': not a number: '" + value + "'");
}

int64_t to_int(const std::string& key, const std::string& value) {
  int64_t parsed = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), parsed);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ContractViolation("config key '" + key + "': not an integer: '" + value + "'");
  }
  return parsed;
}

uint64_t to_uint(const std::string& key, const std::string& value) {
  uint64_t parsed = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), parsed);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ContractViolation("config key '" + key + "': not an unsigned integer: '" + value + "'");
  }
  return parsed;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ContractViolation("config key '" + key + "': expected true/false, got '" + value + "'");
}

std::string format_double(double value) {
  std::ostringstream out;
  out.precision(17);
  out << value;
  return out.str();
}

using Setter = std::function<void(TrainConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"learning_rate", [](auto& c, auto& k, auto& v) { c.learning_rate = to_double(k, v); }},
      {"beta1", [](auto& c, auto& k, auto& v) { c.beta1 = to_double(k, v); }},
      {"beta2", [](auto& c, auto& k, auto& v) { c.beta2 = to_double(k, v); }},
      {"batch_size", [](auto& c, auto& k, auto& v) { c.batch_size = to_int(k, v); }},
      {"iterations", [](auto& c, auto& k, auto& v) { c.iterations = to_int(k, v); }},
      {"lambda_warp", [](auto& c, auto& k, auto& v) { c.weights.warp = to_double(k, v); }},
      {"lambda_perceptual", [](auto& c, auto& k, auto& v) { c.weights.perceptual = to_double(k, v); }},
      {"lambda_l1", [](auto& c, auto& k, auto& v) { c.weights.l1 = to_double(k, v); }},
      {"lambda_adv", [](auto& c, auto& k, auto& v) { c.weights.adv = to_double(k, v); }},
      {"gp_weight", [](auto& c, auto& k, auto& v) { c.gp_weight = to_double(k, v); }},
      {"adv_variant",
       [](auto& c, auto& k, auto& v) {
         if (v == "pairwise") c.adv_variant = RelativisticVariant::kPairwise;
         else if (v == "average") c.adv_variant = RelativisticVariant::kAverage;
         else throw ContractViolation("config key '" + k + "': expected pairwise|average");
       }},
      {"seed", [](auto& c, auto& k, auto& v) { c.seed = to_uint(k, v); }},
      {"threads", [](auto& c, auto& k, auto& v) { c.threads = to_int(k, v); }},
      {"height", [](auto& c, auto& k, auto& v) { c.height = to_int(k, v); }},
      {"width", [](auto& c, auto& k, auto& v) { c.width = to_int(k, v); }},
      {"data_source",
       [](auto& c, auto& k, auto& v) {
         if (v == "synthetic") c.data_source = DataSource::kSynthetic;
         else if (v == "manifest") c.data_source = DataSource::kManifest;
         else throw ContractViolation("config key '" + k + "': expected synthetic|manifest");
       }},
      {"manifest_path", [](auto& c, auto&, auto& v) { c.manifest_path = v; }},
      {"dataset_size", [](auto& c, auto& k, auto& v) { c.dataset_size = to_int(k, v); }},
      {"dataset_seed", [](auto& c, auto& k, auto& v) { c.dataset_seed = to_uint(k, v); }},
      {"warp_magnitude", [](auto& c, auto& k, auto& v) { c.warp_magnitude = to_double(k, v); }},
      {"pixel_pad",
       [](auto& c, auto& k, auto& v) {
         if (v == "border") c.pixel_pad = PadMode::kBorder;
         else if (v == "zeros") c.pixel_pad = PadMode::kZeros;
         else throw ContractViolation("config key '" + k + "': expected border|zeros");
       }},
      {"perceptual_seed", [](auto& c, auto& k, auto& v) { c.perceptual_seed = to_uint(k, v); }},
      {"checkpoint_path", [](auto& c, auto&, auto& v) { c.checkpoint_path = v; }},
      {"checkpoint_interval", [](auto& c, auto& k, auto& v) { c.checkpoint_interval = to_int(k, v); }},
      {"resume_from", [](auto& c, auto&, auto& v) { c.resume_from = v; }},
      {"log_path", [](auto& c, auto&, auto& v) { c.log_path = v; }},
      {"log_interval", [](auto& c, auto& k, auto& v) { c.log_interval = to_int(k, v); }},
      {"no_adv", [](auto& c, auto& k, auto& v) { c.no_adv = to_bool(k, v); }},
      {"paired_adv", [](auto& c, auto& k, auto& v) { c.paired_adv = to_bool(k, v); }},
      {"no_e2e_warp", [](auto& c, auto& k, auto& v) { c.no_e2e_warp = to_bool(k, v); }},
      {"box_mask", [](auto& c, auto& k, auto& v) { c.box_mask = to_bool(k, v); }},
  };
  return table;
}

}  // namespace

MaskSpec TrainConfig::mask_spec() const {
  return {box_mask ? MaskMode::kBoundingBox : MaskMode::kParsingLike, 0.0f};
}

SyntheticOptions TrainConfig::synthetic_options() const {
  SyntheticOptions options;
  options.height = height;
  options.width = width;
  options.warp_magnitude = warp_magnitude;
  options.epoch_size = dataset_size;
  options.mask = mask_spec();
  return options;
}

void TrainConfig::validate() const {
  require(learning_rate > 0.0, "learning_rate must be positive");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "Adam betas must lie in [0, 1)");
  require(batch_size >= 2, "batch_size must be >= 2 (batch normalization needs two samples)");
  require(iterations >= 0, "iterations must be >= 0");
  require(weights.warp >= 0 && weights.perceptual >= 0 && weights.l1 >= 0 && weights.adv >= 0,
          "loss weights must be nonnegative");
  require(gp_weight >= 0.0, "gp_weight must be nonnegative");
  require(threads >= 1, "threads must be >= 1");
  require(height > 0 && width > 0 && height % 32 == 0 && width % 32 == 0,
          "height and width must be positive multiples of 32");
  require(dataset_size >= 1, "dataset_size must be >= 1");
  require(warp_magnitude >= 0.0 && warp_magnitude <= kMaxWarpMagnitude, "warp_magnitude must lie in [0, 0.3]");
  require(checkpoint_interval >= 0 && log_interval >= 0, "intervals must be nonnegative");
  require(!(no_adv && paired_adv), "no_adv and paired_adv are mutually exclusive");
  require(data_source != DataSource::kManifest || !manifest_path.empty(),
          "data_source=manifest requires manifest_path");
}

std::string TrainConfig::to_text() const {
  std::ostringstream out;
  auto line = [&out](const char* key, const std::string& value) { out << key << " = " << value << "\n"; };
  auto flag = [](bool b) { return std::string(b ? "true" : "false"); };
  line("learning_rate", format_double(learning_rate));
  line("beta1", format_double(beta1));
  line("beta2", format_double(beta2));
  line("batch_size", std::to_string(batch_size));
  line("iterations", std::to_string(iterations));
  line("lambda_warp", format_double(weights.warp));
  line("lambda_perceptual", format_double(weights.perceptual));
  line("lambda_l1", format_double(weights.l1));
  line("lambda_adv", format_double(weights.adv));
  line("gp_weight", format_double(gp_weight));
  line("adv_variant", adv_variant == RelativisticVariant::kPairwise ? "pairwise" : "average");
  line("seed", std::to_string(seed));
  line("threads", std::to_string(threads));
  line("height", std::to_string(height));
  line("width", std::to_string(width));
  line("data_source", data_source == DataSource::kSynthetic ? "synthetic" : "manifest");
  line("manifest_path", manifest_path.string());
  line("dataset_size", std::to_string(dataset_size));
  line("dataset_seed", std::to_string(dataset_seed));
  line("warp_magnitude", format_double(warp_magnitude));
  line("pixel_pad", pixel_pad == PadMode::kBorder ? "border" : "zeros");
  line("perceptual_seed", std::to_string(perceptual_seed));
  line("checkpoint_path", checkpoint_path.string());
  line("checkpoint_interval", std::to_string(checkpoint_interval));
  line("resume_from", resume_from.string());
  line("log_path", log_path.string());
  line("log_interval", std::to_string(log_interval));
  line("no_adv", flag(no_adv));
  line("paired_adv", flag(paired_adv));
  line("no_e2e_warp", flag(no_e2e_warp));
  line("box_mask", flag(box_mask));
  return out.str();
}

void set_config_value(TrainConfig& config, const std::string& key, const std::string& value) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) throw ContractViolation("unknown config key '" + key + "'");
  it->second(config, key, value);
}

TrainConfig parse_config_text(const std::string& text) {
  TrainConfig config;
  std::istringstream in(text);
  std::string raw;
  size_t number = 0;
  while (std::getline(in, raw)) {
    ++number;
    const std::string line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ContractViolation("config line " + std::to_string(number) + ": expected key = value");
    }
    set_config_value(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return config;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

}  // namespace tryon
