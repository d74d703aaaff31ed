#include "doctest_torch.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>
#include <sys/wait.h>

#include "tryon/image_io.hpp"
#include "tryon/tps.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string command = std::string(TRYON_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("tryon_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_identity_theta(const fs::path& path, double dx) {
  std::ofstream out(path);
  auto values = tryon::TpsTheta::identity(1, torch::kFloat64).values().view(-1);
  for (int64_t k = 0; k < tryon::kThetaSize; ++k) out << values[k].item<double>() + (k % 2 == 0 ? dx : 0.0) << " ";
}

}  // namespace

TEST_CASE("cli: usage errors exit 1") {
  CHECK(run("") == 1);
  CHECK(run("bogus") == 1);
  CHECK(run("train --set nonsense=1") == 1);
  CHECK(run("train --set batch_size=1") == 1);
  CHECK(run("train --no-adv --paired-adv") == 1);
}

TEST_CASE("cli: missing files exit 2") {
  auto dir = fresh_dir("io");
  CHECK(run("train --config " + (dir / "absent.cfg").string()) == 2);
  CHECK(run("infer --ckpt " + (dir / "absent.pt").string() + " --person a.png --mask b.png --cloth c.png --out " +
            (dir / "o.png").string()) == 2);
  CHECK(run("eval-lpips --dir-a " + (dir / "x").string() + " --dir-b " + dir.string()) == 2);
  CHECK(run("warp-demo --theta-file " + (dir / "absent.txt").string() + " --out " + (dir / "o.png").string()) == 2);
  fs::remove_all(dir);
}

TEST_CASE("cli: gen-data, eval-lpips and warp-demo") {
  auto dir = fresh_dir("tools");
  REQUIRE(run("gen-data --out " + (dir / "data").string() + " --count 3 --seed 4") == 0);
  for (const char* sub : {"person", "cloth", "agnostic", "mask", "cloth_mask", "theta"}) {
    CHECK(fs::is_directory(dir / "data" / sub));
  }
  CHECK(fs::exists(dir / "data" / "manifest.csv"));
  CHECK(fs::exists(dir / "data" / "person" / "00002.png"));

  const auto person = (dir / "data" / "person").string();
  REQUIRE(run("eval-lpips --dir-a " + person + " --dir-b " + person + " --out " + (dir / "r.json").string()) == 0);
  std::ifstream in(dir / "r.json");
  auto report = nlohmann::json::parse(in);
  CHECK(report["count"] == 3);
  CHECK(report["mean"] == 0.0);
  CHECK(report["std"] == 0.0);

  fs::remove(dir / "data" / "agnostic" / "00001.png");
  CHECK(run("eval-lpips --dir-a " + person + " --dir-b " + (dir / "data" / "agnostic").string()) == 2);

  write_identity_theta(dir / "theta.txt", 0.0);
  REQUIRE(run("warp-demo --theta-file " + (dir / "theta.txt").string() + " --out " + (dir / "w.png").string()) == 0);
  auto board = tryon::read_png(dir / "w.png");
  CHECK(board.sizes() == torch::IntArrayRef({3, 256, 192}));
  CHECK(board.abs().min().item<float>() > 0.99f);
  std::ofstream(dir / "short.txt") << "1 2 3";
  CHECK(run("warp-demo --theta-file " + (dir / "short.txt").string() + " --out " + (dir / "w.png").string()) == 1);
  fs::remove_all(dir);
}

TEST_CASE("cli: train then infer") {
  auto dir = fresh_dir("train");
  std::ofstream(dir / "c.cfg") << "# tiny run\niterations = 2\nbatch_size = 2\ndataset_size = 2\n";
  const auto ckpt = (dir / "ck.pt").string();
  REQUIRE(run("train --config " + (dir / "c.cfg").string() + " --set checkpoint_path=" + ckpt +
              " --set log_path=" + (dir / "log.csv").string() + " --report " + (dir / "rep").string()) == 0);
  CHECK(fs::exists(ckpt));
  CHECK(fs::exists(dir / "rep.png"));
  CHECK(fs::exists(dir / "rep.json"));
  std::ifstream log(dir / "log.csv");
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) ++lines;
  CHECK(lines == 3);

  REQUIRE(run("gen-data --out " + (dir / "data").string() + " --count 1 --seed 9") == 0);
  const auto data = dir / "data";
  const std::string io = " --person " + (data / "person" / "00000.png").string() + " --mask " +
                         (data / "mask" / "00000.png").string() + " --cloth " +
                         (data / "cloth" / "00000.png").string();
  REQUIRE(run("infer --ckpt " + ckpt + io + " --out " + (dir / "a.png").string()) == 0);
  REQUIRE(run("infer --ckpt " + ckpt + io + " --out " + (dir / "b.png").string()) == 0);
  auto a = tryon::read_png(dir / "a.png");
  CHECK(a.sizes() == torch::IntArrayRef({3, 64, 64}));
  CHECK(torch::equal(a, tryon::read_png(dir / "b.png")));

  tryon::write_png(dir / "wide.png", torch::zeros({3, 64, 96}));
  CHECK(run("infer --ckpt " + ckpt + " --person " + (dir / "wide.png").string() + " --mask " +
            (data / "mask" / "00000.png").string() + " --cloth " + (dir / "wide.png").string() + " --out " +
            (dir / "c.png").string()) == 1);
  fs::remove_all(dir);
}
