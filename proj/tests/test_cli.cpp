#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "salgate/checkpoint.hpp"
#include "salgate/cli.hpp"
#include "salgate/image_io.hpp"

using namespace salgate;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), {});
}

void write_file(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

/// Concatenated relative paths and contents of every regular file below `dir`.
std::string tree_digest(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::string out;
  for (const auto& f : files) out += fs::relative(f, dir).string() + "\n" + read_file(f);
  return out;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    static int counter = 0;
    dir_ = fs::temp_directory_path() / ("salgate_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(dir_);
    write_file(dir_ / "cfg.json", R"({
      "detector": {"input_size": 64, "widths": [8, 8, 16, 16, 16]},
      "saliency": {"input_size": 64, "base_channels": 4},
      "data": {"canvas": 64},
      "train": {"epochs": 2, "batch_size": 4}
    })");
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(const std::string& args) const {
    const std::string cmd = std::string(SALGATE_BIN) + " -c " + (dir_ / "cfg.json").string() + " " + args +
                            " >/dev/null 2>" + (dir_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  fs::path gen(int n, int seed = 3) const {
    EXPECT_EQ(run("gen -n " + std::to_string(n) + " --seed " + std::to_string(seed) + " -o " + (dir_ / "data").string()), 0);
    return dir_ / "data" / "manifest.jsonl";
  }

  fs::path p(const std::string& name) const { return dir_ / name; }

  fs::path dir_;
};

size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  size_t n = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++n;
  return n;
}

}  // namespace

TEST_F(CliTest, GenWritesManifestAndIsDeterministic) {
  const auto m = gen(10);
  EXPECT_EQ(load_dataset(m).size(), 10u);
  const std::string first = tree_digest(p("data"));
  fs::remove_all(p("data"));
  gen(10);
  EXPECT_EQ(tree_digest(p("data")), first);
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(run("gen -n 0 -o " + p("x").string()), 2);
  EXPECT_EQ(run("train detector -m nothing.jsonl -o x.ckpt"), 2);  // --seed is mandatory
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("--help"), 0);
}

TEST_F(CliTest, RuntimeErrorsExitOne) {
  EXPECT_EQ(run("eval -p " + p("missing.jsonl").string() + " -m " + p("missing2.jsonl").string()), 1);
}

TEST_F(CliTest, TrainHybridLogsEveryEpoch) {
  const auto m = gen(6);
  ASSERT_EQ(run("train hybrid -m " + m.string() + " -o " + p("h.ckpt").string() + " --seed 1 --epochs 5 --loss-log " +
                p("loss.csv").string()),
            0);
  EXPECT_TRUE(fs::exists(p("h.ckpt")));
  std::ifstream in(p("loss.csv"));
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "epoch,loss");
  EXPECT_EQ(count_lines(p("loss.csv")), 6u);
  EXPECT_EQ(load_checkpoint(p("h.ckpt")).kind, "hybrid");
}

TEST_F(CliTest, ZeroEpochsEqualsInitialization) {
  const auto m = gen(4);
  ASSERT_EQ(run("train detector -m " + m.string() + " -o " + p("d.ckpt").string() + " --seed 42 --epochs 0"), 0);
  const auto ck = load_checkpoint(p("d.ckpt"));
  DetectorNet<float> net(detector_config_from_json(ck.config.at("detector")));
  net.init(42);
  for (auto* prm : net.params()) EXPECT_EQ(ck.tensors.at(prm->name).data, prm->value.data) << prm->name;
}

TEST_F(CliTest, ResumeWithZeroEpochsKeepsParameters) {
  const auto m = gen(4);
  ASSERT_EQ(run("train saliency -m " + m.string() + " -o " + p("s1.ckpt").string() + " --seed 2 --epochs 2"), 0);
  ASSERT_EQ(run("train saliency -m " + m.string() + " -o " + p("s2.ckpt").string() + " --seed 2 --epochs 0 --resume " +
                p("s1.ckpt").string()),
            0);
  const auto a = load_checkpoint(p("s1.ckpt")), b = load_checkpoint(p("s2.ckpt"));
  ASSERT_EQ(a.tensors.size(), b.tensors.size());
  for (const auto& [name, t] : a.tensors) EXPECT_EQ(b.tensors.at(name).data, t.data) << name;
  EXPECT_EQ(b.state.epoch, 2);
}

TEST_F(CliTest, TrainAndPredictAreByteIdentical) {
  const auto m = gen(5);
  for (const char* out : {"a.ckpt", "b.ckpt"})
    ASSERT_EQ(run("train hybrid -m " + m.string() + " -o " + p(out).string() + " --seed 9 --epochs 1"), 0);
  EXPECT_EQ(read_file(p("a.ckpt")), read_file(p("b.ckpt")));
  ASSERT_EQ(run("predict -k " + p("a.ckpt").string() + " -m " + m.string() + " -o " + p("p1.jsonl").string() +
                " --with-saliency " + p("sal1").string()),
            0);
  ASSERT_EQ(run("-j 2 predict -k " + p("a.ckpt").string() + " -m " + m.string() + " -o " + p("p2.jsonl").string() +
                " --with-saliency " + p("sal2").string()),
            0);
  EXPECT_EQ(read_file(p("p1.jsonl")), read_file(p("p2.jsonl")));
  EXPECT_EQ(tree_digest(p("sal1")), tree_digest(p("sal2")));
  EXPECT_EQ(count_lines(p("p1.jsonl")), 5u);
  // one saliency map per image, at the source resolution
  size_t maps = 0;
  for (const auto& e : fs::directory_iterator(p("sal1"))) {
    EXPECT_EQ(read_saliency_png(e.path()).width(), 64);
    ++maps;
  }
  EXPECT_EQ(maps, 5u);
}

TEST_F(CliTest, PredictOnEmptyManifest) {
  const auto m = gen(2);
  ASSERT_EQ(run("train detector -m " + m.string() + " -o " + p("d.ckpt").string() + " --seed 1 --epochs 0"), 0);
  write_file(p("empty.jsonl"), "");
  ASSERT_EQ(run("predict -k " + p("d.ckpt").string() + " -m " + p("empty.jsonl").string() + " -o " + p("out.jsonl").string()), 0);
  EXPECT_TRUE(fs::exists(p("out.jsonl")));
  EXPECT_EQ(read_file(p("out.jsonl")), "");
}

TEST_F(CliTest, GateFileLevelCases) {
  fs::create_directories(p("sal"));
  const std::vector<PredictionRecord> preds{{"img/x.png", 8, 4, {Detection(BoundingBox(0, 0, 8, 4), 0.9)}}};
  write_predictions(p("pred.jsonl"), preds);
  const auto map_path = p("sal") / saliency_png_name("img/x.png");

  auto gate_kept = [&](const SaliencyMap& map) {
    write_saliency_png(map_path, map);
    EXPECT_EQ(run("gate -p " + p("pred.jsonl").string() + " -s " + p("sal").string() + " -o " + p("gated.jsonl").string() +
                  " --log " + p("log.jsonl").string()),
              0);
    const auto out = read_predictions(p("gated.jsonl"));
    EXPECT_EQ(out.size(), 1u);
    return out[0].detections.size();
  };
  EXPECT_EQ(gate_kept(SaliencyMap(8, 4, 1.0f)), 0u);
  EXPECT_EQ(gate_kept(SaliencyMap(8, 4, 0.0f)), 1u);
  std::vector<float> half(32);
  for (int y = 0; y < 4; ++y)
    for (int x = 4; x < 8; ++x) half[static_cast<size_t>(y) * 8 + x] = 1.0f;
  EXPECT_EQ(gate_kept(SaliencyMap(8, 4, half)), 1u);
  const auto log = nlohmann::json::parse(read_file(p("log.jsonl")));
  EXPECT_EQ(log["mean_saliency"], 0.5);
  EXPECT_EQ(log["kept"], true);
}

TEST_F(CliTest, EvalFileLevelCases) {
  write_file(p("a.png"), "");
  write_file(p("b.png"), "");
  write_file(p("m.jsonl"), R"({"image":"a.png","width":20,"height":20,"boxes":[[0,0,4,4],[10,10,14,14]]})" "\n"
                           R"({"image":"b.png","width":20,"height":20,"boxes":[]})" "\n");
  write_predictions(p("perfect.jsonl"), {{"a.png", 20, 20, {Detection(BoundingBox(0, 0, 4, 4), 0.9),
                                                           Detection(BoundingBox(10, 10, 14, 14), 0.8)}}});
  ASSERT_EQ(run("eval -p " + p("perfect.jsonl").string() + " -m " + p("m.jsonl").string() + " -o " + p("r1.json").string()), 0);
  EXPECT_EQ(nlohmann::json::parse(read_file(p("r1.json")))["ap"], 1.0);

  write_predictions(p("fixture.jsonl"), {{"a.png", 20, 20,
                                          {Detection(BoundingBox(0, 0, 4, 4), 0.9), Detection(BoundingBox(5, 5, 8, 8), 0.8),
                                           Detection(BoundingBox(10, 10, 14, 14), 0.7)}}});
  ASSERT_EQ(run("eval -p " + p("fixture.jsonl").string() + " -m " + p("m.jsonl").string() + " -o " + p("r2.json").string()), 0);
  const double ap = nlohmann::json::parse(read_file(p("r2.json")))["ap"];
  EXPECT_NEAR(ap, oracle::average_precision({true, false, true}, 2), 1e-12);
  EXPECT_EQ(ap, 5.0 / 6.0);
  const std::string first = read_file(p("r2.json"));
  ASSERT_EQ(run("eval -p " + p("fixture.jsonl").string() + " -m " + p("m.jsonl").string() + " -o " + p("r2.json").string()), 0);
  EXPECT_EQ(read_file(p("r2.json")), first);

  write_predictions(p("stray.jsonl"), {{"zzz.png", 20, 20, {}}});
  EXPECT_EQ(run("eval -p " + p("stray.jsonl").string() + " -m " + p("m.jsonl").string()), 1);
  EXPECT_NE(read_file(p("stderr.txt")).find("UnknownImageId"), std::string::npos) << read_file(p("stderr.txt"));
}

TEST_F(CliTest, ObfuscateFileLevelCases) {
  std::mt19937_64 rng(5);
  const auto img = oracle::random_image(rng, 12, 10);
  fs::create_directories(p("img"));
  write_png_rgb(p("img") / "a.png", img);
  write_file(p("m.jsonl"), R"({"image":"img/a.png","width":12,"height":10,"boxes":[]})" "\n");

  write_predictions(p("none.jsonl"), {{"img/a.png", 12, 10, {}}});
  ASSERT_EQ(run("obfuscate -p " + p("none.jsonl").string() + " -m " + p("m.jsonl").string() + " -o " + p("o1").string()), 0);
  EXPECT_EQ(read_png_rgb(p("o1") / "img_a.png"), img);

  write_predictions(p("full.jsonl"), {{"img/a.png", 12, 10, {Detection(BoundingBox(0, 0, 12, 10), 0.9)}}});
  ASSERT_EQ(run("--set obfuscation.mode=blackout obfuscate -p " + p("full.jsonl").string() + " -m " + p("m.jsonl").string() +
                " -o " + p("o2").string()),
            0);
  const auto black = read_png_rgb(p("o2") / "img_a.png");
  for (uint8_t v : black.data()) EXPECT_EQ(v, 0);

  write_predictions(p("part.jsonl"), {{"img/a.png", 12, 10, {Detection(BoundingBox(2, 2, 7, 6), 0.9)}}});
  ASSERT_EQ(run("--set obfuscation.blur_sigma=1.5 obfuscate -p " + p("part.jsonl").string() + " -m " + p("m.jsonl").string() +
                " -o " + p("o3").string()),
            0);
  const auto out = read_png_rgb(p("o3") / "img_a.png");
  const auto ref = oracle::blur(img, 1.5);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 12; ++x)
      for (int c = 0; c < 3; ++c) {
        const bool in = x >= 2 && x < 7 && y >= 2 && y < 6;
        EXPECT_EQ(out.at(x, y, c), in ? oracle::to_byte(ref[(static_cast<size_t>(y) * 12 + x) * 3 + c]) : img.at(x, y, c));
      }
}

TEST(PredictionsFormat, LineRoundTrip) {
  const PredictionRecord r{"dir/im.png", 30, 20, {Detection(BoundingBox(1.5, 2, 10, 12.25), 0.875)}};
  const auto j = nlohmann::json::parse(prediction_line(r));
  EXPECT_EQ(j["image"], "dir/im.png");
  EXPECT_EQ(j["boxes"][0].size(), 5u);
  EXPECT_EQ(j["boxes"][0][4], 0.875);
  EXPECT_EQ(saliency_png_name("dir/im.png"), "dir_im.png");
}
