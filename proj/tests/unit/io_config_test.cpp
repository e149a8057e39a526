#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <unistd.h>

#include "rapforge/config.hpp"
#include "rapforge/dataset.hpp"
#include "rapforge/io.hpp"

using namespace rapforge;
namespace fs = std::filesystem;

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("rapforge_io_" + std::to_string(::getpid()) + "_" +
           ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }
  fs::path dir;
};

TEST_F(TempDir, PngRoundTrip) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> v(0, 65535);
  Imaged img(9, 7, 3);
  for (int c = 0; c < 3; ++c) img.channel(c) = img.channel(c).unaryExpr([&](double) { return v(rng) / 65535.0; });
  write_png(dir / "a.png", img, 16);
  EXPECT_EQ(read_png(dir / "a.png"), img);

  write_png(dir / "b.png", img, 8);
  const Imaged eight = read_png(dir / "b.png");
  for (int c = 0; c < 3; ++c) EXPECT_LE((eight.channel(c) - img.channel(c)).abs().maxCoeff(), 0.5 / 255 + 1e-12);

  const Imaged gray(5, 4, 1, 0.2);
  write_png(dir / "g.png", gray, 16);
  EXPECT_EQ(read_png(dir / "g.png").channels(), 1);
  EXPECT_THROW(read_png(dir / "missing.png"), std::runtime_error);
  EXPECT_THROW(write_png(dir / "x.png", Imaged(3, 3, 2), 8), DomainError);
}

TEST_F(TempDir, PatchCheckpointRoundTrip) {
  Patchd p = Patchd::constant(6, 5, 3, 0.0);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 6; ++x) p.pixels.channel(c)(y, x) = (x + 6 * y + 30 * c) / 89.0;
  write_patch(dir / "patch.png", p, {6, 5, 5.58, "abc", 50});
  const Patchd q = read_patch(dir / "patch.png");
  for (int c = 0; c < 3; ++c) EXPECT_LE((q.pixels.channel(c) - p.pixels.channel(c)).abs().maxCoeff(), 0.5 / 65535);
  const auto meta = read_patch_metadata(dir / "patch.png");
  EXPECT_EQ(meta.width, 6);
  EXPECT_EQ(meta.height, 5);
  EXPECT_DOUBLE_EQ(meta.alpha, 5.58);
  EXPECT_EQ(meta.config_hash, "abc");
  EXPECT_EQ(meta.iteration, 50);
  EXPECT_EQ(patch_sidecar(dir / "patch.png"), dir / "patch.json");
}

TEST(Detections, JsonLines) {
  const Detection<double> d{0.75, {10.5, 20, 8, 6}};
  EXPECT_EQ(detection_from_json(detection_to_json(d)), d);
  std::istringstream in("{\"p\":0.5,\"x\":1,\"y\":2,\"w\":3,\"h\":4}\n\n{\"p\":1,\"x\":5,\"y\":5,\"w\":2,\"h\":2}\n");
  const auto all = read_detections(in);
  ASSERT_EQ(all.size(), 2u);
  EXPECT_EQ(all[0], (Detection<double>{0.5, {1, 2, 3, 4}}));
  EXPECT_THROW(detection_from_json("{\"p\":2,\"x\":1,\"y\":2,\"w\":3,\"h\":4}"), std::exception);
  EXPECT_THROW(detection_from_json("{\"p\":0.5,\"x\":1,\"y\":2,\"w\":0,\"h\":4}"), std::exception);
  EXPECT_THROW(detection_from_json("not json"), std::exception);
}

TEST(Manifest, EntryRoundTrip) {
  ManifestEntry e;
  e.path = "img/a.png";
  e.mask = "img/a.mask.png";
  e.gt = {{1.0, {10, 12, 16, 16}}, {0.8, {40, 40, 8, 8}}};
  e.shift = std::array<int, 2>{25, 50};
  e.source = "orig.png";
  const auto back = manifest_entry_from_json(manifest_entry_to_json(e));
  EXPECT_EQ(back.path, e.path);
  EXPECT_EQ(back.mask, e.mask);
  EXPECT_EQ(back.gt, e.gt);
  EXPECT_EQ(back.shift, e.shift);
  EXPECT_EQ(back.source, e.source);
  const auto four = manifest_entry_from_json(R"({"path":"b.png","gt":[[5,6,2,2]]})");
  ASSERT_EQ(four.gt.size(), 1u);
  EXPECT_EQ(four.gt[0].box, (Box<double>{5, 6, 2, 2}));
  EXPECT_FALSE(four.shift.has_value());
}

TEST_F(TempDir, DatasetRoundTrip) {
  const Dataset data = make_synthetic_dataset(4, SceneSpec{}, ToyDetector{}, 2);
  write_manifest(dir / "m.jsonl", save_dataset(data, dir));
  const Dataset back = load_dataset(dir / "m.jsonl");
  ASSERT_EQ(back.size(), data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(back[i].gt.boxes, data[i].gt.boxes);
    ASSERT_TRUE(back[i].mask.has_value());
    EXPECT_LE((back[i].image.channel(0) - data[i].image.channel(0)).abs().maxCoeff(), 0.5 / 255 + 1e-12);
  }
  EXPECT_NO_THROW(validate_dataset(back, true));
}

TEST_F(TempDir, SavedStemsAreUnique) {
  Dataset data = make_synthetic_dataset(3, SceneSpec{}, ToyDetector{}, 2);
  data[0].id = "a.png@0,25";
  data[1].id = "a.png@25,0";
  data[2].id = "a.png@25,0";
  const auto entries = save_dataset(data, dir);
  std::set<std::string> paths;
  for (const auto& e : entries) paths.insert(e.path);
  EXPECT_EQ(paths.size(), 3u);
}

TEST(ValidateDataset, NamesOffenders) {
  Dataset data = make_synthetic_dataset(3, SceneSpec{}, ToyDetector{}, 2);
  data[1].gt.boxes.clear();
  data[2].mask.reset();
  try {
    validate_dataset(data, true);
    FAIL();
  } catch (const DatasetError& e) {
    EXPECT_EQ(e.offenders(), (std::vector<std::string>{data[1].id, data[2].id}));
  }
  try {
    validate_dataset(data, false);
    FAIL();
  } catch (const DatasetError& e) {
    EXPECT_EQ(e.offenders(), std::vector<std::string>{data[1].id});
  }
}

TEST(Config, AttackTable) {
  const auto cfg = parse_attack_config(R"(
[attack]
theta_d = 0.45
step_size = 0.02
iterations = 10
seed = 7
loss = "dpatch"
direction = "raise"
tap = "post_nms"
placement = "fixed"
placement_x = 3
placement_y = 4
)");
  EXPECT_DOUBLE_EQ(cfg.theta_d, 0.45);
  EXPECT_DOUBLE_EQ(cfg.step_size, 0.02);
  EXPECT_EQ(cfg.iterations, 10);
  EXPECT_EQ(cfg.seed, 7u);
  EXPECT_EQ(cfg.loss, LossVariant::kDpatch);
  EXPECT_EQ(cfg.direction, BfpDirection::kRaiseBorderline);
  EXPECT_EQ(cfg.tap, DetectionTap::kPostNms);
  ASSERT_TRUE(std::holds_alternative<FixedAt>(cfg.placement));
  EXPECT_EQ(std::get<FixedAt>(cfg.placement).x, 3);
  EXPECT_DOUBLE_EQ(cfg.alpha, 5.58);
}

TEST(Config, Errors) {
  EXPECT_THROW(parse_attack_config("[attack]\ntheta_t = 0.4\n"), ConfigError);
  EXPECT_THROW(parse_attack_config("[attack]\ntap = \"middle\"\n"), ConfigError);
  EXPECT_THROW(parse_attack_config("[attack\n"), ConfigError);
  EXPECT_THROW(parse_train_config("[attack]\n"), ConfigError);
}

TEST(Config, TrainPathsResolveAgainstConfigDir) {
  const auto run = parse_train_config("dataset = \"d/train.jsonl\"\nvalidation = \"/abs/v.jsonl\"\n", "/base");
  EXPECT_EQ(run.dataset, fs::path("/base/d/train.jsonl"));
  EXPECT_EQ(*run.validation, fs::path("/abs/v.jsonl"));
  EXPECT_EQ(run.detector, "toy");
}

TEST(Config, TransferSpec) {
  const auto spec = parse_transfer_spec(R"(
models = ["toy", "s3fd"]
[attack]
theta_d = 0.4
[[run]]
patch = "p.png"
train_dataset = "CGB"
[[dataset]]
name = "CGB"
manifest = "cgb.jsonl"
)", "/r");
  ASSERT_EQ(spec.runs.size(), 1u);
  EXPECT_EQ(spec.runs[0].patch, fs::path("/r/p.png"));
  EXPECT_EQ(spec.runs[0].method, "Proposed");
  EXPECT_EQ(spec.models, (std::vector<std::string>{"toy", "s3fd"}));
  EXPECT_DOUBLE_EQ(spec.eval.theta_d, 0.4);
  EXPECT_THROW(parse_transfer_spec("models = [\"toy\"]\n"), ConfigError);
}

TEST(Fingerprint, Fnv1a) {
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
}
