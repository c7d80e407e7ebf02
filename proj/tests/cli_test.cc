#include "mvtap/cli.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "mvtap/container.h"
#include "mvtap/files.h"
#include "mvtap/scene_gen.h"

namespace mvtap {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result Cli(std::vector<std::string> args) {
  args.insert(args.begin(), "mvtap");
  std::ostringstream out, err;
  const int code = RunCli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::path(::testing::TempDir()) /
           ::testing::UnitTest::GetInstance()->current_test_info()->name();
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  std::string P(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(CliTest, GenWritesReloadableScene) {
  Result r = Cli({"gen", "--views", "3", "--frames", "5", "--points", "8",
                  "--seed", "4", "--radius-min", "9.5", "--separation-max",
                  "30", "-o", P("s.mvt")});
  ASSERT_EQ(r.code, 0) << r.err;
  const Container c = ReadContainer(P("s.mvt"));
  EXPECT_EQ(c.Get("scene.radius_min"), "9.5");
  EXPECT_EQ(c.Get("scene.separation_max_deg"), "30");
  const Scene s = SceneFromContainer(c);
  SceneConfig cfg;
  cfg.views = 3;
  cfg.frames = 5;
  cfg.points = 8;
  cfg.seed = 4;
  cfg.radius_min = 9.5;
  cfg.separation_max_deg = 30;
  EXPECT_EQ(s.point_tracks, GenerateScene(cfg).point_tracks);
}

TEST_F(CliTest, InvalidConfigExitsNonzero) {
  Result r = Cli({"gen", "--views", "0", "-o", P("s.mvt")});
  EXPECT_NE(r.code, 0);
  EXPECT_EQ(r.err.rfind("INVALID_CONFIG:", 0), 0u) << r.err;
  EXPECT_FALSE(fs::exists(P("s.mvt")));
  r = Cli({"gen", "--no-such-flag"});
  EXPECT_NE(r.code, 0);
  EXPECT_EQ(r.err.rfind("INVALID_CONFIG:", 0), 0u) << r.err;
}

TEST_F(CliTest, MissingFileIsIOError) {
  Result r = Cli({"eval", "--scene", P("nope.mvt"), "--tracks", P("t.mvt")});
  EXPECT_NE(r.code, 0);
  EXPECT_EQ(r.err.rfind("IO_ERROR:", 0), 0u) << r.err;
}

TEST_F(CliTest, TrackIsByteIdentical) {
  ASSERT_EQ(Cli({"gen", "--views", "3", "--frames", "4", "--points", "8",
                 "-o", P("s.mvt")}).code, 0);
  const std::vector<std::string> track = {"track", "--scene", P("s.mvt"),
                                          "--weights-seed", "3", "--dim", "16",
                                          "--blocks", "1"};
  auto a = track, b = track;
  a.insert(a.end(), {"-o", P("a.mvt")});
  b.insert(b.end(), {"-o", P("b.mvt")});
  ASSERT_EQ(Cli(a).code, 0);
  ASSERT_EQ(Cli(b).code, 0);
  EXPECT_EQ(Slurp(P("a.mvt")), Slurp(P("b.mvt")));
  const Container c = ReadContainer(P("a.mvt"));
  EXPECT_EQ(c.Get("tracker.dim"), "16");
  EXPECT_EQ(c.Get("weights.seed"), "3");
}

TEST_F(CliTest, FlattenedEqualsMultiviewForOneView) {
  ASSERT_EQ(Cli({"gen", "--views", "3", "--frames", "4", "--points", "8",
                 "-o", P("s.mvt")}).code, 0);
  for (const std::string mode : {"multiview", "flattened"}) {
    Result r = Cli({"track", "--scene", P("s.mvt"), "--weights-seed", "2",
                    "--dim", "16", "--blocks", "1", "--views", "1", "--mode",
                    mode, "-o", P(mode + ".mvt")});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  const TrackFile a = TracksFromContainer(ReadContainer(P("multiview.mvt")));
  const TrackFile b = TracksFromContainer(ReadContainer(P("flattened.mvt")));
  EXPECT_EQ(a.prediction.xy, b.prediction.xy);
  EXPECT_EQ(a.prediction.occlusion, b.prediction.occlusion);
}

TEST_F(CliTest, GroundTruthScoresPerfectly) {
  ASSERT_EQ(Cli({"gen", "--views", "2", "--frames", "6", "--points", "8",
                 "--seed", "7", "-o", P("s.mvt")}).code, 0);
  const Scene s = SceneFromContainer(ReadContainer(P("s.mvt")));
  const MultiViewTracks gt = RenderGroundTruth(s);
  TrackFile tf{AsPrediction(gt), SampleQueries(gt, QueryMode::kFirstVisible, 0),
               {0, 1}};
  WriteContainer(P("gt.mvt"), TracksToContainer(tf));
  Result r = Cli({"eval", "--scene", P("s.mvt"), "--tracks", P("gt.mvt")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("delta_avg 100.0000"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("occlusion_accuracy 100.0000"), std::string::npos);
  EXPECT_NE(r.out.find("average_jaccard 100.0000"), std::string::npos);
}

TEST_F(CliTest, RunManifestIsByteIdentical) {
  const std::string manifest =
      R"({"output_dir": "OUT", "scene": {"views": 3, "frames": 4, "points": 8,
          "seed": 2}, "weights_seed": 1, "tracker": {"dim": 16, "blocks": 1},
          "refine": {"when": "window", "window": 2, "ransac": true}})";
  for (const std::string run : {"a", "b"}) {
    std::string m = manifest;
    m.replace(m.find("OUT"), 3, P(run));
    std::ofstream(P(run + ".json")) << m;
    Result r = Cli({"run", "--manifest", P(run + ".json")});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  int files = 0;
  for (const auto& e : fs::directory_iterator(P("a"))) {
    const std::string name = e.path().filename().string();
    if (name == "manifest.json") continue;
    EXPECT_EQ(Slurp(e.path()), Slurp(fs::path(P("b")) / name)) << name;
    ++files;
  }
  EXPECT_GE(files, 6);
}

TEST_F(CliTest, RefineRecordsModeInHeader) {
  ASSERT_EQ(Cli({"gen", "--views", "3", "--frames", "4", "--points", "8",
                 "-o", P("s.mvt")}).code, 0);
  ASSERT_EQ(Cli({"track", "--scene", P("s.mvt"), "--weights-seed", "1",
                 "--dim", "16", "--blocks", "1", "-o", P("t.mvt")}).code, 0);
  Result r = Cli({"refine", "--tracks", P("t.mvt"), "--scene", P("s.mvt"),
                  "--mode", "window", "--window", "2", "--ransac", "-o",
                  P("r.mvt")});
  ASSERT_EQ(r.code, 0) << r.err;
  const Container c = ReadContainer(P("r.mvt"));
  EXPECT_EQ(c.Get("refine.when"), "window");
  EXPECT_EQ(c.Get("refine.window"), "2");
}

TEST_F(CliTest, InitQueryDepthIsExact) {
  ASSERT_EQ(Cli({"gen", "--views", "3", "--frames", "4", "--points", "8",
                 "-o", P("s.mvt")}).code, 0);
  Result r = Cli({"init-query", "--scene", P("s.mvt"), "--method", "depth",
                  "--all"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("invalid 0"), std::string::npos) << r.out;
}

}  // namespace
}  // namespace mvtap
