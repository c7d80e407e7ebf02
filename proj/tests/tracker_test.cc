#include "mvtap/tracker.h"

#include <random>

#include <gtest/gtest.h>

#include "mvtap/error.h"
#include "mvtap/overfit.h"
#include "mvtap/scene_gen.h"

namespace mvtap {
namespace {

TrackerConfig SmallConfig() {
  TrackerConfig c;
  c.dim = 16;
  c.blocks = 2;
  c.heads = 2;
  c.radius = 2;
  c.iterations = 3;
  return c;
}

TrainingExample SmallExample(int views, std::uint64_t seed) {
  SceneConfig s;
  s.views = views;
  s.frames = 6;
  s.points = 5;
  s.seed = seed;
  return MakeExample(s);
}

double MaxDiff(const std::vector<Pixel>& a, const std::vector<Pixel>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, (a[i] - b[i]).cwiseAbs().maxCoeff());
  return m;
}

TEST(TrackerConfigTest, Validation) {
  TrackerConfig c;
  EXPECT_NO_THROW(c.Validate());
  c.heads = 3;
  EXPECT_THROW(c.Validate(), Error);
  c = TrackerConfig();
  c.iterations = 0;
  EXPECT_THROW(c.Validate(), Error);
  c = TrackerConfig();
  c.radius = -1;
  EXPECT_THROW(c.Validate(), Error);
}

TEST(InitStateTest, BroadcastsQueries) {
  QuerySet q(1, 1);
  q.at(0, 0) = {2, Pixel(10, 20)};
  const TrackerState s = InitState(q, 4);
  ASSERT_EQ(s.tracks.size(), 4u);
  for (const Pixel& p : s.tracks) EXPECT_EQ(p, Pixel(10, 20));
  for (double l : s.occlusion_logits) EXPECT_EQ(Sigmoid(l), 0.5);
  EXPECT_EQ(s.iteration, 0);
}

TEST(ModelWeightsTest, ShapesAndNames) {
  const TrackerConfig c = SmallConfig();
  ModelWeights w = ModelWeights::Random(c, 1);
  EXPECT_NO_THROW(w.CheckCompatible(c));
  EXPECT_EQ(w.token_projection.in(), c.token_input_width());
  EXPECT_EQ(w.token_projection.out(), c.dim);
  EXPECT_EQ(w.blocks.size(), 2u);
  EXPECT_EQ(w.head.out(), 3);
  long count = 0;
  std::vector<std::string> names;
  w.ForEachParam([&](const std::string& name, nn::Matrix& m) {
    names.push_back(name);
    count += m.size();
  });
  EXPECT_EQ(count, w.ParameterCount());
  std::sort(names.begin(), names.end());
  EXPECT_EQ(std::unique(names.begin(), names.end()), names.end());
  TrackerConfig other = c;
  other.dim = 32;
  EXPECT_THROW(w.CheckCompatible(other), Error);
}

TEST(AxisGroupsTest, CoverEveryTokenOnce) {
  const TrackDims d{3, 4, 5};
  for (auto axis : {AttentionAxis::kTime, AttentionAxis::kPoints,
                    AttentionAxis::kViews, AttentionAxis::kViewTime}) {
    std::vector<int> seen(d.size(), 0);
    for (const auto& g : AxisGroups(d, axis)) {
      for (int i : g) ++seen[i];
    }
    EXPECT_EQ(seen, std::vector<int>(d.size(), 1));
  }
  EXPECT_EQ(AxisGroups(d, AttentionAxis::kTime).size(), 15u);
  EXPECT_EQ(AxisGroups(d, AttentionAxis::kPoints).size(), 12u);
  EXPECT_EQ(AxisGroups(d, AttentionAxis::kViews).size(), 20u);
  EXPECT_EQ(AxisGroups(d, AttentionAxis::kViewTime).front().size(), 12u);
  // Time groups hold one (v, n) across frames.
  const auto g = AxisGroups(d, AttentionAxis::kTime).front();
  for (int t = 0; t < 4; ++t) EXPECT_EQ(g[t], static_cast<int>(d.index(0, t, 0)));
}

TEST(AxisAttentionTest, SingleViewIsResidualOfValueProjection) {
  std::mt19937_64 rng(3);
  nn::AxisLayer layer(8, 16);
  layer.InitRandom(rng);
  TokenField x{{1, 2, 3}, nn::Matrix::Random(6, 8)};
  const TokenField y = AxisAttention(x, AttentionAxis::kViews, layer, 1);
  // Single-element softmax: attention output equals the value projection.
  const nn::Matrix h = nn::LayerNormForward(x.values, layer.norm1, nullptr);
  const nn::Matrix x1 = x.values + layer.wo.Forward(layer.wv.Forward(h));
  const nn::Matrix h2 = nn::LayerNormForward(x1, layer.norm2, nullptr);
  const nn::Matrix expect = x1 + layer.ff2.Forward(nn::Gelu(layer.ff1.Forward(h2)));
  EXPECT_LT((y.values - expect).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(RefineStepTest, ZeroHeadKeepsState) {
  const TrackerConfig c = SmallConfig();
  const TrainingExample ex = SmallExample(2, 1);
  ModelWeights w = ModelWeights::Random(c, 2);
  w.head.weight.setZero();
  w.head.bias.setZero();
  const TrackerState s0 = InitState(ex.queries, 6);
  const TrackerState s1 = RefineStep(ex.inputs(), w, c, s0);
  EXPECT_EQ(s1.tracks, s0.tracks);
  EXPECT_EQ(s1.occlusion_logits, s0.occlusion_logits);
  EXPECT_EQ(s1.iteration, 1);
}

TEST(RefineStepTest, IterationOverflow) {
  TrackerConfig c = SmallConfig();
  c.iterations = 1;
  const TrainingExample ex = SmallExample(2, 1);
  const ModelWeights w = ModelWeights::Random(c, 2);
  const TrackerState s1 = RefineStep(ex.inputs(), w, c, InitState(ex.queries, 6));
  try {
    RefineStep(ex.inputs(), w, c, s1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIterationOverflow);
  }
}

TEST(TrackTest, RunsConfiguredStepsDeterministically) {
  TrackerConfig c = SmallConfig();
  c.iterations = 4;
  const TrainingExample ex = SmallExample(3, 2);
  const ModelWeights w = ModelWeights::Random(c, 5);
  TrackDiagnostics diag;
  const TrackResult a = Track(ex.inputs(), w, c, &diag);
  const TrackResult b = Track(ex.inputs(), w, c);
  EXPECT_EQ(diag.steps, 4);
  EXPECT_EQ(a.states.size(), 5u);
  EXPECT_EQ(diag.view_attention_layers, 4 * c.blocks);
  EXPECT_EQ(diag.temporal_sequence_length, 6);
  EXPECT_EQ(a.prediction.xy, b.prediction.xy);
  EXPECT_EQ(a.prediction.occlusion, b.prediction.occlusion);
  for (double p : a.prediction.occlusion) {
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
  }
  EXPECT_LE(diag.attention.max_rowsum_error, 1e-6);
}

TEST(TrackTest, FlattenedModeSequence) {
  TrackerConfig c = SmallConfig();
  c.mode = TrackerMode::kFlattened;
  const TrainingExample ex = SmallExample(2, 3);
  TrackDiagnostics diag;
  Track(ex.inputs(), ModelWeights::Random(c, 1), c, &diag);
  EXPECT_EQ(diag.temporal_sequence_length, 12);
  EXPECT_EQ(diag.view_attention_layers, 0);
}

TEST(TrackTest, SingleViewFlattenedEqualsMultiview) {
  TrackerConfig c = SmallConfig();
  const TrainingExample ex = SmallExample(1, 4);
  const ModelWeights w = ModelWeights::Random(c, 9);
  const TrackResult mv = Track(ex.inputs(), w, c);
  c.mode = TrackerMode::kFlattened;
  const TrackResult fl = Track(ex.inputs(), w, c);
  EXPECT_EQ(mv.prediction.xy, fl.prediction.xy);
  EXPECT_EQ(mv.prediction.occlusion, fl.prediction.occlusion);
}

TEST(TrackTest, ViewPermutationEquivariance) {
  const TrackerConfig c = SmallConfig();
  const TrainingExample ex = SmallExample(4, 6);
  const ModelWeights w = ModelWeights::Random(c, 3);
  const std::vector<int> perm = {2, 0, 3, 1};
  const TrackResult base = Track(ex.inputs(), w, c);
  const FeatureVolume f = ex.features.SelectViews(perm);
  const QuerySet q = ex.queries.SelectViews(perm);
  const CameraRig cams = ex.cameras.Select(perm);
  const TrackResult permuted = Track({f, q, cams}, w, c);
  const TrackPrediction expect = base.prediction.SelectViews(perm);
  EXPECT_LT(MaxDiff(permuted.prediction.xy, expect.xy), 1e-9);
}

TEST(TrackTest, TemporalEncodingBreaksTimeReversal) {
  const TrackerConfig c = SmallConfig();
  const TrainingExample ex = SmallExample(2, 7);
  const ModelWeights w = ModelWeights::Random(c, 4);
  // Reverse the frames of features and queries.
  FeatureVolume f = ex.features;
  QuerySet q = ex.queries;
  const int T = ex.features.frames;
  for (int v = 0; v < f.views; ++v) {
    for (int t = 0; t < T; ++t) f.at(v, t) = ex.features.at(v, T - 1 - t);
    for (int n = 0; n < q.points; ++n) q.at(v, n).frame = T - 1 - q.at(v, n).frame;
  }
  const TrackResult a = Track(ex.inputs(), w, c);
  const TrackResult b = Track({f, q, ex.cameras}, w, c);
  double diff = 0.0;
  for (int v = 0; v < 2; ++v) {
    for (int t = 0; t < T; ++t) {
      for (int n = 0; n < q.points; ++n) {
        diff = std::max(diff, (a.prediction.at(v, t, n) -
                               b.prediction.at(v, T - 1 - t, n)).norm());
      }
    }
  }
  EXPECT_GT(diff, 1e-6);
}

TEST(TrackTest, ZeroRadiusRuns) {
  TrackerConfig c = SmallConfig();
  c.radius = 0;
  EXPECT_EQ(c.token_input_width(), 1 + kFourierWidth);
  const TrainingExample ex = SmallExample(2, 8);
  const TrackResult r = Track(ex.inputs(), ModelWeights::Random(c, 1), c);
  for (const Pixel& p : r.prediction.xy) EXPECT_TRUE(p.allFinite());
}

TEST(TrackTest, ZeroCameraAndTimeEmbeddingIsCameraAgnostic) {
  TrackerConfig c = SmallConfig();
  c.temporal_encoding = false;
  const TrainingExample a = SmallExample(2, 10);
  ModelWeights w = ModelWeights::Random(c, 2);
  w.camera.out.weight.setZero();
  w.camera.out.bias.setZero();
  // Same features and queries, different rig.
  const TrainingExample other = SmallExample(2, 11);
  const TrackResult r1 = Track(a.inputs(), w, c);
  const TrackResult r2 = Track({a.features, a.queries, other.cameras}, w, c);
  EXPECT_EQ(r1.prediction.xy, r2.prediction.xy);
  // With the camera MLP live, the rig matters.
  const ModelWeights live = ModelWeights::Random(c, 2);
  EXPECT_NE(Track(a.inputs(), live, c).prediction.xy,
            Track({a.features, a.queries, other.cameras}, live, c).prediction.xy);
}

TEST(TrackTest, MismatchedInputs) {
  const TrackerConfig c = SmallConfig();
  const TrainingExample a = SmallExample(2, 1);
  const TrainingExample b = SmallExample(3, 1);
  EXPECT_THROW(Track({a.features, b.queries, a.cameras}, ModelWeights::Random(c, 1), c),
               Error);
}

}  // namespace
}  // namespace mvtap
