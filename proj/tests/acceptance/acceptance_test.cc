// Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero when
// any criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "../metric_oracle.h"
#include "mvtap/baselines.h"
#include "mvtap/cli.h"
#include "mvtap/correlation.h"
#include "mvtap/geometry.h"
#include "mvtap/losses.h"
#include "mvtap/metrics.h"
#include "mvtap/overfit.h"
#include "mvtap/scene_gen.h"
#include "mvtap/tracker.h"

namespace mvtap {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  bool pass;
  std::string detail;
};

double Seconds(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::string Fmt(const char* format, ...) __attribute__((format(printf, 1, 2)));
std::string Fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

Eigen::Matrix3d RandomRotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized().toRotationMatrix();
}

Camera RandomCamera(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> f(40, 400), c(16, 128), t(-10, 10);
  return Camera(MakeIntrinsics(f(rng), c(rng), c(rng)), RandomRotation(rng),
                Eigen::Vector3d(t(rng), t(rng), t(rng)));
}

// Camera on a sphere of radius 8-12 around the origin, looking at it.
Camera OrbitCamera(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> r(8, 12);
  Eigen::Vector3d dir(n(rng), n(rng), n(rng));
  dir.normalize();
  if (std::abs(dir.z()) > 0.95) dir = Eigen::Vector3d(1, 0, 0);
  return Camera::LookAt(MakeIntrinsics(64, 32, 24), r(rng) * dir,
                        Eigen::Vector3d::Zero());
}

// --- geometry ---------------------------------------------------------------

Outcome GeometrySuite() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> px(-50, 250), depth(0.5, 50);
  double worst_unit = 0, worst_moment = 0, worst_round = 0;
  for (int i = 0; i < 10000; ++i) {
    const Camera cam = RandomCamera(rng);
    const Pixel p(px(rng), px(rng));
    const PluckerRay ray = PixelRay(cam, p);
    worst_unit = std::max(worst_unit, std::abs(ray.direction.norm() - 1.0));
    worst_moment = std::max(worst_moment, std::abs(ray.direction.dot(ray.moment)));
    const double d = depth(rng);
    const Projection back = Project(cam, Unproject(cam, p, d));
    worst_round = std::max(worst_round, (back.pixel - p).norm());
  }
  const double secs = Seconds(t0);
  const bool pass = worst_unit <= 1e-9 && worst_moment <= 1e-9 &&
                    worst_round <= 1e-9 && secs < 5.0;
  return {pass, Fmt("max|norm(d)-1|=%.2e max|d.m|=%.2e max round trip=%.2e px "
                    "time=%.2fs (tol 1e-9, <5s)",
                    worst_unit, worst_moment, worst_round, secs)};
}

// --- triangulation ----------------------------------------------------------

Outcome TriangulationSuite() {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-2, 2);
  std::uniform_int_distribution<int> nviews(2, 6);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Vector3d x(u(rng), u(rng), u(rng));
    std::vector<Observation> obs;
    const int v = nviews(rng);
    for (int k = 0; k < v; ++k) {
      const Camera cam = OrbitCamera(rng);
      obs.push_back({cam, Project(cam, x).pixel});
    }
    worst = std::max(worst, (Triangulate(obs, std::nullopt).point - x).norm());
  }
  int removed = 0;
  std::uniform_int_distribution<int> pick(0, 3);
  std::uniform_real_distribution<double> angle(0, 2 * M_PI);
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Vector3d x(u(rng), u(rng), u(rng));
    std::vector<Observation> obs;
    for (int k = 0; k < 4; ++k) {
      const Camera cam = OrbitCamera(rng);
      obs.push_back({cam, Project(cam, x).pixel});
    }
    const int bad = pick(rng);
    const double a = angle(rng);
    obs[bad].pixel += 50.0 * Pixel(std::cos(a), std::sin(a));
    RansacParams rp;
    rp.seed = static_cast<std::uint64_t>(i);
    const Triangulation t = Triangulate(obs, rp);
    bool ok = !t.inliers[bad] && (t.point - x).norm() < 1e-6;
    for (int k = 0; k < 4; ++k) ok = ok && (k == bad || t.inliers[k]);
    removed += ok;
  }
  const bool pass = worst < 1e-6 && removed >= 990;
  return {pass, Fmt("noiseless max error=%.2e (tol 1e-6); 50px outlier "
                    "removed in %d/1000 (need >=990)",
                    worst, removed)};
}

// --- correlation ------------------------------------------------------------

Outcome CorrelationSuite() {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0, 1);
  std::uniform_real_distribution<double> pos(-4, 40);
  std::uniform_int_distribution<int> radius(0, 3);
  double worst_excess = 0;
  bool shape_ok = true;
  for (int i = 0; i < 10000; ++i) {
    FeatureMap a(8, 9, 4, 4.0), b(8, 9, 4, 4.0);
    for (double& x : a.data()) x = n(rng);
    for (double& x : b.data()) x = n(rng);
    const int rp = radius(rng), rq = radius(rng);
    const CorrTensor c =
        Local4dCorrelation(a, b, Pixel(pos(rng), pos(rng)), Pixel(pos(rng), pos(rng)), rp, rq);
    worst_excess = std::max(worst_excess, c.values.cwiseAbs().maxCoeff() - 1.0);
    shape_ok = shape_ok && c.values.rows() == (2 * rp + 1) * (2 * rp + 1) &&
               c.values.cols() == (2 * rq + 1) * (2 * rq + 1);
  }
  FeatureMap f(8, 9, 4, 4.0);
  const CorrTensor r3 = Local4dCorrelation(f, f, Pixel(10, 10), Pixel(10, 10), 3, 3);
  shape_ok = shape_ok && r3.values.rows() == 49 && r3.values.cols() == 49;

  int peaks = 0;
  const int scenes = 20;
  for (int s = 0; s < scenes; ++s) {
    SceneConfig c;
    c.points = 1;
    c.occluders = 0;
    c.feature_noise = 0.0;
    c.seed = static_cast<std::uint64_t>(s);
    const Scene scene = GenerateScene(c);
    const MultiViewTracks gt = RenderGroundTruth(scene);
    bool ok = true;
    for (int v = 0; v < c.views; ++v) {
      const FeatureMap fm = FeatureField(scene, v, 0);
      const Pixel p = gt.at(v, 0, 0);
      const CorrTensor corr = Local4dCorrelation(fm, fm, p, p, 3, 3);
      ok = ok && corr.values(24, 24) >= corr.values.maxCoeff() - 1e-12;
    }
    peaks += ok;
  }
  const bool pass = worst_excess <= 1e-12 && shape_ok && peaks == scenes;
  return {pass, Fmt("max |entry|-1=%.2e over 1e4 inputs; r=3 shape %s; "
                    "self-peak %d/%d scenes",
                    worst_excess, shape_ok ? "49x49" : "WRONG", peaks, scenes)};
}

// --- attention --------------------------------------------------------------

double MaxDiff(const std::vector<Pixel>& a, const std::vector<Pixel>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, (a[i] - b[i]).cwiseAbs().maxCoeff());
  }
  return m;
}

Outcome AttentionSuite() {
  TrackerConfig tc;
  tc.dim = 16;
  tc.blocks = 2;
  tc.heads = 2;
  tc.radius = 2;
  tc.iterations = 3;
  std::mt19937_64 rng(4);
  double rowsum = 0, equivariance = 0;
  for (int i = 0; i < 20; ++i) {
    SceneConfig sc;
    sc.views = 2 + i % 3;
    sc.frames = 6;
    sc.points = 6;
    sc.seed = 100 + static_cast<std::uint64_t>(i);
    const TrainingExample ex = MakeExample(sc);
    const ModelWeights w = ModelWeights::Random(tc, 10 + static_cast<std::uint64_t>(i));
    TrackDiagnostics diag;
    const TrackResult base = Track(ex.inputs(), w, tc, &diag);
    rowsum = std::max(rowsum, diag.attention.max_rowsum_error);
    std::vector<int> perm(sc.views);
    for (int v = 0; v < sc.views; ++v) perm[v] = v;
    do {
      std::shuffle(perm.begin(), perm.end(), rng);
    } while (std::is_sorted(perm.begin(), perm.end()));
    const FeatureVolume f = ex.features.SelectViews(perm);
    const QuerySet q = ex.queries.SelectViews(perm);
    const CameraRig cams = ex.cameras.Select(perm);
    const TrackResult permuted = Track({f, q, cams}, w, tc);
    const TrackPrediction expect = base.prediction.SelectViews(perm);
    equivariance = std::max(equivariance, MaxDiff(permuted.prediction.xy, expect.xy));
    for (size_t k = 0; k < expect.occlusion.size(); ++k) {
      equivariance = std::max(
          equivariance, std::abs(permuted.prediction.occlusion[k] - expect.occlusion[k]));
    }
  }
  bool single_equal = true;
  for (int i = 0; i < 5; ++i) {
    SceneConfig sc;
    sc.views = 1;
    sc.frames = 6;
    sc.points = 6;
    sc.seed = 200 + static_cast<std::uint64_t>(i);
    const TrainingExample ex = MakeExample(sc);
    const ModelWeights w = ModelWeights::Random(tc, 20 + static_cast<std::uint64_t>(i));
    TrackerConfig flat = tc;
    flat.mode = TrackerMode::kFlattened;
    const TrackResult a = Track(ex.inputs(), w, tc);
    const TrackResult b = Track(ex.inputs(), w, flat);
    single_equal = single_equal && a.prediction.xy == b.prediction.xy &&
                   a.prediction.occlusion == b.prediction.occlusion;
  }
  const bool pass = rowsum <= 1e-6 && equivariance <= 1e-5 && single_equal;
  return {pass, Fmt("max softmax rowsum error=%.2e (tol 1e-6); view "
                    "permutation max diff=%.2e over 20 instances (tol 1e-5); "
                    "V=1 flattened==multiview %s",
                    rowsum, equivariance, single_equal ? "exact" : "DIFFERS")};
}

// --- loss gradients ---------------------------------------------------------

// Relative error with the denominator floored at 1e-6.
bool Close(double analytic, double fd, double* worst) {
  const double rel = std::abs(analytic - fd) / std::max(std::abs(fd), 1e-6);
  *worst = std::max(*worst, rel);
  return rel <= 1e-4;
}

Outcome GradientSuite() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> coord(0, 64), logit(-4, 4);
  std::normal_distribution<double> noise(0, 6);
  std::bernoulli_distribution coin(0.5);
  double worst_track = 0, worst_occ = 0;
  bool ok = true;
  for (int trial = 0; trial < 100; ++trial) {
    const TrackDims d{2, 3, 2};
    MultiViewTracks gt(d);
    for (size_t i = 0; i < d.size(); ++i) {
      gt.xy[i] = Pixel(coord(rng), coord(rng));
      gt.in_frame[i] = coin(rng) || coin(rng);
      gt.visible[i] = gt.in_frame[i] && coin(rng);
    }
    LossConfig c;
    c.gamma = 0.6 + 0.1 * (trial % 4);
    c.huber_delta = 3.0 + trial % 5;
    c.mask_out_of_frame = trial % 2 == 1;
    const int steps = 1 + trial % 4;
    std::vector<std::vector<Pixel>> tr(steps, gt.xy);
    std::vector<std::vector<double>> lg(steps, std::vector<double>(d.size()));
    for (auto& s : tr) {
      for (size_t i = 0; i < s.size(); ++i) {
        Pixel r;
        do {
          r = Pixel(noise(rng), noise(rng));
        } while (std::abs(r.norm() - c.huber_delta) <= 1e-2);
        s[i] += r;
      }
    }
    for (auto& s : lg) {
      for (double& x : s) x = logit(rng);
    }
    std::vector<std::vector<Pixel>> gtrack;
    std::vector<std::vector<double>> gocc;
    TrackLoss(tr, gt, c, &gtrack);
    const auto targets = OcclusionTargets(gt);
    OcclusionLoss(lg, targets, c, &gocc);

    const size_t P = d.size();
    Eigen::VectorXd x(steps * P * 2), y(steps * P);
    for (int m = 0; m < steps; ++m) {
      for (size_t i = 0; i < P; ++i) {
        x(2 * (m * P + i)) = tr[m][i].x();
        x(2 * (m * P + i) + 1) = tr[m][i].y();
        y(m * P + i) = lg[m][i];
      }
    }
    const Eigen::VectorXd fx = FiniteDiffGrad(
        [&](const Eigen::VectorXd& v) {
          auto s = tr;
          for (int m = 0; m < steps; ++m) {
            for (size_t i = 0; i < P; ++i) {
              s[m][i] = Pixel(v(2 * (m * P + i)), v(2 * (m * P + i) + 1));
            }
          }
          return TrackLoss(s, gt, c);
        },
        x, 1e-5);
    const Eigen::VectorXd fy = FiniteDiffGrad(
        [&](const Eigen::VectorXd& v) {
          auto s = lg;
          for (int m = 0; m < steps; ++m) {
            for (size_t i = 0; i < P; ++i) s[m][i] = v(m * P + i);
          }
          return OcclusionLoss(s, targets, c);
        },
        y, 1e-5);
    for (int m = 0; m < steps; ++m) {
      for (size_t i = 0; i < P; ++i) {
        ok &= Close(gtrack[m][i].x(), fx(2 * (m * P + i)), &worst_track);
        ok &= Close(gtrack[m][i].y(), fx(2 * (m * P + i) + 1), &worst_track);
        ok &= Close(gocc[m][i], fy(m * P + i), &worst_occ);
      }
    }
  }
  return {ok, Fmt("100 instances: max relative error track=%.2e "
                  "occlusion=%.2e (tol 1e-4, |fd|<1e-6 compared absolutely "
                  "at 1e-10)",
                  worst_track, worst_occ)};
}

// --- metrics ----------------------------------------------------------------

double Gap(const std::optional<double>& a, const std::optional<double>& b) {
  if (a.has_value() != b.has_value()) return INFINITY;
  return a ? std::abs(*a - *b) : 0.0;
}

Outcome MetricOracleSuite() {
  std::mt19937_64 rng(6);
  double worst = 0;
  for (int i = 0; i < 200; ++i) {
    const testing::Instance in = testing::RandomInstance(rng);
    const testing::OracleReport o = testing::OracleEvaluate(in);
    const EvalReport r =
        Evaluate(in.pred, in.gt, MakeEvalMask(in.gt.dims, &in.queries, nullptr));
    worst = std::max({worst, Gap(r.delta_avg, o.delta_avg), Gap(r.delta_occ, o.delta_occ),
                      Gap(r.occlusion_accuracy, o.oa), Gap(r.average_jaccard, o.aj)});
  }
  SceneConfig sc;
  sc.views = 3;
  sc.frames = 8;
  sc.points = 8;
  const Scene s = GenerateScene(sc);
  const MultiViewTracks gt = RenderGroundTruth(s);
  const QuerySet q = SampleQueries(gt, QueryMode::kFirstVisible, 0);
  const EvalReport perfect =
      Evaluate(AsPrediction(gt), gt, MakeEvalMask(gt.dims, &q, nullptr));
  const bool hundred = perfect.delta_avg == 100.0 &&
                       perfect.occlusion_accuracy == 100.0 &&
                       perfect.average_jaccard == 100.0;
  return {worst <= 1e-12 && hundred,
          Fmt("max |impl-oracle| over 200 instances=%.2e (tol 1e-12); perfect "
              "prediction delta/OA/AJ=%.4f/%.4f/%.4f",
              worst, perfect.delta_avg.value_or(-1),
              perfect.occlusion_accuracy.value_or(-1),
              perfect.average_jaccard.value_or(-1))};
}

// --- overfit ----------------------------------------------------------------

TrackerConfig HarnessTracker() {
  TrackerConfig tc;
  tc.dim = 32;
  tc.blocks = 2;
  return tc;
}

double InitStateDelta(const TrainingExample& ex, const EvalMask& mask) {
  TrackPrediction init(ex.gt.dims);
  init.xy = InitState(ex.queries, ex.gt.dims.frames).tracks;
  std::fill(init.occlusion.begin(), init.occlusion.end(), 0.5);
  return *Evaluate(init, ex.gt, mask).delta_avg;
}

Outcome OverfitSuite() {
  const auto t0 = std::chrono::steady_clock::now();
  SceneConfig sc;
  sc.views = 2;
  sc.frames = 8;
  sc.points = 8;
  sc.seed = 0;
  const TrainingExample ex = MakeExample(sc);
  const TrackerConfig tc = HarnessTracker();
  OverfitConfig oc;
  oc.steps = 500;
  oc.adam.decay_steps = 500;
  const OverfitResult r = Overfit({ex}, ModelWeights::Random(tc, 1), tc, oc);
  const EvalMask mask = MakeEvalMask(ex.gt.dims, &ex.queries, nullptr);
  const double before = InitStateDelta(ex, mask);
  const double after =
      *Evaluate(Track(ex.inputs(), r.weights, tc).prediction, ex.gt, mask).delta_avg;
  const double ratio = r.initial.total() / r.final.total();
  const double secs = Seconds(t0);
  const bool pass = ratio >= 10.0 && after - before >= 20.0 && secs < 600.0;
  return {pass, Fmt("loss %.4g -> %.4g (ratio %.1f, need >=10); delta_avg "
                    "init-state %.2f -> trained %.2f (gain %.2f, need >=20); "
                    "time=%.1fs (<600s)",
                    r.initial.total(), r.final.total(), ratio, before, after,
                    after - before, secs)};
}

// --- refinement -------------------------------------------------------------

Outcome RefinementSuite() {
  int improved = 0;
  double mean_raw = 0, mean_ref = 0;
  const int seeds = 50;
  for (int s = 0; s < seeds; ++s) {
    SceneConfig sc;
    sc.views = 8;
    sc.seed = static_cast<std::uint64_t>(s);
    const Scene scene = GenerateScene(sc);
    MultiViewTracks gt = RenderGroundTruth(scene);
    const QuerySet q = SampleQueries(gt, QueryMode::kFirstVisible, 0);
    std::mt19937_64 rng(1000 + static_cast<std::uint64_t>(s));
    std::normal_distribution<double> noise(0, 2);
    std::bernoulli_distribution hide(0.3);
    // Synthetic occlusion on 30% of in-frame entries outside query frames.
    for (int v = 0; v < gt.dims.views; ++v) {
      for (int t = 0; t < gt.dims.frames; ++t) {
        for (int n = 0; n < gt.dims.points; ++n) {
          const size_t i = gt.dims.index(v, t, n);
          if (gt.in_frame[i] && t != q.at(v, n).frame && hide(rng)) gt.visible[i] = 0;
        }
      }
    }
    TrackPrediction pred = AsPrediction(gt);
    for (Pixel& p : pred.xy) p += Pixel(noise(rng), noise(rng));
    RefineMode mode;
    mode.when = RefineWhen::kWindow;
    mode.use_ransac = true;
    const TrackPrediction ref = TriangulationRefine(pred, scene.cameras, mode);
    const EvalMask mask = MakeEvalMask(gt.dims, &q, nullptr);
    const double raw = Evaluate(pred, gt, mask).delta_occ.value_or(0);
    const double refined = Evaluate(ref, gt, mask).delta_occ.value_or(0);
    improved += refined > raw;
    mean_raw += raw / seeds;
    mean_ref += refined / seeds;
  }
  return {improved >= 45,
          Fmt("V=8: delta_occ improved in %d/50 seeds (need >=45); mean %.2f -> %.2f",
              improved, mean_raw, mean_ref)};
}

// --- query initialization ---------------------------------------------------

Outcome QueryInitSuite() {
  double worst_depth = 0;
  long depth_checked = 0;
  for (int s = 0; s < 10; ++s) {
    SceneConfig sc;
    sc.seed = static_cast<std::uint64_t>(s);
    const Scene scene = GenerateScene(sc);
    const MultiViewTracks gt = RenderGroundTruth(scene);
    const QuerySet q = SampleQueries(gt, QueryMode::kFirstVisible, 0);
    for (int v = 0; v < sc.views; ++v) {
      for (int n = 0; n < sc.points; ++n) {
        const int t = q.at(v, n).frame;
        for (const Correspondence& c : QueryInitDepth(
                 PointDepth(scene, v, t, n), scene.cameras, {v, t, q.at(v, n).xy})) {
          worst_depth = std::max(worst_depth, (c.xy - gt.at(c.view, t, n)).norm());
          worst_depth = c.valid ? worst_depth : INFINITY;
          ++depth_checked;
        }
      }
    }
  }

  // Feature matching: the reported cell center must lie within one stride of
  // the ground truth on both axes at the matched (view, frame).
  auto feature_rate = [](int points, long* total) {
    long hits = 0;
    *total = 0;
    for (int s = 0; s < 20; ++s) {
      SceneConfig sc;
      sc.points = points;
      sc.feature_noise = 0.0;
      sc.seed = static_cast<std::uint64_t>(s);
      const Scene scene = GenerateScene(sc);
      const MultiViewTracks gt = RenderGroundTruth(scene);
      const FeatureVolume fv = AllFeatureFields(scene);
      const QuerySet q = SampleQueries(gt, QueryMode::kFirstVisible, 0);
      for (int v = 0; v < sc.views; ++v) {
        for (int n = 0; n < points; ++n) {
          for (const Correspondence& c :
               QueryInitFeature(fv, {v, q.at(v, n).frame, q.at(v, n).xy})) {
            const Pixel d = c.xy - gt.at(c.view, c.frame, n);
            hits += d.cwiseAbs().maxCoeff() <= sc.feature_stride;
            ++*total;
          }
        }
      }
    }
    return 100.0 * static_cast<double>(hits) / static_cast<double>(*total);
  };
  long n8 = 0, n32 = 0;
  const double rate8 = feature_rate(8, &n8);
  const double rate32 = feature_rate(32, &n32);
  const bool pass = worst_depth <= 1e-6 && rate8 >= 80.0;
  return {pass, Fmt("depth lifting max error=%.2e px over %ld (tol 1e-6); "
                    "feature matching within 1 cell %.1f%% of %ld at N=8 "
                    "(need >=80); %.1f%% of %ld at N=32 (informational)",
                    worst_depth, depth_checked, rate8, n8, rate32, n32)};
}

// --- view-count trend -------------------------------------------------------

constexpr int kTrendTrainSteps = 3000;

Outcome ViewTrendSuite() {
  const auto t0 = std::chrono::steady_clock::now();
  const TrackerConfig tc = HarnessTracker();
  OverfitConfig oc;
  oc.steps = kTrendTrainSteps;
  oc.adam.decay_steps = kTrendTrainSteps;
  // Training scenes rotate through V = 2, 3, 4 and never reuse a seed.
  const OverfitResult trained = TrainOnline(
      [](int k) {
        SceneConfig sc;
        sc.views = 2 + k % 3;
        sc.frames = 8;
        sc.points = 8;
        sc.seed = 1000 + static_cast<std::uint64_t>(k);
        return MakeExample(sc);
      },
      ModelWeights::Random(tc, 1), tc, oc);

  int monotone = 0, v4_ge_v2 = 0;
  double mean[3] = {0, 0, 0};
  const std::vector<int> common = {0, 1};
  for (int s = 0; s < 20; ++s) {
    SceneConfig sc;
    sc.views = 4;
    sc.frames = 8;
    sc.points = 8;
    sc.seed = 5000 + static_cast<std::uint64_t>(s);
    const TrainingExample ex = MakeExample(sc);
    const MultiViewTracks gt2 = ex.gt.SelectViews(common);
    const QuerySet q2 = ex.queries.SelectViews(common);
    const EvalMask mask = MakeEvalMask(gt2.dims, &q2, nullptr);
    double delta[3];
    for (int V = 2; V <= 4; ++V) {
      std::vector<int> views(V);
      for (int v = 0; v < V; ++v) views[v] = v;
      const FeatureVolume f = ex.features.SelectViews(views);
      const QuerySet q = ex.queries.SelectViews(views);
      const CameraRig cams = ex.cameras.Select(views);
      const TrackPrediction pred = Track({f, q, cams}, trained.weights, tc).prediction;
      RefineMode mode;
      mode.when = RefineWhen::kWindow;
      mode.use_ransac = true;
      const TrackPrediction ref = TriangulationRefine(pred, cams, mode);
      delta[V - 2] = *Evaluate(ref.SelectViews(common), gt2, mask).delta_avg;
      mean[V - 2] += delta[V - 2] / 20;
    }
    monotone += delta[0] <= delta[1] && delta[1] <= delta[2];
    v4_ge_v2 += delta[0] <= delta[2];
  }
  return {monotone >= 15,
          Fmt("delta_avg on views {0,1} non-decreasing V=2->3->4 in %d/20 "
              "held-out seeds (need >=15); V4>=V2 in %d/20; mean %.2f/%.2f/%.2f; "
              "%d training steps, time=%.0fs",
              monotone, v4_ge_v2, mean[0], mean[1], mean[2], kTrendTrainSteps,
              Seconds(t0))};
}

// --- CLI reproducibility ----------------------------------------------------

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int Cli(std::vector<std::string> args, std::string* out = nullptr) {
  args.insert(args.begin(), "mvtap");
  std::ostringstream o, e;
  const int code = RunCli(args, o, e);
  if (out != nullptr) *out = o.str();
  if (code != 0) std::fprintf(stderr, "%s", e.str().c_str());
  return code;
}

// Runs every pipeline into `dir`, returns false on any command failure.
bool RunPipelines(const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto p = [&](const std::string& name) { return (dir / name).string(); };
  std::ofstream(p("manifest.json"))
      << R"({"output_dir": ")" << p("run")
      << R"(", "scene": {"views": 4, "frames": 6, "points": 8, "seed": 9},
           "weights_seed": 2, "tracker": {"dim": 16, "blocks": 1},
           "views": {"k": 3, "strategy": "random", "seed": 4},
           "refine": {"when": "window", "window": 3, "ransac": true},
           "occ_top": 0.5, "per_view": true})";
  std::string init_out;
  const bool ok =
      Cli({"run", "--manifest", p("manifest.json")}) == 0 &&
      Cli({"gen", "--views", "3", "--frames", "5", "--points", "8", "--seed",
           "6", "-o", p("s.mvt"), "--json", p("s.json")}) == 0 &&
      Cli({"overfit", "--scene", p("s.mvt"), "--steps", "5", "--dim", "8",
           "--blocks", "1", "-o", p("w.mvt"), "--history", p("h.tsv")}) == 0 &&
      Cli({"track", "--scene", p("s.mvt"), "--weights", p("w.mvt"), "-o",
           p("t.mvt"), "--json", p("t.json")}) == 0 &&
      Cli({"refine", "--tracks", p("t.mvt"), "--scene", p("s.mvt"), "--mode",
           "window", "--window", "2", "--ransac", "-o", p("r.mvt")}) == 0 &&
      Cli({"eval", "--tracks", p("t.mvt"), "--scene", p("s.mvt"), "--refine",
           "final", "--records", p("e.json"), "--series", p("e.tsv"), "--svg",
           p("e.svg")}) == 0 &&
      Cli({"report", "--scene", p("s.mvt"), "--tracks", p("t.mvt"), "--tracks",
           p("r.mvt"), "--out-dir", p("report")}) == 0 &&
      Cli({"init-query", "--scene", p("s.mvt"), "--all"}, &init_out) == 0;
  std::ofstream(p("init_query.txt")) << init_out;
  return ok;
}

std::map<std::string, std::string> Snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = Slurp(e.path());
  }
  return files;
}

// Every pipeline runs twice into the same directory; all outputs must match.
Outcome ReproducibilitySuite() {
  const fs::path dir = fs::temp_directory_path() / "mvtap_acceptance_repro";
  if (!RunPipelines(dir)) return {false, "a pipeline command failed"};
  const auto first = Snapshot(dir);
  if (!RunPipelines(dir)) return {false, "a pipeline command failed on re-run"};
  const auto second = Snapshot(dir);
  fs::remove_all(dir);
  int differ = 0;
  std::string first_diff;
  for (const auto& [name, bytes] : first) {
    const auto it = second.find(name);
    if (it == second.end() || it->second != bytes) {
      ++differ;
      if (first_diff.empty()) first_diff = name;
    }
  }
  const bool pass = differ == 0 && first.size() == second.size() && first.size() >= 15;
  return {pass, Fmt("%zu output files compared across two runs, %d differ%s%s",
                    first.size(), differ, first_diff.empty() ? "" : " first: ",
                    first_diff.c_str())};
}

}  // namespace
}  // namespace mvtap

// Optional arguments name the criteria to run; by default all of them run.
int main(int argc, char** argv) {
  using mvtap::Outcome;
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"geometry", mvtap::GeometrySuite},
      {"triangulation", mvtap::TriangulationSuite},
      {"correlation", mvtap::CorrelationSuite},
      {"attention_invariants", mvtap::AttentionSuite},
      {"gradient_checks", mvtap::GradientSuite},
      {"metric_oracle", mvtap::MetricOracleSuite},
      {"overfit_harness", mvtap::OverfitSuite},
      {"refinement", mvtap::RefinementSuite},
      {"query_initialization", mvtap::QueryInitSuite},
      {"view_count_trend", mvtap::ViewTrendSuite},
      {"cli_reproducibility", mvtap::ReproducibilitySuite},
  };
  const std::vector<std::string> only(argv + 1, argv + argc);
  int failed = 0, ran = 0;
  for (const auto& [name, run] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) {
      continue;
    }
    ++ran;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %-22s %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
