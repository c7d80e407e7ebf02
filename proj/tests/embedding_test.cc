#include "mvtap/embedding.h"

#include <cmath>
#include <random>
#include <set>

#include <Eigen/Geometry>
#include <gtest/gtest.h>

#include "mvtap/error.h"
#include "mvtap/scene_gen.h"

namespace mvtap {
namespace {

TEST(RayFieldTest, StaticTrajectoryGivesConstantRays) {
  const Camera cam = Camera::LookAt(MakeIntrinsics(64, 32, 24), {10, 2, 3},
                                    Eigen::Vector3d::Zero());
  const CameraRig rig = CameraRig::Static({cam}, 5);
  const TrackDims dims{1, 5, 2};
  std::vector<Pixel> xy(dims.size());
  for (int t = 0; t < 5; ++t) {
    xy[dims.index(0, t, 0)] = Pixel(3, 4);
    xy[dims.index(0, t, 1)] = Pixel(30, 14);
  }
  const RayField rf = ComputeRayField(rig, dims, xy);
  for (int t = 1; t < 5; ++t) {
    for (int n = 0; n < 2; ++n) {
      EXPECT_EQ(rf.at(0, t, n).AsVector(), rf.at(0, 0, n).AsVector());
    }
  }
}

TEST(RayFieldTest, RaysOfOnePointIntersect) {
  SceneConfig c;
  c.seed = 6;
  const Scene s = GenerateScene(c);
  const MultiViewTracks gt = RenderGroundTruth(s);
  const RayField rf = ComputeRayField(s.cameras, gt);
  ASSERT_EQ(rf.AsMatrix().rows(), static_cast<long>(gt.dims.size()));
  ASSERT_EQ(rf.AsMatrix().cols(), 6);
  for (int t = 0; t < c.frames; ++t) {
    for (int n = 0; n < c.points; ++n) {
      for (int v = 1; v < c.views; ++v) {
        EXPECT_NEAR(ReciprocalProduct(rf.at(0, t, n), rf.at(v, t, n)), 0.0, 1e-9);
      }
      for (int v = 0; v < c.views; ++v) {
        const PluckerRay& r = rf.at(v, t, n);
        EXPECT_NEAR(r.direction.norm(), 1.0, 1e-9);
        EXPECT_NEAR(r.direction.dot(r.moment), 0.0, 1e-9);
      }
    }
  }
}

TEST(RayFieldTest, RigMismatch) {
  const Camera cam = Camera::LookAt(MakeIntrinsics(64, 32, 24), {10, 2, 3},
                                    Eigen::Vector3d::Zero());
  const CameraRig rig = CameraRig::Static({cam}, 5);
  const TrackDims dims{2, 5, 1};
  try {
    ComputeRayField(rig, dims, std::vector<Pixel>(dims.size(), Pixel::Zero()));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
}

TEST(RayFieldTest, RigidWorldTransformPreservesInvariants) {
  SceneConfig c;
  c.seed = 9;
  const Scene s = GenerateScene(c);
  const MultiViewTracks gt = RenderGroundTruth(s);
  // World change p' = Q p + u; camera (R, t) becomes (R Q^T, t - R Q^T u).
  const Eigen::Matrix3d Q =
      Eigen::AngleAxisd(0.7, Eigen::Vector3d(1, 2, 3).normalized()).toRotationMatrix();
  const Eigen::Vector3d u(0.5, -1.0, 2.0);
  std::vector<Camera> moved;
  for (int v = 0; v < c.views; ++v) {
    const Camera& cam = s.cameras.at(v, 0);
    const Eigen::Matrix3d R = cam.R() * Q.transpose();
    moved.emplace_back(cam.K(), R, cam.t() - R * u);
  }
  const CameraRig rig = CameraRig::Static(moved, c.frames);
  for (int v = 0; v < c.views; ++v) {
    for (int t = 0; t < c.frames; t += 5) {
      for (int n = 0; n < c.points; n += 7) {
        const Pixel p = Project(rig.at(v, t), Q * s.point(n, t) + u).pixel;
        EXPECT_LT((p - gt.at(v, t, n)).norm(), 1e-9);
      }
    }
  }
  const RayField a = ComputeRayField(s.cameras, gt);
  const RayField b = ComputeRayField(rig, gt);
  for (int t = 0; t < c.frames; ++t) {
    for (int n = 0; n < c.points; ++n) {
      EXPECT_NEAR(b.at(0, t, n).direction.dot(b.at(0, t, n).moment), 0, 1e-9);
      EXPECT_NEAR(ReciprocalProduct(a.at(0, t, n), a.at(1, t, (n + 1) % c.points)),
                  ReciprocalProduct(b.at(0, t, n), b.at(1, t, (n + 1) % c.points)),
                  1e-9);
    }
  }
}

TEST(PluckerEmbeddingTest, ZeroWeightsGiveZero) {
  const PluckerMlp mlp(8);
  const Eigen::MatrixXd rays = Eigen::MatrixXd::Random(5, 6);
  EXPECT_EQ(PluckerEmbedding(rays, mlp), Eigen::MatrixXd::Zero(5, 8));
}

TEST(PluckerEmbeddingTest, IdenticalRaysIdenticalRows) {
  std::mt19937_64 rng(1);
  PluckerMlp mlp(4);
  mlp.hidden.InitRandom(rng);
  mlp.out.InitRandom(rng);
  Eigen::MatrixXd rays(3, 6);
  rays.row(0) << 0, 0, 1, 0, 1, 0;
  rays.row(1) = rays.row(0);
  rays.row(2) << 1, 0, 0, 0, 0, 0;
  const Eigen::MatrixXd e = PluckerEmbedding(rays, mlp);
  EXPECT_EQ(e.row(0), e.row(1));
  EXPECT_NE(e.row(0), e.row(2));
}

TEST(PluckerEmbeddingTest, MatchesHandComputation) {
  PluckerMlp mlp(1);  // 6 -> 2 -> 1
  mlp.hidden.weight.setZero();
  mlp.hidden.weight(0, 0) = 1.0;   // h0 = d_x
  mlp.hidden.weight(5, 1) = -2.0;  // h1 = -2 m_z + 0.5
  mlp.hidden.bias << 0.0, 0.5;
  mlp.out.weight << 3.0, 1.0;
  mlp.out.bias << -1.0;
  Eigen::MatrixXd ray(1, 6);
  ray << 0.6, 0.0, 0.8, 0.1, 0.2, 0.25;
  auto gelu = [](double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); };
  const double expect = 3.0 * gelu(0.6) + gelu(-2.0 * 0.25 + 0.5) - 1.0;
  EXPECT_NEAR(PluckerEmbedding(ray, mlp)(0, 0), expect, 1e-12);
}

TEST(PluckerEmbeddingTest, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(2);
  PluckerMlp mlp(3);
  mlp.hidden.InitRandom(rng);
  mlp.out.InitRandom(rng);
  const Eigen::MatrixXd rays = Eigen::MatrixXd::Random(4, 6);
  const Eigen::MatrixXd dy = Eigen::MatrixXd::Random(4, 3);
  PluckerMlpCache cache;
  PluckerEmbedding(rays, mlp, &cache);
  PluckerMlp grad(3);
  PluckerEmbeddingBackward(mlp, cache, dy, &grad);
  const double eps = 1e-6;
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) {
      PluckerMlp p = mlp, m = mlp;
      p.hidden.weight(i, j) += eps;
      m.hidden.weight(i, j) -= eps;
      const double fd = ((PluckerEmbedding(rays, p) - PluckerEmbedding(rays, m))
                             .cwiseProduct(dy)
                             .sum()) /
                        (2 * eps);
      EXPECT_NEAR(grad.hidden.weight(i, j), fd, 1e-7);
    }
  }
}

TEST(SinusoidalEncodingTest, ZeroTime) {
  const Eigen::VectorXd e = SinusoidalEncoding(0, 8);
  for (int k = 0; k < 4; ++k) {
    EXPECT_EQ(e(2 * k), 0.0);
    EXPECT_EQ(e(2 * k + 1), 1.0);
  }
}

TEST(SinusoidalEncodingTest, WavelengthsAndBounds) {
  const int d = 16;
  for (double t : {0.0, 1.0, 7.0, 123.0}) {
    const Eigen::VectorXd e = SinusoidalEncoding(t, d);
    for (int k = 0; k < d / 2; ++k) {
      const double angle = t / std::pow(10000.0, 2.0 * k / d);
      EXPECT_NEAR(e(2 * k), std::sin(angle), 1e-12);
      EXPECT_NEAR(e(2 * k + 1), std::cos(angle), 1e-12);
    }
    EXPECT_LE(e.cwiseAbs().maxCoeff(), 1.0);
  }
}

TEST(SinusoidalEncodingTest, InjectiveOverFrames) {
  std::vector<Eigen::VectorXd> codes;
  for (int t = 0; t < 1024; ++t) codes.push_back(SinusoidalEncoding(t, 64));
  double min_gap = 1e9;
  for (int a = 0; a < 1024; ++a) {
    for (int b = a + 1; b < 1024; ++b) {
      min_gap = std::min(min_gap, (codes[a] - codes[b]).norm());
    }
  }
  EXPECT_GT(min_gap, 1e-3);
}

TEST(SinusoidalEncodingTest, OddDimension) {
  try {
    SinusoidalEncoding(1, 7);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kOddDimension);
  }
}

}  // namespace
}  // namespace mvtap
