#ifndef MVTAP_SCENE_GEN_H_
#define MVTAP_SCENE_GEN_H_

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "mvtap/correlation.h"
#include "mvtap/geometry.h"
#include "mvtap/tracks.h"

namespace mvtap {

struct SceneConfig {
  int views = 4;
  int frames = 16;
  int points = 32;

  // Chained hemisphere rig.
  double radius_min = 10.0;
  double radius_max = 12.0;
  double separation_min_deg = 10.0;
  double separation_max_deg = 45.0;
  double elevation_min_deg = 10.0;
  double elevation_max_deg = 75.0;

  int height = 48;
  int width = 64;

  // Rigid clusters of `cluster_size` points translate along quadratic paths
  // whose coefficients are bounded by `motion_amplitude` world units.
  double motion_amplitude = 3.0;
  int cluster_size = 8;

  int occluders = 3;
  double occluder_radius_min = 0.6;
  double occluder_radius_max = 1.2;

  // Procedural feature fields.
  int feature_channels = 32;
  int feature_stride = 4;
  double feature_sigma_cells = 2.0;
  double feature_noise = 0.01;

  std::uint64_t seed = 0;

  // Throws kInvalidConfig on violated invariants.
  void Validate() const;
  int grid_height() const { return (height + feature_stride - 1) / feature_stride; }
  int grid_width() const { return (width + feature_stride - 1) / feature_stride; }
};

struct Occluder {
  std::vector<Eigen::Vector3d> centers;  // one per frame
  double radius = 0.0;
};

struct Scene {
  SceneConfig config;
  CameraRig cameras;
  // points x frames world positions, point-major.
  std::vector<Eigen::Vector3d> point_tracks;
  std::vector<Occluder> occluders;
  Eigen::MatrixXd anchor_features;  // points x channels, unit rows

  const Eigen::Vector3d& point(int n, int t) const {
    return point_tracks[static_cast<size_t>(n) * config.frames + t];
  }
};

// Chained hemisphere cameras sharing K (focal = max(H, W), principal point at
// the image center), all looking at the origin. Throws kSamplingExhausted if a
// chained position cannot be found in 1000 attempts.
std::vector<Camera> SampleCameras(const SceneConfig& config,
                                  std::mt19937_64& rng);

// Deterministic for a given config (the seed lives in the config). Points
// that would never be visible in some view are resampled.
Scene GenerateScene(const SceneConfig& config);

// Whether the camera-to-point segment is free of occluders at frame t.
bool LineOfSightClear(const Scene& scene, const Eigen::Vector3d& camera_center,
                      const Eigen::Vector3d& point, int frame);

MultiViewTracks RenderGroundTruth(const Scene& scene);

enum class QueryMode { kFirstVisible, kRandomVisible };

// Throws kNoVisibleFrame if some point is never visible in some view.
QuerySet SampleQueries(const MultiViewTracks& gt, QueryMode mode,
                       std::uint64_t seed);

// Splat of the anchor features of points visible at (v, t), Gaussian in grid
// cells, plus noise seeded from (config seed, v, t).
FeatureMap FeatureField(const Scene& scene, int view, int frame);

FeatureVolume AllFeatureFields(const Scene& scene);

// Per-pixel depth of scene points is not rendered; this returns the camera
// depth of point n at (v, t), which is what a perfect depth map reads at the
// point's projection.
double PointDepth(const Scene& scene, int view, int frame, int point);

}  // namespace mvtap

#endif  // MVTAP_SCENE_GEN_H_
