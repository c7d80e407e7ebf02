#include "mvtap/scene_gen.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Geometry>

#include "mvtap/error.h"

namespace mvtap {
namespace {

constexpr int kCameraAttempts = 1000;
constexpr int kPointAttempts = 200;
constexpr int kPathRetries = 50;
constexpr double kPointCloudRadius = 2.5;
constexpr double kClusterRadius = 1.0;
constexpr double kOccluderRadius = 2.5;

double Deg2Rad(double deg) { return deg * std::numbers::pi / 180.0; }

std::uint64_t SplitMix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent, reproducible stream per purpose.
std::mt19937_64 Stream(std::uint64_t seed, std::uint64_t a,
                       std::uint64_t b = 0, std::uint64_t c = 0) {
  return std::mt19937_64(SplitMix(SplitMix(SplitMix(seed ^ a) + b) + c));
}

Eigen::Vector3d UniformInBall(std::mt19937_64& rng, double radius) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  while (true) {
    Eigen::Vector3d p(u(rng), u(rng), u(rng));
    if (p.squaredNorm() <= 1.0) return radius * p;
  }
}

Eigen::Vector3d UnitVector(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  while (true) {
    Eigen::Vector3d p(g(rng), g(rng), g(rng));
    const double n = p.norm();
    if (n > 1e-9) return p / n;
  }
}

double Elevation(const Eigen::Vector3d& dir) {
  return std::asin(std::clamp(dir.z(), -1.0, 1.0));
}

struct ClusterPath {
  Eigen::Vector3d origin, velocity, acceleration;
  double spin = 0.0;

  Eigen::Vector3d At(double s, const Eigen::Vector3d& offset) const {
    const Eigen::AngleAxisd rot(spin * s, Eigen::Vector3d::UnitZ());
    return origin + velocity * s + acceleration * s * s + rot * offset;
  }
};

double Phase(int frame, int frames) {
  return frames > 1 ? static_cast<double>(frame) / (frames - 1) : 0.0;
}

double SegmentPointDistance(const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                            const Eigen::Vector3d& p) {
  const Eigen::Vector3d ab = b - a;
  const double len2 = ab.squaredNorm();
  double s = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
  s = std::clamp(s, 0.0, 1.0);
  return (a + s * ab - p).norm();
}

bool VisibleSomewhere(const Scene& scene, const std::vector<Eigen::Vector3d>& track,
                      int view) {
  const SceneConfig& cfg = scene.config;
  for (int t = 0; t < cfg.frames; ++t) {
    const Camera& cam = scene.cameras.at(view, t);
    const Eigen::Vector3d h = cam.K() * (cam.R() * track[t] + cam.t());
    if (h.z() <= 1e-12) continue;
    const double x = h.x() / h.z();
    const double y = h.y() / h.z();
    if (x < 0 || y < 0 || x >= cfg.width || y >= cfg.height) continue;
    if (LineOfSightClear(scene, cam.center(), track[t], t)) return true;
  }
  return false;
}

}  // namespace

void SceneConfig::Validate() const {
  auto fail = [](const std::string& what) {
    throw Error(ErrorCode::kInvalidConfig, what);
  };
  if (views < 1 || frames < 1 || points < 1) {
    fail("views, frames and points must all be >= 1");
  }
  if (!(radius_min > 0.0) || radius_max < radius_min) {
    fail("radius range must be nonempty and positive");
  }
  if (!(separation_min_deg > 0.0) || separation_max_deg < separation_min_deg ||
      separation_max_deg >= 180.0) {
    fail("angular separation range must be nonempty within (0, 180)");
  }
  if (elevation_max_deg < elevation_min_deg || elevation_max_deg >= 90.0 ||
      elevation_min_deg < 0.0) {
    fail("elevation range must lie within [0, 90)");
  }
  if (height < 8 || width < 8) fail("image size must be at least 8x8");
  if (motion_amplitude < 0.0) fail("motion amplitude must be >= 0");
  if (cluster_size < 1) fail("cluster size must be >= 1");
  if (occluders < 0) fail("occluder count must be >= 0");
  if (occluders > 0 &&
      (!(occluder_radius_min > 0.0) || occluder_radius_max < occluder_radius_min)) {
    fail("occluder radius range must be nonempty and positive");
  }
  if (feature_channels < 1 || feature_stride < 1 ||
      !(feature_sigma_cells > 0.0) || feature_noise < 0.0) {
    fail("invalid feature field parameters");
  }
}

std::vector<Camera> SampleCameras(const SceneConfig& config,
                                  std::mt19937_64& rng) {
  config.Validate();
  const Eigen::Matrix3d K = MakeIntrinsics(
      std::max(config.height, config.width), config.width / 2.0,
      config.height / 2.0);
  std::uniform_real_distribution<double> radius(config.radius_min,
                                                config.radius_max);
  std::uniform_real_distribution<double> sep(
      Deg2Rad(config.separation_min_deg), Deg2Rad(config.separation_max_deg));
  std::uniform_real_distribution<double> azimuth(0.0, 2.0 * std::numbers::pi);
  const double el_lo = Deg2Rad(config.elevation_min_deg);
  const double el_hi = Deg2Rad(config.elevation_max_deg);
  // The first camera starts in the middle band so the chain can grow either
  // way.
  std::uniform_real_distribution<double> first_el(
      el_lo + 0.25 * (el_hi - el_lo), el_lo + 0.75 * (el_hi - el_lo));

  std::vector<Eigen::Vector3d> dirs;
  {
    const double az = azimuth(rng);
    const double el = first_el(rng);
    dirs.emplace_back(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az),
                      std::sin(el));
  }
  for (int v = 1; v < config.views; ++v) {
    const Eigen::Vector3d prev = dirs.back();
    bool found = false;
    for (int attempt = 0; attempt < kCameraAttempts && !found; ++attempt) {
      Eigen::Vector3d axis = prev.cross(UnitVector(rng));
      if (axis.norm() < 1e-6) continue;
      axis.normalize();
      const Eigen::Vector3d next =
          Eigen::AngleAxisd(sep(rng), axis) * prev;
      const double el = Elevation(next);
      if (el < el_lo || el > el_hi) continue;
      dirs.push_back(next.normalized());
      found = true;
    }
    if (!found) {
      throw Error(ErrorCode::kSamplingExhausted,
                  "no valid chained camera position for view " +
                      std::to_string(v));
    }
  }
  std::vector<Camera> cams;
  for (const auto& d : dirs) {
    cams.push_back(Camera::LookAt(K, radius(rng) * d, Eigen::Vector3d::Zero()));
  }
  return cams;
}

bool LineOfSightClear(const Scene& scene, const Eigen::Vector3d& camera_center,
                      const Eigen::Vector3d& point, int frame) {
  for (const Occluder& occ : scene.occluders) {
    if (SegmentPointDistance(camera_center, point, occ.centers[frame]) <=
        occ.radius) {
      return false;
    }
  }
  return true;
}

Scene GenerateScene(const SceneConfig& config) {
  config.Validate();
  Scene scene;
  scene.config = config;
  const int T = config.frames;
  const int N = config.points;

  auto cam_rng = Stream(config.seed, 1);
  scene.cameras = CameraRig::Static(SampleCameras(config, cam_rng), T);

  auto occ_rng = Stream(config.seed, 2);
  std::uniform_real_distribution<double> occ_radius(
      config.occluder_radius_min,
      std::max(config.occluder_radius_min, config.occluder_radius_max));
  for (int o = 0; o < config.occluders; ++o) {
    Occluder occ;
    occ.radius = occ_radius(occ_rng);
    ClusterPath path;
    path.origin = UniformInBall(occ_rng, kOccluderRadius);
    path.velocity = UniformInBall(occ_rng, config.motion_amplitude + 0.5);
    path.acceleration = UniformInBall(occ_rng, 0.5 * config.motion_amplitude);
    for (int t = 0; t < T; ++t) {
      occ.centers.push_back(path.At(Phase(t, T), Eigen::Vector3d::Zero()));
    }
    scene.occluders.push_back(std::move(occ));
  }

  auto pt_rng = Stream(config.seed, 3);
  const int clusters = std::max(1, (N + config.cluster_size - 1) / config.cluster_size);
  std::vector<ClusterPath> paths(clusters);
  auto sample_path = [&](std::mt19937_64& rng, ClusterPath* p) {
    std::uniform_real_distribution<double> spin(-1.0, 1.0);
    p->origin = UniformInBall(rng, kPointCloudRadius);
    p->velocity = UniformInBall(rng, config.motion_amplitude);
    p->acceleration = UniformInBall(rng, 0.5 * config.motion_amplitude);
    p->spin = 0.5 * config.motion_amplitude * spin(rng);
  };
  for (auto& p : paths) sample_path(pt_rng, &p);

  scene.point_tracks.resize(static_cast<size_t>(N) * T);
  std::vector<Eigen::Vector3d> track(T);
  // Draws offsets until point n is visible in every view; false if none of
  // kPointAttempts works.
  auto place = [&](int n, std::mt19937_64& rng) {
    const ClusterPath& path = paths[n % clusters];
    for (int attempt = 0; attempt < kPointAttempts; ++attempt) {
      const Eigen::Vector3d offset = UniformInBall(rng, kClusterRadius);
      for (int t = 0; t < T; ++t) track[t] = path.At(Phase(t, T), offset);
      bool ok = true;
      for (int v = 0; v < config.views && ok; ++v) {
        ok = VisibleSomewhere(scene, track, v);
      }
      if (ok) {
        std::copy(track.begin(), track.end(),
                  scene.point_tracks.begin() + static_cast<long>(n) * T);
        return true;
      }
    }
    return false;
  };
  for (int n = 0; n < N; ++n) {
    if (place(n, pt_rng)) continue;
    // The cluster path itself leaves some view; redraw it and re-place the
    // cluster's points so far.
    const int cluster = n % clusters;
    bool placed = false;
    for (int retry = 1; retry <= kPathRetries && !placed; ++retry) {
      auto retry_rng = Stream(config.seed, 5, cluster, retry);
      sample_path(retry_rng, &paths[cluster]);
      placed = true;
      for (int m = cluster; m <= n && placed; m += clusters) {
        placed = place(m, retry_rng);
      }
    }
    if (!placed) {
      throw Error(ErrorCode::kSamplingExhausted,
                  "point " + std::to_string(n) +
                      " is never visible in some view after " +
                      std::to_string(kPathRetries) + " cluster paths");
    }
  }

  auto feat_rng = Stream(config.seed, 4);
  std::normal_distribution<double> g(0.0, 1.0);
  scene.anchor_features.resize(N, config.feature_channels);
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < config.feature_channels; ++c) {
      scene.anchor_features(n, c) = g(feat_rng);
    }
    scene.anchor_features.row(n).normalize();
  }
  return scene;
}

MultiViewTracks RenderGroundTruth(const Scene& scene) {
  const SceneConfig& cfg = scene.config;
  MultiViewTracks gt({cfg.views, cfg.frames, cfg.points});
  for (int v = 0; v < cfg.views; ++v) {
    for (int t = 0; t < cfg.frames; ++t) {
      const Camera& cam = scene.cameras.at(v, t);
      const Eigen::Vector3d center = cam.center();
      for (int n = 0; n < cfg.points; ++n) {
        const Eigen::Vector3d& p = scene.point(n, t);
        Eigen::Vector3d h = cam.K() * (cam.R() * p + cam.t());
        const double z = std::abs(h.z()) > 1e-12 ? h.z() : 1e-12;
        const Pixel px(h.x() / z, h.y() / z);
        const size_t i = gt.dims.index(v, t, n);
        gt.xy[i] = px;
        const bool in_frame = h.z() > 1e-12 && px.x() >= 0 && px.y() >= 0 &&
                              px.x() < cfg.width && px.y() < cfg.height;
        gt.in_frame[i] = in_frame;
        gt.visible[i] = in_frame && LineOfSightClear(scene, center, p, t);
      }
    }
  }
  return gt;
}

QuerySet SampleQueries(const MultiViewTracks& gt, QueryMode mode,
                       std::uint64_t seed) {
  const TrackDims& d = gt.dims;
  QuerySet qs(d.views, d.points);
  auto rng = Stream(seed, 5);
  for (int v = 0; v < d.views; ++v) {
    for (int n = 0; n < d.points; ++n) {
      std::vector<int> frames;
      for (int t = 0; t < d.frames; ++t) {
        if (gt.is_visible(v, t, n)) frames.push_back(t);
      }
      if (frames.empty()) {
        throw Error(ErrorCode::kNoVisibleFrame,
                    "point " + std::to_string(n) + " is never visible in view " +
                        std::to_string(v));
      }
      int t = frames.front();
      if (mode == QueryMode::kRandomVisible) {
        std::uniform_int_distribution<size_t> pick(0, frames.size() - 1);
        t = frames[pick(rng)];
      }
      qs.at(v, n) = {t, gt.at(v, t, n)};
    }
  }
  return qs;
}

FeatureMap FeatureField(const Scene& scene, int view, int frame) {
  const SceneConfig& cfg = scene.config;
  const double stride = cfg.feature_stride;
  FeatureMap fm(cfg.grid_height(), cfg.grid_width(), cfg.feature_channels,
                stride);
  const Camera& cam = scene.cameras.at(view, frame);
  const Eigen::Vector3d center = cam.center();
  const double inv2s2 =
      1.0 / (2.0 * cfg.feature_sigma_cells * cfg.feature_sigma_cells);
  const double cutoff = 6.0 * cfg.feature_sigma_cells;
  for (int n = 0; n < cfg.points; ++n) {
    const Eigen::Vector3d& p = scene.point(n, frame);
    const Eigen::Vector3d h = cam.K() * (cam.R() * p + cam.t());
    if (h.z() <= 1e-12) continue;
    const double gx = h.x() / h.z() / stride;
    const double gy = h.y() / h.z() / stride;
    if (gx < 0 || gy < 0 || gx * stride >= cfg.width ||
        gy * stride >= cfg.height) {
      continue;
    }
    if (!LineOfSightClear(scene, center, p, frame)) continue;
    const Eigen::VectorXd anchor = scene.anchor_features.row(n).transpose();
    const int r0 = std::max(0, static_cast<int>(std::floor(gy - cutoff)));
    const int r1 = std::min(fm.height() - 1, static_cast<int>(std::ceil(gy + cutoff)));
    const int c0 = std::max(0, static_cast<int>(std::floor(gx - cutoff)));
    const int c1 = std::min(fm.width() - 1, static_cast<int>(std::ceil(gx + cutoff)));
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        const double d2 = (r - gy) * (r - gy) + (c - gx) * (c - gx);
        fm.cell(r, c) += std::exp(-d2 * inv2s2) * anchor;
      }
    }
  }
  if (cfg.feature_noise > 0.0) {
    auto rng = Stream(cfg.seed, 6, view, frame);
    std::normal_distribution<double> g(0.0, cfg.feature_noise);
    for (double& x : fm.data()) x += g(rng);
  }
  return fm;
}

FeatureVolume AllFeatureFields(const Scene& scene) {
  FeatureVolume vol;
  vol.views = scene.config.views;
  vol.frames = scene.config.frames;
  for (int v = 0; v < vol.views; ++v) {
    for (int t = 0; t < vol.frames; ++t) {
      vol.maps.push_back(FeatureField(scene, v, t));
    }
  }
  return vol;
}

double PointDepth(const Scene& scene, int view, int frame, int point) {
  const Camera& cam = scene.cameras.at(view, frame);
  return (cam.K() * (cam.R() * scene.point(point, frame) + cam.t())).z();
}

}  // namespace mvtap
