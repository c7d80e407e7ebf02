#include "mvtap/baselines.h"

#include <algorithm>
#include <limits>
#include <optional>
#include <string>

#include "mvtap/error.h"

namespace mvtap {
namespace {

// Refines one (t, n) column in place. Returns true when a 3D point was found.
bool RefineEntry(const TrackPrediction& in, const CameraRig& cameras,
                 const RefineMode& mode, int t, int n, TrackPrediction* out) {
  const TrackDims& d = in.dims;
  std::vector<Observation> obs;
  for (int v = 0; v < d.views; ++v) {
    if (mode.occluded_only && in.predicted_occluded(v, t, n)) continue;
    obs.push_back({cameras.at(v, t), in.at(v, t, n)});
  }
  if (static_cast<int>(obs.size()) < std::max(2, mode.min_views)) return false;

  std::optional<RansacParams> ransac;
  if (mode.use_ransac) {
    ransac = mode.ransac;
    ransac->seed = mode.ransac.seed ^ d.index(0, t, n);
  }
  Eigen::Vector3d point;
  try {
    const Triangulation tri = Triangulate(obs, ransac);
    const long inliers = std::count(tri.inliers.begin(), tri.inliers.end(), true);
    if (inliers < mode.min_views) return false;
    point = tri.point;
  } catch (const Error&) {
    return false;
  }
  for (int v = 0; v < d.views; ++v) {
    if (mode.occluded_only && !in.predicted_occluded(v, t, n)) continue;
    const Camera& cam = cameras.at(v, t);
    const Eigen::Vector3d h = cam.K() * (cam.R() * point + cam.t());
    if (h.z() <= 1e-12) continue;
    out->at(v, t, n) = Pixel(h.x() / h.z(), h.y() / h.z());
  }
  return true;
}

}  // namespace

void RefineMode::Validate() const {
  if (window < 1) throw Error(ErrorCode::kInvalidConfig, "window must be >= 1");
  if (min_views < 2) {
    throw Error(ErrorCode::kInvalidConfig, "min views must be >= 2");
  }
}

TrackPrediction TriangulationRefine(const TrackPrediction& tracks,
                                    const CameraRig& cameras,
                                    const RefineMode& mode,
                                    RefineStats* stats) {
  mode.Validate();
  const TrackDims& d = tracks.dims;
  if (d.views < 2 || cameras.views() < 2) {
    throw Error(ErrorCode::kInsufficientObservations,
                "triangulation refinement needs at least 2 views");
  }
  if (cameras.views() != d.views || cameras.frames() != d.frames) {
    throw Error(ErrorCode::kDimensionMismatch,
                "camera rig does not match the tracks");
  }
  TrackPrediction out = tracks;
  RefineStats local;
  RefineStats& s = stats != nullptr ? *stats : local;
  const int window = mode.when == RefineWhen::kFinal
                         ? std::max(1, d.frames)
                         : std::min(mode.window, std::max(1, d.frames));
  // Each window is finalized as soon as its last frame is available; the
  // lifting is per frame, so a completed prediction refines identically in
  // both modes.
  for (int start = 0; start < d.frames; start += window) {
    const int end = std::min(d.frames, start + window);
    for (int t = start; t < end; ++t) {
      for (int n = 0; n < d.points; ++n) {
        if (RefineEntry(tracks, cameras, mode, t, n, &out)) {
          ++s.refined;
        } else {
          ++s.kept;
        }
      }
    }
    ++s.windows;
  }
  return out;
}

std::vector<Correspondence> QueryInitFeature(const FeatureVolume& features,
                                             const ViewQuery& query,
                                             bool restrict_to_query_frame) {
  const Eigen::VectorXd fq =
      BilinearSample(features.at(query.view, query.frame), query.xy);
  std::vector<Correspondence> out;
  for (int v = 0; v < features.views; ++v) {
    if (v == query.view) continue;
    Correspondence best{v, 0, Pixel::Zero(), true,
                        -std::numeric_limits<double>::infinity()};
    const int t0 = restrict_to_query_frame ? query.frame : 0;
    const int t1 = restrict_to_query_frame ? query.frame + 1 : features.frames;
    for (int t = t0; t < t1; ++t) {
      const FeatureMap& fm = features.at(v, t);
      for (int r = 0; r < fm.height(); ++r) {
        for (int c = 0; c < fm.width(); ++c) {
          const double score = fq.dot(fm.cell(r, c));
          // Scan order is (t, row, col); strict > keeps the first maximum.
          if (score > best.score) {
            best.frame = t;
            best.xy = Pixel(c * fm.stride(), r * fm.stride());
            best.score = score;
          }
        }
      }
    }
    out.push_back(best);
  }
  return out;
}

std::vector<Correspondence> QueryInitDepth(double depth,
                                           const CameraRig& cameras,
                                           const ViewQuery& query) {
  const Eigen::Vector3d p =
      Unproject(cameras.at(query.view, query.frame), query.xy, depth);
  std::vector<Correspondence> out;
  for (int v = 0; v < cameras.views(); ++v) {
    if (v == query.view) continue;
    const Camera& cam = cameras.at(v, query.frame);
    const Eigen::Vector3d h = cam.K() * (cam.R() * p + cam.t());
    Correspondence c{v, query.frame, Pixel::Zero(), h.z() > 1e-12, h.z()};
    if (std::abs(h.z()) > 1e-12) c.xy = Pixel(h.x() / h.z(), h.y() / h.z());
    out.push_back(c);
  }
  return out;
}

}  // namespace mvtap
