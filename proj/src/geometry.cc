#include "mvtap/geometry.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "mvtap/error.h"

namespace mvtap {
namespace {

constexpr double kRotationTol = 1e-9;
constexpr double kMinDepth = 1e-12;

}  // namespace

Camera::Camera(const Eigen::Matrix3d& K, const Eigen::Matrix3d& R,
               const Eigen::Vector3d& t)
    : K_(K), R_(R), t_(t) {
  if (!K.allFinite() || !R.allFinite() || !t.allFinite()) {
    throw Error(ErrorCode::kInvalidCamera, "camera has non-finite entries");
  }
  const double ortho =
      (R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (ortho > kRotationTol || std::abs(R.determinant() - 1.0) > kRotationTol) {
    throw Error(ErrorCode::kInvalidCamera, "R is not a proper rotation");
  }
  if (K(1, 0) != 0.0 || K(2, 0) != 0.0 || K(2, 1) != 0.0 || K(2, 2) != 1.0 ||
      K(0, 0) <= 0.0 || K(1, 1) <= 0.0) {
    throw Error(ErrorCode::kInvalidCamera,
                "K must be upper-triangular with K22 = 1 and positive focals");
  }
  K_inv_ = K.inverse();
}

Camera Camera::LookAt(const Eigen::Matrix3d& K, const Eigen::Vector3d& center,
                      const Eigen::Vector3d& target) {
  const Eigen::Vector3d forward = (target - center).normalized();
  Eigen::Vector3d right = forward.cross(Eigen::Vector3d::UnitZ());
  if (right.norm() < 1e-9) {
    right = forward.cross(Eigen::Vector3d::UnitY());
  }
  right.normalize();
  const Eigen::Vector3d down = forward.cross(right);
  Eigen::Matrix3d R;
  R.row(0) = right.transpose();
  R.row(1) = down.transpose();
  R.row(2) = forward.transpose();
  return Camera(K, R, -R * center);
}

Eigen::Matrix<double, 3, 4> Camera::ProjectionMatrix() const {
  Eigen::Matrix<double, 3, 4> Rt;
  Rt.leftCols<3>() = R_;
  Rt.col(3) = t_;
  return K_ * Rt;
}

Eigen::Matrix3d MakeIntrinsics(double focal, double cx, double cy) {
  Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
  K(0, 0) = focal;
  K(1, 1) = focal;
  K(0, 2) = cx;
  K(1, 2) = cy;
  return K;
}

CameraRig CameraRig::Static(std::vector<Camera> cameras, int frames) {
  CameraRig rig;
  rig.views_ = static_cast<int>(cameras.size());
  rig.frames_ = frames;
  rig.static_ = true;
  rig.cameras_ = std::move(cameras);
  return rig;
}

CameraRig CameraRig::PerFrame(std::vector<Camera> cameras, int views,
                              int frames) {
  if (static_cast<int>(cameras.size()) != views * frames) {
    throw Error(ErrorCode::kShapeMismatch,
                "per-frame rig needs views * frames cameras");
  }
  CameraRig rig;
  rig.views_ = views;
  rig.frames_ = frames;
  rig.static_ = false;
  rig.cameras_ = std::move(cameras);
  return rig;
}

const Camera& CameraRig::at(int view, int frame) const {
  if (static_) return cameras_.at(view);
  return cameras_.at(static_cast<size_t>(view) * frames_ + frame);
}

CameraRig CameraRig::Select(const std::vector<int>& views) const {
  std::vector<Camera> picked;
  if (static_) {
    for (int v : views) picked.push_back(cameras_.at(v));
    return Static(std::move(picked), frames_);
  }
  for (int v : views) {
    for (int t = 0; t < frames_; ++t) picked.push_back(at(v, t));
  }
  return PerFrame(std::move(picked), static_cast<int>(views.size()), frames_);
}

Projection Project(const Camera& camera, const Eigen::Vector3d& point) {
  const Eigen::Vector3d h = camera.K() * (camera.R() * point + camera.t());
  if (std::abs(h.z()) <= kMinDepth) {
    throw Error(ErrorCode::kDegenerateProjection,
                "point lies on the camera plane");
  }
  return {Pixel(h.x() / h.z(), h.y() / h.z()), h.z()};
}

Eigen::Vector3d Unproject(const Camera& camera, const Pixel& px,
                          double depth) {
  if (!(depth > 0.0)) {
    throw Error(ErrorCode::kNonPositiveDepth,
                "unproject needs depth > 0, got " + std::to_string(depth));
  }
  const Eigen::Vector3d cam = depth * (camera.K_inv() * px.homogeneous());
  return camera.R().transpose() * (cam - camera.t());
}

Eigen::Matrix<double, 6, 1> PluckerRay::AsVector() const {
  Eigen::Matrix<double, 6, 1> v;
  v << direction, moment;
  return v;
}

PluckerRay PixelRay(const Camera& camera, const Pixel& px) {
  PluckerRay ray;
  ray.direction =
      (camera.R().transpose() * (camera.K_inv() * px.homogeneous()))
          .normalized();
  ray.moment = camera.center().cross(ray.direction);
  return ray;
}

double ReciprocalProduct(const PluckerRay& a, const PluckerRay& b) {
  return a.direction.dot(b.moment) + b.direction.dot(a.moment);
}

double ReprojectionError(const Camera& camera, const Eigen::Vector3d& point,
                         const Pixel& px) {
  const Projection p = Project(camera, point);
  return (p.pixel - px).norm();
}

namespace {

Eigen::Vector3d SolveDlt(const std::vector<Observation>& obs,
                         const std::vector<int>& use) {
  // Rays from a single center meet only at that center.
  double baseline = 0.0, scale = 1.0;
  for (int i : use) {
    const Eigen::Vector3d c = obs[i].camera.center();
    scale = std::max(scale, c.norm());
    baseline = std::max(baseline, (c - obs[use.front()].camera.center()).norm());
  }
  if (baseline <= 1e-12 * scale) {
    throw Error(ErrorCode::kDegenerateConfiguration, "all camera centers coincide");
  }
  Eigen::MatrixXd A(2 * use.size(), 4);
  int row = 0;
  for (int i : use) {
    const auto P = obs[i].camera.ProjectionMatrix();
    const Pixel& x = obs[i].pixel;
    A.row(row) = x.x() * P.row(2) - P.row(0);
    A.row(row + 1) = x.y() * P.row(2) - P.row(1);
    // Row scaling leaves the solution unchanged and balances the views.
    for (int r = row; r < row + 2; ++r) {
      const double n = A.row(r).norm();
      if (n > 0.0) A.row(r) /= n;
    }
    row += 2;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const Eigen::Vector4d s = [&] {
    Eigen::Vector4d out = Eigen::Vector4d::Zero();
    const auto& sv = svd.singularValues();
    for (int i = 0; i < sv.size() && i < 4; ++i) out(i) = sv(i);
    return out;
  }();
  // A consistent configuration has a one-dimensional null space; a second
  // vanishing singular value means the rays cannot pin down a point.
  if (s(0) <= 0.0 || s(2) <= 1e-10 * s(0)) {
    throw Error(ErrorCode::kDegenerateConfiguration,
                "DLT system is rank deficient");
  }
  const Eigen::Vector4d X = svd.matrixV().col(3);
  if (std::abs(X(3)) <= 1e-14 * X.head<3>().norm()) {
    throw Error(ErrorCode::kDegenerateConfiguration,
                "triangulated point is at infinity");
  }
  return X.head<3>() / X(3);
}

bool IsInlier(const Observation& o, const Eigen::Vector3d& point,
              double threshold) {
  const Eigen::Vector3d h = o.camera.K() * (o.camera.R() * point + o.camera.t());
  if (h.z() <= kMinDepth) return false;
  const Pixel px(h.x() / h.z(), h.y() / h.z());
  return (px - o.pixel).norm() <= threshold;
}

}  // namespace

Triangulation Triangulate(const std::vector<Observation>& obs,
                          const std::optional<RansacParams>& ransac) {
  const int n = static_cast<int>(obs.size());
  if (n < 2) {
    throw Error(ErrorCode::kInsufficientObservations,
                "triangulation needs at least 2 observations, got " +
                    std::to_string(n));
  }
  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  if (!ransac) {
    return {SolveDlt(obs, all), std::vector<bool>(n, true)};
  }
  if (!(ransac->threshold_px > 0.0) || ransac->iterations < 1) {
    throw Error(ErrorCode::kInvalidConfig,
                "RANSAC needs threshold > 0 and iterations >= 1");
  }

  std::vector<std::pair<int, int>> samples;
  const long pairs = static_cast<long>(n) * (n - 1) / 2;
  if (pairs <= ransac->iterations) {
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) samples.emplace_back(i, j);
    }
  } else {
    std::mt19937_64 rng(ransac->seed);
    std::uniform_int_distribution<int> pick(0, n - 1);
    for (int it = 0; it < ransac->iterations; ++it) {
      const int i = pick(rng);
      int j = pick(rng);
      while (j == i) j = pick(rng);
      samples.emplace_back(std::min(i, j), std::max(i, j));
    }
  }

  std::vector<bool> best_mask;
  int best_count = 0;
  for (const auto& [i, j] : samples) {
    Eigen::Vector3d candidate;
    try {
      candidate = SolveDlt(obs, {i, j});
    } catch (const Error&) {
      continue;
    }
    std::vector<bool> mask(n);
    int count = 0;
    for (int k = 0; k < n; ++k) {
      mask[k] = IsInlier(obs[k], candidate, ransac->threshold_px);
      count += mask[k];
    }
    if (count > best_count) {
      best_count = count;
      best_mask = std::move(mask);
    }
  }
  if (best_count < 2) {
    throw Error(ErrorCode::kDegenerateConfiguration,
                "no two-view consensus within the RANSAC threshold");
  }
  std::vector<int> inliers;
  for (int k = 0; k < n; ++k) {
    if (best_mask[k]) inliers.push_back(k);
  }
  return {SolveDlt(obs, inliers), best_mask};
}

std::vector<int> SampleViews(const std::vector<Camera>& cameras, int k,
                             ViewSampling strategy, std::uint64_t seed) {
  const int n = static_cast<int>(cameras.size());
  if (k < 1 || k > n) {
    throw Error(ErrorCode::kInvalidCount,
                "cannot sample " + std::to_string(k) + " of " +
                    std::to_string(n) + " views");
  }
  std::vector<int> picked;
  if (strategy == ViewSampling::kRandom) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    picked.assign(order.begin(), order.begin() + k);
  } else {
    std::vector<Eigen::Vector3d> centers;
    for (const Camera& c : cameras) centers.push_back(c.center());
    std::vector<bool> taken(n, false);
    picked.push_back(0);
    taken[0] = true;
    const bool far = strategy == ViewSampling::kFarthest;
    while (static_cast<int>(picked.size()) < k) {
      int best = -1;
      double best_score = 0.0;
      for (int c = 0; c < n; ++c) {
        if (taken[c]) continue;
        double d = std::numeric_limits<double>::infinity();
        for (int s : picked) d = std::min(d, (centers[c] - centers[s]).norm());
        // Strict comparison keeps the lowest index on ties.
        if (best < 0 || (far ? d > best_score : d < best_score)) {
          best = c;
          best_score = d;
        }
      }
      picked.push_back(best);
      taken[best] = true;
    }
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

}  // namespace mvtap
