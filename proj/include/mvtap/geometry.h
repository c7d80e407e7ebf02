#ifndef MVTAP_GEOMETRY_H_
#define MVTAP_GEOMETRY_H_

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace mvtap {

// Continuous pixel coordinate: origin at the top-left corner, x to the right,
// y downward. Out-of-frame values are legal.
using Pixel = Eigen::Vector2d;

// Pinhole camera G = K [R | t] mapping world points to pixels.
class Camera {
 public:
  // Throws kInvalidCamera unless R is a proper rotation (within 1e-9) and K
  // is upper-triangular with K(2,2) = 1 and positive focal entries.
  Camera(const Eigen::Matrix3d& K, const Eigen::Matrix3d& R,
         const Eigen::Vector3d& t);

  // Camera at `center` looking at `target` with world +z as the up hint.
  static Camera LookAt(const Eigen::Matrix3d& K, const Eigen::Vector3d& center,
                       const Eigen::Vector3d& target);

  const Eigen::Matrix3d& K() const { return K_; }
  const Eigen::Matrix3d& R() const { return R_; }
  const Eigen::Vector3d& t() const { return t_; }
  const Eigen::Matrix3d& K_inv() const { return K_inv_; }

  // Camera center o = -R^T t.
  Eigen::Vector3d center() const { return -R_.transpose() * t_; }

  // 3x4 projection matrix K [R | t].
  Eigen::Matrix<double, 3, 4> ProjectionMatrix() const;

 private:
  Eigen::Matrix3d K_;
  Eigen::Matrix3d R_;
  Eigen::Vector3d t_;
  Eigen::Matrix3d K_inv_;
};

// Intrinsics with focal f and principal point (cx, cy).
Eigen::Matrix3d MakeIntrinsics(double focal, double cx, double cy);

// Cameras indexed by (view, frame). A static rig stores one pose per view and
// answers every frame with it.
class CameraRig {
 public:
  CameraRig() = default;
  static CameraRig Static(std::vector<Camera> cameras, int frames);
  static CameraRig PerFrame(std::vector<Camera> cameras, int views,
                            int frames);

  int views() const { return views_; }
  int frames() const { return frames_; }
  bool is_static() const { return static_; }

  const Camera& at(int view, int frame) const;
  // Pose at the first frame; the reference for camera-distance sampling.
  const Camera& reference(int view) const { return at(view, 0); }

  // Sub-rig made of the listed views, in the given order.
  CameraRig Select(const std::vector<int>& views) const;

  const std::vector<Camera>& cameras() const { return cameras_; }

 private:
  int views_ = 0;
  int frames_ = 0;
  bool static_ = true;
  std::vector<Camera> cameras_;
};

struct Projection {
  Pixel pixel;
  double depth;
};

// Throws kDegenerateProjection when |depth| <= 1e-12. Negative depth means the
// point lies behind the camera.
Projection Project(const Camera& camera, const Eigen::Vector3d& point);

// Inverse of Project for depth > 0; throws kNonPositiveDepth otherwise.
Eigen::Vector3d Unproject(const Camera& camera, const Pixel& px, double depth);

struct PluckerRay {
  Eigen::Vector3d direction;  // unit length
  Eigen::Vector3d moment;     // origin x direction

  Eigen::Matrix<double, 6, 1> AsVector() const;
};

PluckerRay PixelRay(const Camera& camera, const Pixel& px);

// d1.m2 + d2.m1; zero iff the two lines are coplanar (intersect or parallel).
double ReciprocalProduct(const PluckerRay& a, const PluckerRay& b);

struct RansacParams {
  double threshold_px = 2.0;
  int iterations = 100;
  std::uint64_t seed = 0;
};

struct Observation {
  Camera camera;
  Pixel pixel;
};

struct Triangulation {
  Eigen::Vector3d point;
  std::vector<bool> inliers;
};

// Homogeneous DLT triangulation. With RANSAC, two-view minimal samples vote
// by reprojection error (and positive depth) and the winning inlier set is
// refit. When every pair fits in the iteration budget the pairs are
// enumerated instead of drawn.
//
// Throws kInsufficientObservations for fewer than two observations and
// kDegenerateConfiguration when the system is rank deficient.
Triangulation Triangulate(const std::vector<Observation>& obs,
                          const std::optional<RansacParams>& ransac);

double ReprojectionError(const Camera& camera, const Eigen::Vector3d& point,
                         const Pixel& px);

enum class ViewSampling { kNearest, kRandom, kFarthest };

// Picks k camera indices. Nearest/farthest grow the set greedily from view 0,
// scoring each candidate by its minimum center distance to the selected set.
// The result is sorted ascending. Throws kInvalidCount unless 1 <= k <= size.
std::vector<int> SampleViews(const std::vector<Camera>& cameras, int k,
                             ViewSampling strategy, std::uint64_t seed);

}  // namespace mvtap

#endif  // MVTAP_GEOMETRY_H_
