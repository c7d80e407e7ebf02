#ifndef MVTAP_EMBEDDING_H_
#define MVTAP_EMBEDDING_H_

#include <vector>

#include <Eigen/Core>

#include "mvtap/geometry.h"
#include "mvtap/layers.h"
#include "mvtap/tracks.h"

namespace mvtap {

// Plücker ray of every (view, frame, point) hypothesis.
struct RayField {
  TrackDims dims;
  std::vector<PluckerRay> rays;

  const PluckerRay& at(int v, int t, int n) const {
    return rays[dims.index(v, t, n)];
  }
  // One 6-vector [d; m] per row, in TrackDims order.
  Eigen::MatrixXd AsMatrix() const;
};

// Throws kDimensionMismatch when the rig and the tracks disagree on V or T.
RayField ComputeRayField(const CameraRig& cameras, const TrackDims& dims,
                         const std::vector<Pixel>& xy);
RayField ComputeRayField(const CameraRig& cameras,
                         const MultiViewTracks& tracks);

// Pointwise 6 -> 2d -> d MLP with a GELU hidden layer.
struct PluckerMlp {
  nn::Linear hidden;
  nn::Linear out;

  PluckerMlp() = default;
  explicit PluckerMlp(int d) : hidden(6, 2 * d), out(2 * d, d) {}
};

struct PluckerMlpCache {
  Eigen::MatrixXd input, pre, act;
};

Eigen::MatrixXd PluckerEmbedding(const Eigen::MatrixXd& rays,
                                 const PluckerMlp& mlp,
                                 PluckerMlpCache* cache = nullptr);
void PluckerEmbeddingBackward(const PluckerMlp& mlp,
                              const PluckerMlpCache& cache,
                              const Eigen::MatrixXd& dy, PluckerMlp* grad);

// Transformer sinusoid: entry 2k = sin(t / 10000^(2k/d)), entry 2k+1 = cos
// of the same angle. Throws kOddDimension for odd d.
Eigen::VectorXd SinusoidalEncoding(double t, int d);

}  // namespace mvtap

#endif  // MVTAP_EMBEDDING_H_
