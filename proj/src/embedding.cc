#include "mvtap/embedding.h"

#include <cmath>
#include <string>

#include "mvtap/error.h"

namespace mvtap {

Eigen::MatrixXd RayField::AsMatrix() const {
  Eigen::MatrixXd m(rays.size(), 6);
  for (size_t i = 0; i < rays.size(); ++i) {
    m.row(i) = rays[i].AsVector().transpose();
  }
  return m;
}

RayField ComputeRayField(const CameraRig& cameras, const TrackDims& dims,
                         const std::vector<Pixel>& xy) {
  if (cameras.views() != dims.views || cameras.frames() != dims.frames ||
      xy.size() != dims.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "camera rig is " + std::to_string(cameras.views()) + "x" +
                    std::to_string(cameras.frames()) + ", tracks are " +
                    std::to_string(dims.views) + "x" +
                    std::to_string(dims.frames));
  }
  RayField field{dims, {}};
  field.rays.reserve(dims.size());
  for (int v = 0; v < dims.views; ++v) {
    for (int t = 0; t < dims.frames; ++t) {
      const Camera& cam = cameras.at(v, t);
      for (int n = 0; n < dims.points; ++n) {
        field.rays.push_back(PixelRay(cam, xy[dims.index(v, t, n)]));
      }
    }
  }
  return field;
}

RayField ComputeRayField(const CameraRig& cameras,
                         const MultiViewTracks& tracks) {
  return ComputeRayField(cameras, tracks.dims, tracks.xy);
}

Eigen::MatrixXd PluckerEmbedding(const Eigen::MatrixXd& rays,
                                 const PluckerMlp& mlp,
                                 PluckerMlpCache* cache) {
  if (rays.cols() != 6 || mlp.hidden.in() != 6 ||
      mlp.hidden.out() != mlp.out.in()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "Plücker MLP must map 6 -> hidden -> d");
  }
  Eigen::MatrixXd pre = mlp.hidden.Forward(rays);
  Eigen::MatrixXd act = nn::Gelu(pre);
  Eigen::MatrixXd y = mlp.out.Forward(act);
  if (cache != nullptr) {
    cache->input = rays;
    cache->pre = std::move(pre);
    cache->act = std::move(act);
  }
  return y;
}

void PluckerEmbeddingBackward(const PluckerMlp& mlp,
                              const PluckerMlpCache& cache,
                              const Eigen::MatrixXd& dy, PluckerMlp* grad) {
  Eigen::MatrixXd dact;
  mlp.out.Backward(cache.act, dy, &grad->out, &dact);
  const Eigen::MatrixXd dpre = dact.cwiseProduct(nn::GeluGrad(cache.pre));
  mlp.hidden.Backward(cache.input, dpre, &grad->hidden, nullptr);
}

Eigen::VectorXd SinusoidalEncoding(double t, int d) {
  if (d <= 0 || d % 2 != 0) {
    throw Error(ErrorCode::kOddDimension,
                "sinusoidal encoding needs a positive even width, got " +
                    std::to_string(d));
  }
  Eigen::VectorXd pe(d);
  for (int k = 0; k < d / 2; ++k) {
    const double angle = t / std::pow(10000.0, 2.0 * k / d);
    pe(2 * k) = std::sin(angle);
    pe(2 * k + 1) = std::cos(angle);
  }
  return pe;
}

}  // namespace mvtap
