#include "mvtap/correlation.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "mvtap/error.h"

namespace mvtap {

FeatureMap::FeatureMap(int height, int width, int channels, double stride)
    : height_(height),
      width_(width),
      channels_(channels),
      stride_(stride),
      data_(static_cast<size_t>(height) * width * channels, 0.0) {
  if (height < 1 || width < 1 || channels < 1 || !(stride > 0.0)) {
    throw Error(ErrorCode::kInvalidConfig, "feature map dimensions must be >= 1");
  }
}

FeatureVolume FeatureVolume::SelectViews(const std::vector<int>& views) const {
  FeatureVolume out;
  out.views = static_cast<int>(views.size());
  out.frames = frames;
  for (int v : views) {
    for (int t = 0; t < frames; ++t) out.maps.push_back(at(v, t));
  }
  return out;
}

Eigen::VectorXd BilinearSampleGrid(const FeatureMap& fm, double gx,
                                   double gy) {
  gx = std::clamp(gx, 0.0, static_cast<double>(fm.width() - 1));
  gy = std::clamp(gy, 0.0, static_cast<double>(fm.height() - 1));
  const int x0 = std::min(static_cast<int>(std::floor(gx)), fm.width() - 1);
  const int y0 = std::min(static_cast<int>(std::floor(gy)), fm.height() - 1);
  const int x1 = std::min(x0 + 1, fm.width() - 1);
  const int y1 = std::min(y0 + 1, fm.height() - 1);
  const double ax = gx - x0;
  const double ay = gy - y0;
  Eigen::VectorXd out = (1 - ax) * (1 - ay) * fm.cell(y0, x0);
  if (ax > 0) out += ax * (1 - ay) * fm.cell(y0, x1);
  if (ay > 0) out += (1 - ax) * ay * fm.cell(y1, x0);
  if (ax > 0 && ay > 0) out += ax * ay * fm.cell(y1, x1);
  return out;
}

Eigen::VectorXd BilinearSample(const FeatureMap& fm, const Pixel& xy) {
  return BilinearSampleGrid(fm, xy.x() / fm.stride(), xy.y() / fm.stride());
}

Eigen::MatrixXd SampleNormalizedPatch(const FeatureMap& fm,
                                      const Pixel& center, int radius) {
  const int side = 2 * radius + 1;
  const double gx = center.x() / fm.stride();
  const double gy = center.y() / fm.stride();
  Eigen::MatrixXd patch(side * side, fm.channels());
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      Eigen::VectorXd f = BilinearSampleGrid(fm, gx + dx, gy + dy);
      const double norm = f.norm();
      if (norm > 0.0) f /= norm;
      patch.row((dy + radius) * side + (dx + radius)) = f.transpose();
    }
  }
  return patch;
}

CorrTensor Local4dCorrelation(const FeatureMap& target,
                              const FeatureMap& query_frame, const Pixel& p,
                              const Pixel& q, int radius_p, int radius_q) {
  if (radius_p < 0 || radius_q < 0) {
    throw Error(ErrorCode::kInvalidConfig, "correlation radii must be >= 0");
  }
  if (target.channels() != query_frame.channels()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "feature maps differ in channel count");
  }
  const Eigen::MatrixXd a = SampleNormalizedPatch(target, p, radius_p);
  const Eigen::MatrixXd b = SampleNormalizedPatch(query_frame, q, radius_q);
  return {radius_p, radius_q, a * b.transpose()};
}

Eigen::VectorXd FourierEncode(const Pixel& offset) {
  Eigen::VectorXd out(kFourierWidth);
  for (int c = 0; c < 2; ++c) {
    for (int k = 0; k < kFourierFrequencies; ++k) {
      const double w = std::ldexp(1.0, k) / 64.0;
      out(c * 2 * kFourierFrequencies + 2 * k) = std::sin(w * offset(c));
      out(c * 2 * kFourierFrequencies + 2 * k + 1) = std::cos(w * offset(c));
    }
  }
  return out;
}

void FillTokenInput(const Eigen::MatrixXd& corr, const Pixel& pos_offset,
                    Eigen::Ref<Eigen::RowVectorXd> row) {
  const Eigen::Index n = corr.size();
  if (row.size() != n + kFourierWidth) {
    throw Error(ErrorCode::kDimensionMismatch,
                "token input needs " + std::to_string(n + kFourierWidth) +
                    " entries, got " + std::to_string(row.size()));
  }
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < corr.rows(); ++i) {
    for (Eigen::Index j = 0; j < corr.cols(); ++j) row(k++) = corr(i, j);
  }
  row.tail(kFourierWidth) = FourierEncode(pos_offset).transpose();
}

Eigen::VectorXd Tokenize(const CorrTensor& corr, const Pixel& pos_offset,
                         const nn::Linear& projection) {
  const Eigen::Index n = corr.values.size() + kFourierWidth;
  if (projection.in() != n) {
    throw Error(ErrorCode::kDimensionMismatch,
                "token projection expects " + std::to_string(projection.in()) +
                    " inputs, correlation provides " + std::to_string(n));
  }
  Eigen::RowVectorXd row(n);
  FillTokenInput(corr.values, pos_offset, row);
  return projection.Forward(row).row(0).transpose();
}

}  // namespace mvtap
