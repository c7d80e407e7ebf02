#ifndef MVTAP_CORRELATION_H_
#define MVTAP_CORRELATION_H_

#include <vector>

#include <Eigen/Core>

#include "mvtap/geometry.h"
#include "mvtap/layers.h"

namespace mvtap {

// Dense feature grid of height x width cells with `channels` features each.
// Cell (row, col) sits at pixel (col * stride, row * stride).
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(int height, int width, int channels, double stride);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  double stride() const { return stride_; }

  Eigen::Map<Eigen::VectorXd> cell(int row, int col) {
    return Eigen::Map<Eigen::VectorXd>(data_.data() + offset(row, col),
                                       channels_);
  }
  Eigen::Map<const Eigen::VectorXd> cell(int row, int col) const {
    return Eigen::Map<const Eigen::VectorXd>(data_.data() + offset(row, col),
                                             channels_);
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool operator==(const FeatureMap&) const = default;

 private:
  size_t offset(int row, int col) const {
    return (static_cast<size_t>(row) * width_ + col) * channels_;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  double stride_ = 1.0;
  std::vector<double> data_;
};

// Bilinear sample at a pixel position; grid coordinates outside the map are
// clamped to the border.
Eigen::VectorXd BilinearSample(const FeatureMap& fm, const Pixel& xy);

// Same, addressed in (fractional) grid units.
Eigen::VectorXd BilinearSampleGrid(const FeatureMap& fm, double gx, double gy);

// Features sampled on the (2r+1)^2 integer grid offsets around `center`,
// row-major over (dy, dx), each row scaled to unit norm. Zero rows stay zero.
Eigen::MatrixXd SampleNormalizedPatch(const FeatureMap& fm,
                                      const Pixel& center, int radius);

// Local 4D correlation between the neighborhood of p in `target` and the
// neighborhood of q in `query_frame`. Entry (i, j) is the cosine similarity of
// offset i around p and offset j around q.
struct CorrTensor {
  int radius_p = 0;
  int radius_q = 0;
  Eigen::MatrixXd values;  // (2 r_p + 1)^2 x (2 r_q + 1)^2
};

CorrTensor Local4dCorrelation(const FeatureMap& target,
                              const FeatureMap& query_frame, const Pixel& p,
                              const Pixel& q, int radius_p, int radius_q);

inline int CorrelationSize(int radius_p, int radius_q) {
  return (2 * radius_p + 1) * (2 * radius_p + 1) * (2 * radius_q + 1) *
         (2 * radius_q + 1);
}

// Feature maps for every (view, frame) of a multi-view clip.
struct FeatureVolume {
  int views = 0;
  int frames = 0;
  std::vector<FeatureMap> maps;  // view-major

  const FeatureMap& at(int v, int t) const {
    return maps[static_cast<size_t>(v) * frames + t];
  }
  FeatureMap& at(int v, int t) {
    return maps[static_cast<size_t>(v) * frames + t];
  }
  FeatureVolume SelectViews(const std::vector<int>& views) const;
};

constexpr int kFourierFrequencies = 8;
constexpr int kFourierWidth = 4 * kFourierFrequencies;

// Sin/cos features of a pixel offset at 8 octave-spaced frequencies per
// coordinate, laid out [x: sin f0, cos f0, ..., y: sin f0, cos f0, ...].
Eigen::VectorXd FourierEncode(const Pixel& offset);

// Token = projection of [flatten(corr) ; fourier(offset)], where the offset is
// the hypothesis position minus the query position. Throws
// kDimensionMismatch when the projection input width does not fit.
Eigen::VectorXd Tokenize(const CorrTensor& corr, const Pixel& pos_offset,
                         const nn::Linear& projection);

// Row layout used by Tokenize, exposed for batched assembly.
void FillTokenInput(const Eigen::MatrixXd& corr, const Pixel& pos_offset,
                    Eigen::Ref<Eigen::RowVectorXd> row);

}  // namespace mvtap

#endif  // MVTAP_CORRELATION_H_
