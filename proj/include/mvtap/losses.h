#ifndef MVTAP_LOSSES_H_
#define MVTAP_LOSSES_H_

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "mvtap/tracks.h"

namespace mvtap {

struct LossConfig {
  double gamma = 0.8;     // discount, weight gamma^(M - m) on step m
  double huber_delta = 6.0;  // pixels
  // Average the track loss over ground-truth in-frame points only.
  bool mask_out_of_frame = false;

  void Validate() const;
};

// Huber on the 2D error norm: 0.5 |r|^2 inside delta, delta (|r| - delta / 2)
// outside.
double Huber(const Pixel& residual, double delta);
Pixel HuberGrad(const Pixel& residual, double delta);

// Discounted Huber over refinement steps. `steps[m - 1]` holds the tracks
// after update m. Gradients (same layout as `steps`) are written when
// `grad` is non-null. Throws kShapeMismatch.
double TrackLoss(const std::vector<std::vector<Pixel>>& steps,
                 const MultiViewTracks& target, const LossConfig& config,
                 std::vector<std::vector<Pixel>>* grad = nullptr);

// Discounted binary cross-entropy of sigmoid(logit) against the occluded
// flag, evaluated in logit space. `occluded` is 1 where the ground truth is
// occluded.
double OcclusionLoss(const std::vector<std::vector<double>>& logits,
                     const std::vector<std::uint8_t>& occluded,
                     const LossConfig& config,
                     std::vector<std::vector<double>>* grad = nullptr);

// Per-element BCE with logits: max(x, 0) - x y + log(1 + exp(-|x|)).
double BinaryCrossEntropyWithLogit(double logit, double target);

// Occlusion targets (1 = occluded) from ground-truth visibility.
std::vector<std::uint8_t> OcclusionTargets(const MultiViewTracks& gt);

// Central differences (f(x + eps e_i) - f(x - eps e_i)) / 2 eps.
Eigen::VectorXd FiniteDiffGrad(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, double eps);

}  // namespace mvtap

#endif  // MVTAP_LOSSES_H_
