#include "mvtap/losses.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "mvtap/error.h"

namespace mvtap {
namespace {

double StepWeight(double gamma, int steps, int m) {
  return std::pow(gamma, steps - m);
}

}  // namespace

void LossConfig::Validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "gamma must lie in (0, 1]");
  }
  if (!(huber_delta > 0.0)) {
    throw Error(ErrorCode::kInvalidConfig, "Huber delta must be > 0");
  }
}

double Huber(const Pixel& residual, double delta) {
  const double r = residual.norm();
  if (r <= delta) return 0.5 * r * r;
  return delta * (r - 0.5 * delta);
}

Pixel HuberGrad(const Pixel& residual, double delta) {
  const double r = residual.norm();
  if (r <= delta) return residual;
  return delta * residual / r;
}

double TrackLoss(const std::vector<std::vector<Pixel>>& steps,
                 const MultiViewTracks& target, const LossConfig& config,
                 std::vector<std::vector<Pixel>>* grad) {
  config.Validate();
  const size_t size = target.dims.size();
  for (const auto& s : steps) {
    if (s.size() != size) {
      throw Error(ErrorCode::kShapeMismatch,
                  "track step has " + std::to_string(s.size()) +
                      " entries, target has " + std::to_string(size));
    }
  }
  size_t count = 0;
  for (size_t i = 0; i < size; ++i) {
    count += !config.mask_out_of_frame || target.in_frame[i];
  }
  const int M = static_cast<int>(steps.size());
  if (grad != nullptr) {
    grad->assign(M, std::vector<Pixel>(size, Pixel::Zero()));
  }
  if (count == 0) return 0.0;
  double total = 0.0;
  for (int m = 1; m <= M; ++m) {
    const double w = StepWeight(config.gamma, M, m) / count;
    double sum = 0.0;
    for (size_t i = 0; i < size; ++i) {
      if (config.mask_out_of_frame && !target.in_frame[i]) continue;
      const Pixel r = steps[m - 1][i] - target.xy[i];
      sum += Huber(r, config.huber_delta);
      if (grad != nullptr) {
        (*grad)[m - 1][i] = w * HuberGrad(r, config.huber_delta);
      }
    }
    total += w * sum;
  }
  return total;
}

double BinaryCrossEntropyWithLogit(double logit, double target) {
  return std::max(logit, 0.0) - logit * target +
         std::log1p(std::exp(-std::abs(logit)));
}

double OcclusionLoss(const std::vector<std::vector<double>>& logits,
                     const std::vector<std::uint8_t>& occluded,
                     const LossConfig& config,
                     std::vector<std::vector<double>>* grad) {
  config.Validate();
  const size_t size = occluded.size();
  for (const auto& s : logits) {
    if (s.size() != size) {
      throw Error(ErrorCode::kShapeMismatch,
                  "occlusion step has " + std::to_string(s.size()) +
                      " entries, target has " + std::to_string(size));
    }
  }
  const int M = static_cast<int>(logits.size());
  if (grad != nullptr) grad->assign(M, std::vector<double>(size, 0.0));
  if (size == 0) return 0.0;
  double total = 0.0;
  for (int m = 1; m <= M; ++m) {
    const double w = StepWeight(config.gamma, M, m) / size;
    double sum = 0.0;
    for (size_t i = 0; i < size; ++i) {
      const double x = logits[m - 1][i];
      const double y = occluded[i] ? 1.0 : 0.0;
      sum += BinaryCrossEntropyWithLogit(x, y);
      if (grad != nullptr) {
        const double s = x >= 0 ? 1.0 / (1.0 + std::exp(-x))
                                : std::exp(x) / (1.0 + std::exp(x));
        (*grad)[m - 1][i] = w * (s - y);
      }
    }
    total += w * sum;
  }
  return total;
}

std::vector<std::uint8_t> OcclusionTargets(const MultiViewTracks& gt) {
  std::vector<std::uint8_t> occ(gt.visible.size());
  for (size_t i = 0; i < occ.size(); ++i) occ[i] = gt.visible[i] ? 0 : 1;
  return occ;
}

Eigen::VectorXd FiniteDiffGrad(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, double eps) {
  if (!(eps > 0.0)) {
    throw Error(ErrorCode::kInvalidConfig, "finite-difference step must be > 0");
  }
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe(i) = x(i) + eps;
    const double up = f(probe);
    probe(i) = x(i) - eps;
    const double down = f(probe);
    probe(i) = x(i);
    g(i) = (up - down) / (2.0 * eps);
  }
  return g;
}

}  // namespace mvtap
