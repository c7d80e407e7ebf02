#ifndef MVTAP_OVERFIT_H_
#define MVTAP_OVERFIT_H_

#include <cstdint>
#include <functional>
#include <vector>

#include "mvtap/correlation.h"
#include "mvtap/losses.h"
#include "mvtap/scene_gen.h"
#include "mvtap/tracker.h"
#include "mvtap/tracks.h"

namespace mvtap {

// Everything one supervised tracking run needs.
struct TrainingExample {
  FeatureVolume features;
  QuerySet queries;
  CameraRig cameras;
  MultiViewTracks gt;

  TrackerInputs inputs() const { return {features, queries, cameras}; }
};

// Generated scene, first-visible queries, noiseless-config feature fields.
TrainingExample MakeExample(const SceneConfig& config);

struct LossValue {
  double track = 0.0;
  double occlusion = 0.0;
  double total() const { return track + occlusion; }
};

// Unrolls all refinement steps and evaluates track + occlusion loss. When
// `grad` is non-null it receives dL/dweights (shaped like `w`, overwritten).
LossValue ComputeLoss(const TrainingExample& example, const ModelWeights& w,
                      const TrackerConfig& config, const LossConfig& loss,
                      ModelWeights* grad = nullptr);

struct AdamConfig {
  double learning_rate = 3e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Global gradient-norm clip; <= 0 disables it.
  double clip_norm = 10.0;
  // Linear warmup over warmup_steps updates, then cosine decay to
  // final_lr_fraction * learning_rate at decay_steps; 0 disables either.
  int warmup_steps = 50;
  int decay_steps = 500;
  double final_lr_fraction = 0.0;
  // When > 0, "*.weight" tensors with more input rows than this take steps
  // scaled by sqrt(fan_in_reference / rows). Sign-like Adam steps on a wide,
  // correlated input otherwise move each output by ~lr * sum |x|.
  int fan_in_reference = 32;

  double RateAt(int step) const;
};

class Adam {
 public:
  Adam(const ModelWeights& shape, const AdamConfig& config);
  void Step(const ModelWeights& grad, ModelWeights* w);
  int steps() const { return t_; }

 private:
  AdamConfig config_;
  std::vector<nn::Matrix> m_;
  std::vector<nn::Matrix> v_;
  std::vector<double> scale_;
  int t_ = 0;
};

struct OverfitConfig {
  int steps = 500;
  AdamConfig adam;
  LossConfig loss;
};

struct OverfitRecord {
  int step = 0;
  LossValue loss;  // before the update at `step`
};

struct OverfitResult {
  ModelWeights weights;
  std::vector<OverfitRecord> history;
  LossValue initial;
  LossValue final;  // after the last update
};

// Full-batch Adam over `examples` (loss averaged across them). `on_step`,
// when set, sees each record as it is produced.
OverfitResult Overfit(const std::vector<TrainingExample>& examples,
                      const ModelWeights& init, const TrackerConfig& config,
                      const OverfitConfig& overfit,
                      const std::function<void(const OverfitRecord&)>& on_step =
                          nullptr);

// Stochastic variant: step k trains on sample(k) alone. `initial`/`final` in
// the result are the losses on sample(0) before and after training.
OverfitResult TrainOnline(
    const std::function<TrainingExample(int)>& sample, const ModelWeights& init,
    const TrackerConfig& config, const OverfitConfig& overfit,
    const std::function<void(const OverfitRecord&)>& on_step = nullptr);

}  // namespace mvtap

#endif  // MVTAP_OVERFIT_H_
