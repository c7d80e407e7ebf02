#include "mvtap/overfit.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mvtap/error.h"

namespace mvtap {
namespace {

std::vector<nn::Matrix*> Params(ModelWeights* w) {
  std::vector<nn::Matrix*> out;
  w->ForEachParam([&](const std::string&, nn::Matrix& m) { out.push_back(&m); });
  return out;
}

}  // namespace

TrainingExample MakeExample(const SceneConfig& config) {
  const Scene scene = GenerateScene(config);
  TrainingExample ex{AllFeatureFields(scene), {}, scene.cameras,
                     RenderGroundTruth(scene)};
  ex.queries = SampleQueries(ex.gt, QueryMode::kFirstVisible, config.seed);
  return ex;
}

LossValue ComputeLoss(const TrainingExample& example, const ModelWeights& w,
                      const TrackerConfig& config, const LossConfig& loss,
                      ModelWeights* grad) {
  config.Validate();
  const TrackerInputs inputs = example.inputs();
  const int M = config.iterations;
  std::vector<StepCache> caches(M);
  std::vector<std::vector<Pixel>> tracks;
  std::vector<std::vector<double>> logits;
  TrackerState state = InitState(example.queries, example.features.frames);
  for (int m = 0; m < M; ++m) {
    const nn::Matrix delta = StepForward(inputs, w, config, state,
                                         grad != nullptr ? &caches[m] : nullptr);
    for (size_t i = 0; i < state.dims.size(); ++i) {
      state.tracks[i] += Pixel(delta(i, 0), delta(i, 1));
      state.occlusion_logits[i] += delta(i, 2);
    }
    ++state.iteration;
    tracks.push_back(state.tracks);
    logits.push_back(state.occlusion_logits);
  }

  std::vector<std::vector<Pixel>> dtracks;
  std::vector<std::vector<double>> dlogits;
  LossValue value;
  value.track = TrackLoss(tracks, example.gt, loss,
                          grad != nullptr ? &dtracks : nullptr);
  value.occlusion = OcclusionLoss(logits, OcclusionTargets(example.gt), loss,
                                  grad != nullptr ? &dlogits : nullptr);
  if (grad == nullptr) return value;

  *grad = ModelWeights::Zeros(config);
  // Update m feeds every later state, so its gradient is the suffix sum of
  // the per-state gradients.
  const auto P = static_cast<Eigen::Index>(state.dims.size());
  nn::Matrix dout = nn::Matrix::Zero(P, 3);
  for (int m = M - 1; m >= 0; --m) {
    for (Eigen::Index i = 0; i < P; ++i) {
      dout(i, 0) += dtracks[m][i].x();
      dout(i, 1) += dtracks[m][i].y();
      dout(i, 2) += dlogits[m][i];
    }
    StepBackward(w, config, caches[m], dout, grad);
  }
  return value;
}

double AdamConfig::RateAt(int step) const {
  if (step < warmup_steps) return learning_rate * (step + 1) / warmup_steps;
  if (decay_steps <= warmup_steps) return learning_rate;
  const double progress = std::min(
      1.0, static_cast<double>(step - warmup_steps) / (decay_steps - warmup_steps));
  const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
  return learning_rate * (final_lr_fraction + (1.0 - final_lr_fraction) * cosine);
}

Adam::Adam(const ModelWeights& shape, const AdamConfig& config)
    : config_(config) {
  shape.ForEachParam([&](const std::string& name, const nn::Matrix& m) {
    m_.push_back(nn::Matrix::Zero(m.rows(), m.cols()));
    v_.push_back(nn::Matrix::Zero(m.rows(), m.cols()));
    const bool weight = name.ends_with(".weight");
    const int ref = config.fan_in_reference;
    scale_.push_back(weight && ref > 0 && m.rows() > ref
                         ? std::sqrt(static_cast<double>(ref) / m.rows())
                         : 1.0);
  });
}

void Adam::Step(const ModelWeights& grad, ModelWeights* w) {
  std::vector<const nn::Matrix*> g;
  grad.ForEachParam(
      [&](const std::string&, const nn::Matrix& m) { g.push_back(&m); });
  const std::vector<nn::Matrix*> p = Params(w);
  if (g.size() != m_.size() || p.size() != m_.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "optimizer state shape");
  }
  double scale = 1.0;
  if (config_.clip_norm > 0.0) {
    double sq = 0.0;
    for (const nn::Matrix* x : g) sq += x->squaredNorm();
    const double norm = std::sqrt(sq);
    if (norm > config_.clip_norm) scale = config_.clip_norm / norm;
  }
  const double lr = config_.RateAt(t_);
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, t_);
  const double c2 = 1.0 - std::pow(config_.beta2, t_);
  for (size_t k = 0; k < p.size(); ++k) {
    m_[k] = config_.beta1 * m_[k] + (1.0 - config_.beta1) * scale * *g[k];
    v_[k] = config_.beta2 * v_[k] +
            (1.0 - config_.beta2) * (scale * *g[k]).cwiseAbs2();
    *p[k] -= (lr * scale_[k] * (m_[k] / c1).array() /
              ((v_[k] / c2).array().sqrt() + config_.epsilon))
                 .matrix();
  }
}

OverfitResult Overfit(const std::vector<TrainingExample>& examples,
                      const ModelWeights& init, const TrackerConfig& config,
                      const OverfitConfig& overfit,
                      const std::function<void(const OverfitRecord&)>& on_step) {
  if (examples.empty()) {
    throw Error(ErrorCode::kInvalidConfig, "no training examples");
  }
  if (overfit.steps < 0) {
    throw Error(ErrorCode::kInvalidConfig, "steps must be >= 0");
  }
  init.CheckCompatible(config);
  OverfitResult result{init, {}, {}, {}};
  Adam adam(init, overfit.adam);
  const double inv = 1.0 / static_cast<double>(examples.size());

  auto evaluate = [&](ModelWeights* grad) {
    LossValue total;
    ModelWeights g;
    if (grad != nullptr) *grad = ModelWeights::Zeros(config);
    for (const TrainingExample& ex : examples) {
      const LossValue l = ComputeLoss(ex, result.weights, config, overfit.loss,
                                      grad != nullptr ? &g : nullptr);
      total.track += inv * l.track;
      total.occlusion += inv * l.occlusion;
      if (grad == nullptr) continue;
      std::vector<nn::Matrix*> dst = Params(grad);
      size_t k = 0;
      g.ForEachParam([&](const std::string&, const nn::Matrix& m) {
        *dst[k++] += inv * m;
      });
    }
    return total;
  };

  for (int step = 0; step < overfit.steps; ++step) {
    ModelWeights grad;
    const LossValue l = evaluate(&grad);
    if (step == 0) result.initial = l;
    const OverfitRecord record{step, l};
    result.history.push_back(record);
    if (on_step) on_step(record);
    adam.Step(grad, &result.weights);
  }
  result.final = evaluate(nullptr);
  if (overfit.steps == 0) result.initial = result.final;
  return result;
}

OverfitResult TrainOnline(
    const std::function<TrainingExample(int)>& sample, const ModelWeights& init,
    const TrackerConfig& config, const OverfitConfig& overfit,
    const std::function<void(const OverfitRecord&)>& on_step) {
  if (overfit.steps < 0) {
    throw Error(ErrorCode::kInvalidConfig, "steps must be >= 0");
  }
  init.CheckCompatible(config);
  OverfitResult result{init, {}, {}, {}};
  Adam adam(init, overfit.adam);
  const TrainingExample first = sample(0);
  result.initial = ComputeLoss(first, init, config, overfit.loss);
  for (int step = 0; step < overfit.steps; ++step) {
    ModelWeights grad;
    const LossValue l =
        step == 0 ? ComputeLoss(first, result.weights, config, overfit.loss, &grad)
                  : ComputeLoss(sample(step), result.weights, config,
                                overfit.loss, &grad);
    const OverfitRecord record{step, l};
    result.history.push_back(record);
    if (on_step) on_step(record);
    adam.Step(grad, &result.weights);
  }
  result.final = ComputeLoss(first, result.weights, config, overfit.loss);
  return result;
}

}  // namespace mvtap
