#ifndef MVTAP_TRACKER_H_
#define MVTAP_TRACKER_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mvtap/correlation.h"
#include "mvtap/embedding.h"
#include "mvtap/geometry.h"
#include "mvtap/layers.h"
#include "mvtap/tracks.h"

namespace mvtap {

enum class TrackerMode {
  kMultiView,
  // Single-view baseline: views and frames form one temporal sequence and
  // there is no view attention.
  kFlattened,
};

struct TrackerConfig {
  int iterations = 4;
  int radius = 3;  // r_p = r_q
  int dim = 64;
  int blocks = 3;
  int heads = 1;
  TrackerMode mode = TrackerMode::kMultiView;
  bool temporal_encoding = true;

  // Throws kInvalidConfig.
  void Validate() const;
  int token_input_width() const {
    return CorrelationSize(radius, radius) + kFourierWidth;
  }
};

// One interleaved block: temporal, then spatial, then view attention.
struct TransformerBlock {
  nn::AxisLayer temporal;
  nn::AxisLayer spatial;
  nn::AxisLayer view;
};

struct ModelWeights {
  int dim = 0;
  int radius = 0;
  int heads = 1;
  nn::Linear token_projection;
  PluckerMlp camera;
  std::vector<TransformerBlock> blocks;
  nn::Matrix final_norm;  // 1 x d
  nn::Linear head;        // d -> (dx, dy, d occlusion logit)

  // All-zero parameters (norm gains included) shaped for `config`.
  static ModelWeights Zeros(const TrackerConfig& config);
  static ModelWeights Random(const TrackerConfig& config, std::uint64_t seed);

  // Visits every parameter tensor under a stable dotted name, in a fixed
  // order.
  void ForEachParam(
      const std::function<void(const std::string&, nn::Matrix&)>& fn);
  void ForEachParam(
      const std::function<void(const std::string&, const nn::Matrix&)>& fn)
      const;

  // Throws kDimensionMismatch unless the shapes fit `config`.
  void CheckCompatible(const TrackerConfig& config) const;
  long ParameterCount() const;
};

// Token field X of shape (V * T * N) x d, rows in TrackDims order.
struct TokenField {
  TrackDims dims;
  nn::Matrix values;
};

enum class AttentionAxis {
  kTime,      // per (view, point), over frames
  kPoints,    // per (view, frame), over points
  kViews,     // per (frame, point), over views
  kViewTime,  // per point, over the flattened (view, frame) sequence
};

nn::AttentionGroups AxisGroups(const TrackDims& dims, AttentionAxis axis);

// One pre-norm residual attention + feed-forward layer along `axis`, other
// axes batched.
TokenField AxisAttention(const TokenField& x, AttentionAxis axis,
                         const nn::AxisLayer& layer, int heads,
                         nn::AttentionStats* stats = nullptr);

struct TrackerState {
  TrackDims dims;
  std::vector<Pixel> tracks;
  std::vector<double> occlusion_logits;
  int iteration = 0;
};

// Every frame starts at its view's query position with zero logits.
TrackerState InitState(const QuerySet& queries, int frames);

struct TrackerInputs {
  const FeatureVolume& features;
  const QuerySet& queries;
  const CameraRig& cameras;
};

struct TrackDiagnostics {
  nn::AttentionStats attention;
  int steps = 0;
  int view_attention_layers = 0;
  int temporal_sequence_length = 0;
};

// One recurrent update: correlation at the current hypothesis, token
// assembly, L transformer blocks, additive (dx, dy, d logit) update. Throws
// kIterationOverflow when the state already took config.iterations steps.
TrackerState RefineStep(const TrackerInputs& inputs, const ModelWeights& w,
                        const TrackerConfig& config, const TrackerState& state,
                        TrackDiagnostics* diag = nullptr);

struct TrackResult {
  TrackPrediction prediction;
  std::vector<TrackerState> states;  // states[m] after m updates
};

TrackResult Track(const TrackerInputs& inputs, const ModelWeights& w,
                  const TrackerConfig& config,
                  TrackDiagnostics* diag = nullptr);

double Sigmoid(double x);

// Training hooks. The hypothesis that feeds correlation, offsets and rays is
// treated as a constant; gradients reach the weights through the update head
// only.
struct StepCache {
  TrackDims dims;
  nn::Matrix token_input;
  PluckerMlpCache camera;
  std::vector<std::vector<nn::AxisLayerCache>> layers;  // [block][axis]
  nn::Matrix pre_norm;
  nn::LayerNormCache final_norm;
  nn::Matrix normalized;
};

// Network output for the current state: one row (dx, dy, d logit) per token.
nn::Matrix StepForward(const TrackerInputs& inputs, const ModelWeights& w,
                       const TrackerConfig& config, const TrackerState& state,
                       StepCache* cache, TrackDiagnostics* diag = nullptr);

// Accumulates dL/dweights into `grad` given dL/d(output of StepForward).
void StepBackward(const ModelWeights& w, const TrackerConfig& config,
                  const StepCache& cache, const nn::Matrix& doutput,
                  ModelWeights* grad);

}  // namespace mvtap

#endif  // MVTAP_TRACKER_H_
