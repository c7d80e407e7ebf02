#include "mvtap/tracker.h"

#include <cmath>
#include <random>
#include <string>
#include <utility>

#include "mvtap/error.h"

namespace mvtap {
namespace {

struct LayerPlan {
  AttentionAxis axis;
  int slot;  // 0 temporal, 1 spatial, 2 view
};

std::vector<LayerPlan> PlanBlock(const TrackDims& dims, TrackerMode mode) {
  if (mode == TrackerMode::kFlattened) {
    return {{AttentionAxis::kViewTime, 0}, {AttentionAxis::kPoints, 1}};
  }
  std::vector<LayerPlan> plan = {{AttentionAxis::kTime, 0},
                                 {AttentionAxis::kPoints, 1}};
  // A single view has nothing to exchange; skipping keeps V = 1 identical
  // to the flattened baseline.
  if (dims.views > 1) plan.push_back({AttentionAxis::kViews, 2});
  return plan;
}

const nn::AxisLayer& Slot(const TransformerBlock& b, int slot) {
  return slot == 0 ? b.temporal : slot == 1 ? b.spatial : b.view;
}
nn::AxisLayer& Slot(TransformerBlock& b, int slot) {
  return slot == 0 ? b.temporal : slot == 1 ? b.spatial : b.view;
}

void CheckInputs(const TrackerInputs& in, const TrackDims& dims) {
  const bool ok = in.features.views == dims.views &&
                  in.features.frames == dims.frames &&
                  in.queries.views == dims.views &&
                  in.queries.points == dims.points &&
                  in.cameras.views() == dims.views &&
                  in.cameras.frames() == dims.frames;
  if (!ok) {
    throw Error(ErrorCode::kDimensionMismatch,
                "features, queries, cameras and state disagree on V, T or N");
  }
}

nn::Matrix AssembleTokenInput(const TrackerInputs& in,
                              const TrackerConfig& config,
                              const TrackerState& state) {
  const TrackDims& d = state.dims;
  const int r = config.radius;
  nn::Matrix rows(d.size(), config.token_input_width());
  for (int v = 0; v < d.views; ++v) {
    std::vector<Eigen::MatrixXd> query_patches;
    for (int n = 0; n < d.points; ++n) {
      const Query& q = in.queries.at(v, n);
      query_patches.push_back(
          SampleNormalizedPatch(in.features.at(v, q.frame), q.xy, r));
    }
    for (int t = 0; t < d.frames; ++t) {
      const FeatureMap& fm = in.features.at(v, t);
      for (int n = 0; n < d.points; ++n) {
        const size_t i = d.index(v, t, n);
        const Pixel& p = state.tracks[i];
        const Eigen::MatrixXd corr =
            SampleNormalizedPatch(fm, p, r) * query_patches[n].transpose();
        Eigen::RowVectorXd row(rows.cols());
        FillTokenInput(corr, p - in.queries.at(v, n).xy, row);
        rows.row(i) = row;
      }
    }
  }
  return rows;
}

nn::Matrix TemporalEncoding(const TrackDims& d, const TrackerConfig& config) {
  nn::Matrix pe = nn::Matrix::Zero(d.size(), config.dim);
  if (!config.temporal_encoding) return pe;
  for (int v = 0; v < d.views; ++v) {
    for (int t = 0; t < d.frames; ++t) {
      const int pos =
          config.mode == TrackerMode::kFlattened ? v * d.frames + t : t;
      const Eigen::RowVectorXd enc = SinusoidalEncoding(pos, config.dim);
      for (int n = 0; n < d.points; ++n) pe.row(d.index(v, t, n)) = enc;
    }
  }
  return pe;
}

}  // namespace

void TrackerConfig::Validate() const {
  if (iterations < 1) {
    throw Error(ErrorCode::kInvalidConfig, "iterations must be >= 1");
  }
  if (radius < 0) throw Error(ErrorCode::kInvalidConfig, "radius must be >= 0");
  if (dim < 2 || dim % 2 != 0) {
    throw Error(ErrorCode::kInvalidConfig, "dim must be even and >= 2");
  }
  if (blocks < 1) throw Error(ErrorCode::kInvalidConfig, "blocks must be >= 1");
  if (heads < 1 || dim % heads != 0) {
    throw Error(ErrorCode::kInvalidConfig, "dim must be divisible by heads");
  }
}

ModelWeights ModelWeights::Zeros(const TrackerConfig& config) {
  config.Validate();
  const int d = config.dim;
  ModelWeights w;
  w.dim = d;
  w.radius = config.radius;
  w.heads = config.heads;
  w.token_projection = nn::Linear(config.token_input_width(), d);
  w.camera = PluckerMlp(d);
  for (int b = 0; b < config.blocks; ++b) {
    TransformerBlock block{nn::AxisLayer(d, 4 * d), nn::AxisLayer(d, 4 * d),
                           nn::AxisLayer(d, 4 * d)};
    w.blocks.push_back(std::move(block));
  }
  w.final_norm = nn::Matrix::Ones(1, d);
  w.head = nn::Linear(d, 3);
  w.ForEachParam([](const std::string&, nn::Matrix& m) { m.setZero(); });
  return w;
}

ModelWeights ModelWeights::Random(const TrackerConfig& config,
                                  std::uint64_t seed) {
  ModelWeights w = Zeros(config);
  std::mt19937_64 rng(seed);
  w.token_projection.InitRandom(rng);
  w.camera.hidden.InitRandom(rng);
  w.camera.out.InitRandom(rng);
  for (auto& b : w.blocks) {
    b.temporal.InitRandom(rng);
    b.spatial.InitRandom(rng);
    b.view.InitRandom(rng);
  }
  w.final_norm.setOnes();
  w.head.InitRandom(rng);
  return w;
}

namespace {

template <typename W, typename Fn>
void VisitParams(W& w, Fn&& fn) {
  auto linear = [&](const std::string& name, auto& l) {
    fn(name + ".weight", l.weight);
    fn(name + ".bias", l.bias);
  };
  auto axis = [&](const std::string& name, auto& a) {
    fn(name + ".norm1", a.norm1);
    linear(name + ".wq", a.wq);
    linear(name + ".wk", a.wk);
    linear(name + ".wv", a.wv);
    linear(name + ".wo", a.wo);
    fn(name + ".norm2", a.norm2);
    linear(name + ".ff1", a.ff1);
    linear(name + ".ff2", a.ff2);
  };
  linear("token_projection", w.token_projection);
  linear("camera.hidden", w.camera.hidden);
  linear("camera.out", w.camera.out);
  for (size_t b = 0; b < w.blocks.size(); ++b) {
    const std::string p = "blocks." + std::to_string(b);
    axis(p + ".temporal", w.blocks[b].temporal);
    axis(p + ".spatial", w.blocks[b].spatial);
    axis(p + ".view", w.blocks[b].view);
  }
  fn("final_norm", w.final_norm);
  linear("head", w.head);
}

}  // namespace

void ModelWeights::ForEachParam(
    const std::function<void(const std::string&, nn::Matrix&)>& fn) {
  VisitParams(*this, fn);
}

void ModelWeights::ForEachParam(
    const std::function<void(const std::string&, const nn::Matrix&)>& fn)
    const {
  VisitParams(*this, fn);
}

void ModelWeights::CheckCompatible(const TrackerConfig& config) const {
  const ModelWeights ref = Zeros(config);
  std::vector<std::pair<Eigen::Index, Eigen::Index>> want, have;
  ref.ForEachParam([&](const std::string&, const nn::Matrix& m) {
    want.emplace_back(m.rows(), m.cols());
  });
  ForEachParam([&](const std::string&, const nn::Matrix& m) {
    have.emplace_back(m.rows(), m.cols());
  });
  if (want != have || heads != config.heads) {
    throw Error(ErrorCode::kDimensionMismatch,
                "weights do not match the tracker configuration (d=" +
                    std::to_string(config.dim) +
                    ", blocks=" + std::to_string(config.blocks) +
                    ", radius=" + std::to_string(config.radius) + ")");
  }
}

long ModelWeights::ParameterCount() const {
  long count = 0;
  ForEachParam([&](const std::string&, const nn::Matrix& m) {
    count += static_cast<long>(m.size());
  });
  return count;
}

nn::AttentionGroups AxisGroups(const TrackDims& d, AttentionAxis axis) {
  nn::AttentionGroups groups;
  auto idx = [&](int v, int t, int n) { return static_cast<int>(d.index(v, t, n)); };
  switch (axis) {
    case AttentionAxis::kTime:
      for (int v = 0; v < d.views; ++v) {
        for (int n = 0; n < d.points; ++n) {
          auto& g = groups.emplace_back();
          for (int t = 0; t < d.frames; ++t) g.push_back(idx(v, t, n));
        }
      }
      break;
    case AttentionAxis::kPoints:
      for (int v = 0; v < d.views; ++v) {
        for (int t = 0; t < d.frames; ++t) {
          auto& g = groups.emplace_back();
          for (int n = 0; n < d.points; ++n) g.push_back(idx(v, t, n));
        }
      }
      break;
    case AttentionAxis::kViews:
      for (int t = 0; t < d.frames; ++t) {
        for (int n = 0; n < d.points; ++n) {
          auto& g = groups.emplace_back();
          for (int v = 0; v < d.views; ++v) g.push_back(idx(v, t, n));
        }
      }
      break;
    case AttentionAxis::kViewTime:
      for (int n = 0; n < d.points; ++n) {
        auto& g = groups.emplace_back();
        for (int v = 0; v < d.views; ++v) {
          for (int t = 0; t < d.frames; ++t) g.push_back(idx(v, t, n));
        }
      }
      break;
  }
  return groups;
}

TokenField AxisAttention(const TokenField& x, AttentionAxis axis,
                         const nn::AxisLayer& layer, int heads,
                         nn::AttentionStats* stats) {
  if (x.values.rows() != static_cast<Eigen::Index>(x.dims.size()) ||
      x.values.cols() != layer.wq.in()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "token field shape does not match the attention layer");
  }
  return {x.dims, nn::AxisLayerForward(layer, x.values,
                                       AxisGroups(x.dims, axis), heads,
                                       nullptr, stats)};
}

TrackerState InitState(const QuerySet& queries, int frames) {
  TrackerState s;
  s.dims = {queries.views, frames, queries.points};
  s.tracks.resize(s.dims.size());
  s.occlusion_logits.assign(s.dims.size(), 0.0);
  for (int v = 0; v < s.dims.views; ++v) {
    for (int t = 0; t < frames; ++t) {
      for (int n = 0; n < s.dims.points; ++n) {
        s.tracks[s.dims.index(v, t, n)] = queries.at(v, n).xy;
      }
    }
  }
  return s;
}

nn::Matrix StepForward(const TrackerInputs& inputs, const ModelWeights& w,
                       const TrackerConfig& config, const TrackerState& state,
                       StepCache* cache, TrackDiagnostics* diag) {
  const TrackDims& d = state.dims;
  CheckInputs(inputs, d);
  w.CheckCompatible(config);

  StepCache local;
  StepCache& c = cache != nullptr ? *cache : local;
  c.dims = d;
  c.token_input = AssembleTokenInput(inputs, config, state);
  const RayField rays = ComputeRayField(inputs.cameras, d, state.tracks);

  nn::Matrix x = w.token_projection.Forward(c.token_input);
  x += PluckerEmbedding(rays.AsMatrix(), w.camera, &c.camera);
  x += TemporalEncoding(d, config);

  const auto plan = PlanBlock(d, config.mode);
  c.layers.assign(w.blocks.size(), {});
  nn::AttentionStats* stats = diag != nullptr ? &diag->attention : nullptr;
  for (size_t b = 0; b < w.blocks.size(); ++b) {
    c.layers[b].resize(plan.size());
    for (size_t i = 0; i < plan.size(); ++i) {
      const auto groups = AxisGroups(d, plan[i].axis);
      x = nn::AxisLayerForward(Slot(w.blocks[b], plan[i].slot), x, groups,
                               config.heads, &c.layers[b][i], stats);
      if (diag != nullptr) {
        if (plan[i].axis == AttentionAxis::kViews) ++diag->view_attention_layers;
        if (plan[i].slot == 0) {
          diag->temporal_sequence_length = static_cast<int>(groups[0].size());
        }
      }
    }
  }
  c.pre_norm = x;
  c.normalized = nn::LayerNormForward(x, w.final_norm, &c.final_norm);
  return w.head.Forward(c.normalized);
}

void StepBackward(const ModelWeights& w, const TrackerConfig& config,
                  const StepCache& c, const nn::Matrix& doutput,
                  ModelWeights* grad) {
  nn::Matrix dnorm;
  w.head.Backward(c.normalized, doutput, &grad->head, &dnorm);
  nn::Matrix dx =
      nn::LayerNormBackward(c.final_norm, w.final_norm, dnorm, &grad->final_norm);
  const auto plan = PlanBlock(c.dims, config.mode);
  for (size_t b = w.blocks.size(); b-- > 0;) {
    for (size_t i = plan.size(); i-- > 0;) {
      const auto groups = AxisGroups(c.dims, plan[i].axis);
      dx = nn::AxisLayerBackward(Slot(w.blocks[b], plan[i].slot), groups,
                                 config.heads, c.layers[b][i], dx,
                                 &Slot(grad->blocks[b], plan[i].slot));
    }
  }
  w.token_projection.Backward(c.token_input, dx, &grad->token_projection,
                              nullptr);
  PluckerEmbeddingBackward(w.camera, c.camera, dx, &grad->camera);
}

TrackerState RefineStep(const TrackerInputs& inputs, const ModelWeights& w,
                        const TrackerConfig& config, const TrackerState& state,
                        TrackDiagnostics* diag) {
  if (state.iteration >= config.iterations) {
    throw Error(ErrorCode::kIterationOverflow,
                "state already took " + std::to_string(state.iteration) +
                    " of " + std::to_string(config.iterations) + " steps");
  }
  const nn::Matrix delta = StepForward(inputs, w, config, state, nullptr, diag);
  TrackerState next = state;
  for (size_t i = 0; i < state.dims.size(); ++i) {
    next.tracks[i] += Pixel(delta(i, 0), delta(i, 1));
    next.occlusion_logits[i] += delta(i, 2);
  }
  next.iteration = state.iteration + 1;
  if (diag != nullptr) ++diag->steps;
  return next;
}

double Sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

TrackResult Track(const TrackerInputs& inputs, const ModelWeights& w,
                  const TrackerConfig& config, TrackDiagnostics* diag) {
  config.Validate();
  TrackResult result;
  result.states.push_back(InitState(inputs.queries, inputs.features.frames));
  for (int m = 0; m < config.iterations; ++m) {
    result.states.push_back(
        RefineStep(inputs, w, config, result.states.back(), diag));
  }
  const TrackerState& last = result.states.back();
  result.prediction = TrackPrediction(last.dims);
  result.prediction.xy = last.tracks;
  for (size_t i = 0; i < last.dims.size(); ++i) {
    result.prediction.occlusion[i] = Sigmoid(last.occlusion_logits[i]);
  }
  return result;
}

}  // namespace mvtap
