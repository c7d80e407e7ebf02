#include "mvtap/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "mvtap/error.h"

namespace mvtap {
namespace {

void CheckShapes(const TrackPrediction& pred, const MultiViewTracks& gt,
                 const EvalMask& mask) {
  if (!(pred.dims == gt.dims) || pred.xy.size() != gt.dims.size() ||
      pred.occlusion.size() != gt.dims.size() ||
      (!mask.empty() && mask.size() != gt.dims.size())) {
    throw Error(ErrorCode::kShapeMismatch,
                "prediction, ground truth and mask shapes differ");
  }
}

bool Scored(const EvalMask& mask, size_t i) {
  return mask.empty() || mask[i] != 0;
}

std::optional<double> Percent(long num, long den) {
  if (den == 0) return std::nullopt;
  return 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

EvalMask MakeEvalMask(const TrackDims& dims, const QuerySet* queries,
                      const std::vector<std::uint8_t>* trajectory_mask) {
  EvalMask mask(dims.size(), 1);
  for (int v = 0; v < dims.views; ++v) {
    for (int n = 0; n < dims.points; ++n) {
      const bool keep =
          trajectory_mask == nullptr ||
          (*trajectory_mask)[static_cast<size_t>(v) * dims.points + n] != 0;
      for (int t = 0; t < dims.frames; ++t) {
        if (!keep) mask[dims.index(v, t, n)] = 0;
      }
      if (queries != nullptr) {
        mask[dims.index(v, queries->at(v, n).frame, n)] = 0;
      }
    }
  }
  return mask;
}

std::vector<std::optional<double>> PositionAccuracy(
    const TrackPrediction& pred, const MultiViewTracks& gt, PointSubset subset,
    const std::vector<double>& thresholds, const EvalMask& mask) {
  CheckShapes(pred, gt, mask);
  std::vector<long> hits(thresholds.size(), 0);
  long total = 0;
  for (size_t i = 0; i < gt.dims.size(); ++i) {
    if (!Scored(mask, i)) continue;
    const bool in_subset = subset == PointSubset::kVisible
                               ? gt.visible[i] != 0
                               : gt.in_frame[i] != 0 && gt.visible[i] == 0;
    if (!in_subset) continue;
    ++total;
    const double err = (pred.xy[i] - gt.xy[i]).norm();
    for (size_t k = 0; k < thresholds.size(); ++k) {
      hits[k] += err <= thresholds[k];
    }
  }
  std::vector<std::optional<double>> out;
  for (long h : hits) out.push_back(Percent(h, total));
  return out;
}

std::optional<double> OcclusionAccuracy(const TrackPrediction& pred,
                                        const MultiViewTracks& gt,
                                        const EvalMask& mask) {
  CheckShapes(pred, gt, mask);
  long correct = 0;
  long total = 0;
  for (size_t i = 0; i < gt.dims.size(); ++i) {
    if (!Scored(mask, i)) continue;
    ++total;
    const bool pred_occluded = pred.occlusion[i] > 0.5;
    correct += pred_occluded == (gt.visible[i] == 0);
  }
  return Percent(correct, total);
}

JaccardResult AverageJaccard(const TrackPrediction& pred,
                             const MultiViewTracks& gt,
                             const std::vector<double>& thresholds,
                             const EvalMask& mask) {
  CheckShapes(pred, gt, mask);
  JaccardResult result;
  for (double tau : thresholds) {
    long tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < gt.dims.size(); ++i) {
      if (!Scored(mask, i)) continue;
      const bool gt_vis = gt.visible[i] != 0;
      const bool pred_vis = !(pred.occlusion[i] > 0.5);
      const bool within = (pred.xy[i] - gt.xy[i]).norm() <= tau;
      if (gt_vis && pred_vis && within) {
        ++tp;
      } else {
        fp += pred_vis;      // occluded in GT, or visible but off target
        fn += gt_vis;        // predicted occluded, or visible but off target
      }
    }
    result.per_threshold.push_back(Percent(tp, tp + fp + fn));
  }
  result.average = MeanDefined(result.per_threshold);
  return result;
}

std::vector<int> OcclusionFrequency(const MultiViewTracks& gt) {
  const TrackDims& d = gt.dims;
  std::vector<int> freq(static_cast<size_t>(d.views) * d.points, 0);
  for (int v = 0; v < d.views; ++v) {
    for (int n = 0; n < d.points; ++n) {
      int count = 0;
      for (int t = 0; t + 1 < d.frames; ++t) {
        count += gt.is_visible(v, t, n) != gt.is_visible(v, t + 1, n);
      }
      freq[static_cast<size_t>(v) * d.points + n] = count;
    }
  }
  return freq;
}

std::vector<std::uint8_t> OcclusionFrequencyFilter(const MultiViewTracks& gt,
                                                   double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig,
                "occlusion-frequency fraction must lie in (0, 1]");
  }
  const std::vector<int> freq = OcclusionFrequency(gt);
  std::vector<size_t> order(freq.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return freq[a] > freq[b]; });
  const size_t keep = std::min(
      freq.size(),
      static_cast<size_t>(std::ceil(fraction * static_cast<double>(freq.size()) -
                                    1e-9)));
  std::vector<std::uint8_t> mask(freq.size(), 0);
  for (size_t i = 0; i < keep; ++i) mask[order[i]] = 1;
  return mask;
}

std::optional<double> MeanDefined(const std::vector<std::optional<double>>& xs) {
  double sum = 0.0;
  int count = 0;
  for (const auto& x : xs) {
    if (x) {
      sum += *x;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / count;
}

EvalReport Evaluate(const TrackPrediction& pred, const MultiViewTracks& gt,
                    const EvalMask& mask,
                    const std::vector<double>& thresholds) {
  EvalReport r;
  r.thresholds = thresholds;
  r.pck = PositionAccuracy(pred, gt, PointSubset::kVisible, thresholds, mask);
  r.pck_occ = PositionAccuracy(pred, gt, PointSubset::kInFrameOccluded,
                               thresholds, mask);
  r.delta_avg = MeanDefined(r.pck);
  r.delta_occ = MeanDefined(r.pck_occ);
  r.occlusion_accuracy = OcclusionAccuracy(pred, gt, mask);
  const JaccardResult aj = AverageJaccard(pred, gt, thresholds, mask);
  r.jaccard = aj.per_threshold;
  r.average_jaccard = aj.average;
  for (size_t i = 0; i < gt.dims.size(); ++i) {
    if (!Scored(mask, i)) continue;
    ++r.evaluated_points;
    r.visible_points += gt.visible[i] != 0;
    r.occluded_in_frame_points += gt.in_frame[i] != 0 && gt.visible[i] == 0;
  }
  return r;
}

EvalReport EvaluatePerViewMean(const TrackPrediction& pred,
                               const MultiViewTracks& gt, const EvalMask& mask,
                               const std::vector<double>& thresholds) {
  CheckShapes(pred, gt, mask);
  const TrackDims& d = gt.dims;
  std::vector<EvalReport> per_view;
  for (int v = 0; v < d.views; ++v) {
    const std::vector<int> one = {v};
    EvalMask sub;
    if (!mask.empty()) {
      TrackDims sd = d;
      sd.views = 1;
      sub.resize(sd.size());
      for (int t = 0; t < d.frames; ++t) {
        for (int n = 0; n < d.points; ++n) {
          sub[sd.index(0, t, n)] = mask[d.index(v, t, n)];
        }
      }
    }
    per_view.push_back(Evaluate(pred.SelectViews(one), gt.SelectViews(one),
                                sub, thresholds));
  }
  auto mean_of = [&](auto get) {
    std::vector<std::optional<double>> xs;
    for (const auto& r : per_view) xs.push_back(get(r));
    return MeanDefined(xs);
  };
  EvalReport out;
  out.thresholds = thresholds;
  for (size_t k = 0; k < thresholds.size(); ++k) {
    out.pck.push_back(mean_of([k](const EvalReport& r) { return r.pck[k]; }));
    out.pck_occ.push_back(
        mean_of([k](const EvalReport& r) { return r.pck_occ[k]; }));
    out.jaccard.push_back(
        mean_of([k](const EvalReport& r) { return r.jaccard[k]; }));
  }
  out.delta_avg = mean_of([](const EvalReport& r) { return r.delta_avg; });
  out.delta_occ = mean_of([](const EvalReport& r) { return r.delta_occ; });
  out.occlusion_accuracy =
      mean_of([](const EvalReport& r) { return r.occlusion_accuracy; });
  out.average_jaccard =
      mean_of([](const EvalReport& r) { return r.average_jaccard; });
  for (const auto& r : per_view) {
    out.visible_points += r.visible_points;
    out.occluded_in_frame_points += r.occluded_in_frame_points;
    out.evaluated_points += r.evaluated_points;
  }
  return out;
}

std::vector<std::pair<std::string, std::optional<double>>> ReportMetrics(
    const EvalReport& r) {
  auto tag = [](double tau) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", tau);
    return std::string(buf);
  };
  std::vector<std::pair<std::string, std::optional<double>>> out;
  for (size_t k = 0; k < r.thresholds.size(); ++k) {
    out.emplace_back("pck@" + tag(r.thresholds[k]), r.pck[k]);
  }
  out.emplace_back("delta_avg", r.delta_avg);
  for (size_t k = 0; k < r.thresholds.size(); ++k) {
    out.emplace_back("pck_occ@" + tag(r.thresholds[k]), r.pck_occ[k]);
  }
  out.emplace_back("delta_occ", r.delta_occ);
  out.emplace_back("occlusion_accuracy", r.occlusion_accuracy);
  for (size_t k = 0; k < r.thresholds.size(); ++k) {
    out.emplace_back("jaccard@" + tag(r.thresholds[k]), r.jaccard[k]);
  }
  out.emplace_back("average_jaccard", r.average_jaccard);
  return out;
}

std::string FormatReport(const EvalReport& r) {
  std::ostringstream os;
  for (const auto& [name, v] : ReportMetrics(r)) {
    os << name << ' ';
    if (v) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.4f", *v);
      os << buf;
    } else {
      os << "undefined";
    }
    os << '\n';
  }
  os << "visible_points " << r.visible_points << '\n';
  os << "occluded_in_frame_points " << r.occluded_in_frame_points << '\n';
  os << "evaluated_points " << r.evaluated_points << '\n';
  return os.str();
}

}  // namespace mvtap
