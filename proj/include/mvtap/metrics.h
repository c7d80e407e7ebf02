#ifndef MVTAP_METRICS_H_
#define MVTAP_METRICS_H_

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mvtap/tracks.h"

namespace mvtap {

inline const std::vector<double> kPckThresholds = {1, 2, 4, 8, 16};

enum class PointSubset {
  kVisible,
  kInFrameOccluded,  // inside the image but hidden by geometry
};

// Which (v, t, n) entries are scored. Empty means all of them.
using EvalMask = std::vector<std::uint8_t>;

// Excludes each view's query frame and, if given, trajectories outside
// `trajectory_mask` (indexed v * N + n).
EvalMask MakeEvalMask(const TrackDims& dims, const QuerySet* queries,
                      const std::vector<std::uint8_t>* trajectory_mask);

// Percent of subset points within each threshold (distance <= tau), pooled
// over every scored (v, t, n). An empty subset yields nullopt per threshold.
// Throws kShapeMismatch.
std::vector<std::optional<double>> PositionAccuracy(
    const TrackPrediction& pred, const MultiViewTracks& gt, PointSubset subset,
    const std::vector<double>& thresholds, const EvalMask& mask = {});

// Percent of scored entries whose predicted occlusion (prob > 0.5) equals the
// ground-truth occlusion. Out-of-frame points count as occluded.
std::optional<double> OcclusionAccuracy(const TrackPrediction& pred,
                                        const MultiViewTracks& gt,
                                        const EvalMask& mask = {});

struct JaccardResult {
  std::vector<std::optional<double>> per_threshold;
  std::optional<double> average;
};

// TAP-Vid Average Jaccard: TP / (TP + FP + FN) per threshold, averaged.
JaccardResult AverageJaccard(const TrackPrediction& pred,
                             const MultiViewTracks& gt,
                             const std::vector<double>& thresholds,
                             const EvalMask& mask = {});

// Visibility transitions along each (v, n) trajectory, indexed v * N + n.
std::vector<int> OcclusionFrequency(const MultiViewTracks& gt);

// Marks the ceil(fraction * V * N) trajectories with the most transitions,
// ties broken toward lower (v, n). Throws kInvalidConfig unless
// 0 < fraction <= 1.
std::vector<std::uint8_t> OcclusionFrequencyFilter(const MultiViewTracks& gt,
                                                   double fraction);

struct EvalReport {
  std::vector<double> thresholds;
  std::vector<std::optional<double>> pck;      // visible points
  std::vector<std::optional<double>> pck_occ;  // in-frame occluded points
  std::optional<double> delta_avg;
  std::optional<double> delta_occ;
  std::optional<double> occlusion_accuracy;
  std::vector<std::optional<double>> jaccard;
  std::optional<double> average_jaccard;
  long visible_points = 0;
  long occluded_in_frame_points = 0;
  long evaluated_points = 0;
};

// Pooled (micro-averaged) report.
EvalReport Evaluate(const TrackPrediction& pred, const MultiViewTracks& gt,
                    const EvalMask& mask = {},
                    const std::vector<double>& thresholds = kPckThresholds);

// Mean of the per-view reports; views where a metric is undefined are
// skipped for that metric.
EvalReport EvaluatePerViewMean(const TrackPrediction& pred,
                               const MultiViewTracks& gt,
                               const EvalMask& mask = {},
                               const std::vector<double>& thresholds =
                                   kPckThresholds);

// Mean of the defined entries, nullopt when none is defined.
std::optional<double> MeanDefined(const std::vector<std::optional<double>>& xs);

// Metrics in report order under stable names ("pck@1", "delta_avg", ...).
std::vector<std::pair<std::string, std::optional<double>>> ReportMetrics(
    const EvalReport& report);

// One "name value" line per metric; undefined values print as "undefined".
std::string FormatReport(const EvalReport& report);

}  // namespace mvtap

#endif  // MVTAP_METRICS_H_
