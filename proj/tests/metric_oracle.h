#ifndef MVTAP_TESTS_METRIC_ORACLE_H_
#define MVTAP_TESTS_METRIC_ORACLE_H_

// Naive per-point re-implementation of the metric suite used as a test
// oracle. Written against the TAP-Vid definitions, not against metrics.cc.

#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "mvtap/tracks.h"

namespace mvtap::testing {

struct OracleReport {
  std::vector<std::optional<double>> pck, pck_occ, jaccard;
  std::optional<double> delta_avg, delta_occ, oa, aj;
};

struct Instance {
  MultiViewTracks gt;
  TrackPrediction pred;
  QuerySet queries;
};

inline std::optional<double> Mean(const std::vector<std::optional<double>>& xs) {
  double sum = 0.0;
  int n = 0;
  for (const auto& x : xs) {
    if (x) {
      sum += *x;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

inline OracleReport OracleEvaluate(const Instance& in) {
  const std::vector<double> taus = {1, 2, 4, 8, 16};
  const TrackDims& d = in.gt.dims;
  OracleReport r;
  // Gather every scored point as a flat record first.
  struct Rec {
    bool gt_vis, gt_in, pred_vis;
    double err;
  };
  std::vector<Rec> recs;
  for (int v = 0; v < d.views; ++v) {
    for (int n = 0; n < d.points; ++n) {
      for (int t = 0; t < d.frames; ++t) {
        if (t == in.queries.at(v, n).frame) continue;
        const size_t i = (static_cast<size_t>(v) * d.frames + t) * d.points + n;
        const double dx = in.pred.xy[i].x() - in.gt.xy[i].x();
        const double dy = in.pred.xy[i].y() - in.gt.xy[i].y();
        recs.push_back({in.gt.visible[i] != 0, in.gt.in_frame[i] != 0,
                        !(in.pred.occlusion[i] > 0.5), std::sqrt(dx * dx + dy * dy)});
      }
    }
  }
  for (double tau : taus) {
    long vis = 0, vis_hit = 0, occ = 0, occ_hit = 0, tp = 0, fp = 0, fn = 0;
    for (const Rec& p : recs) {
      const bool within = p.err <= tau;
      if (p.gt_vis) {
        ++vis;
        vis_hit += within;
      }
      if (p.gt_in && !p.gt_vis) {
        ++occ;
        occ_hit += within;
      }
      const bool ok = p.gt_vis && within;
      tp += p.pred_vis && ok;
      fp += p.pred_vis && !ok;
      fn += p.gt_vis && !(p.pred_vis && within);
    }
    r.pck.push_back(vis ? std::optional<double>(100.0 * vis_hit / vis) : std::nullopt);
    r.pck_occ.push_back(occ ? std::optional<double>(100.0 * occ_hit / occ) : std::nullopt);
    r.jaccard.push_back(tp + fp + fn ? std::optional<double>(100.0 * tp / (tp + fp + fn))
                                     : std::nullopt);
  }
  r.delta_avg = Mean(r.pck);
  r.delta_occ = Mean(r.pck_occ);
  r.aj = Mean(r.jaccard);
  long agree = 0;
  for (const Rec& p : recs) agree += p.pred_vis == p.gt_vis;
  if (!recs.empty()) r.oa = 100.0 * agree / recs.size();
  return r;
}

// Random small instance; errors are spread across the threshold range.
inline Instance RandomInstance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> V(1, 4), T(2, 8), N(1, 16);
  const TrackDims d{V(rng), T(rng), N(rng)};
  Instance in{MultiViewTracks(d), TrackPrediction(d), QuerySet(d.views, d.points)};
  std::uniform_real_distribution<double> u(0, 64), unit(0, 1);
  std::exponential_distribution<double> err(0.15);
  for (size_t i = 0; i < d.size(); ++i) {
    in.gt.xy[i] = Pixel(u(rng), u(rng));
    in.gt.in_frame[i] = unit(rng) < 0.85;
    in.gt.visible[i] = in.gt.in_frame[i] && unit(rng) < 0.7;
    const double a = 2 * M_PI * unit(rng);
    in.pred.xy[i] = in.gt.xy[i] + err(rng) * Pixel(std::cos(a), std::sin(a));
    in.pred.occlusion[i] = unit(rng);
  }
  std::uniform_int_distribution<int> tq(0, d.frames - 1);
  for (auto& q : in.queries.queries) q.frame = tq(rng);
  return in;
}

}  // namespace mvtap::testing

#endif  // MVTAP_TESTS_METRIC_ORACLE_H_
