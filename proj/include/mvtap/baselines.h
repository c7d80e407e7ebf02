#ifndef MVTAP_BASELINES_H_
#define MVTAP_BASELINES_H_

#include <vector>

#include "mvtap/correlation.h"
#include "mvtap/geometry.h"
#include "mvtap/tracks.h"

namespace mvtap {

enum class RefineWhen { kFinal, kWindow };

struct RefineMode {
  RefineWhen when = RefineWhen::kFinal;
  int window = 8;
  bool use_ransac = false;
  RansacParams ransac;
  // Lift from predicted-visible views and rewrite predicted-occluded views
  // only.
  bool occluded_only = false;
  int min_views = 2;

  void Validate() const;
};

struct RefineStats {
  long refined = 0;  // (t, n) entries that were re-projected
  long kept = 0;     // entries left untouched (too few views, degenerate)
  int windows = 0;
};

// Lifts every (t, n) to 3D from its per-view predictions and writes the
// reprojection back into each view. Views where the point lands behind the
// camera keep their prediction; so does every view of a (t, n) whose
// triangulation fails. Occlusion probabilities pass through. Throws
// kInsufficientObservations when the rig has fewer than two views.
TrackPrediction TriangulationRefine(const TrackPrediction& tracks,
                                    const CameraRig& cameras,
                                    const RefineMode& mode,
                                    RefineStats* stats = nullptr);

// A query given in a single view: q = (x_q, y_q, t_q, v_q).
struct ViewQuery {
  int view = 0;
  int frame = 0;
  Pixel xy = Pixel::Zero();
};

struct Correspondence {
  int view = 0;
  int frame = 0;
  Pixel xy = Pixel::Zero();
  bool valid = true;
  double score = 0.0;
};

// Feature matching: dot-product correlation of the query feature against
// every cell of every frame of each other view; the best frame by peak
// response, then the peak cell (reported at its pixel position). Ties go to
// the lowest (t, row, col). With `restrict_to_query_frame` only t_q is
// searched.
std::vector<Correspondence> QueryInitFeature(const FeatureVolume& features,
                                             const ViewQuery& query,
                                             bool restrict_to_query_frame = false);

// Depth lifting: unproject the query with `depth`, reproject into each other
// view at t_q. Views that see the point behind the camera are marked
// invalid. Throws kNonPositiveDepth.
std::vector<Correspondence> QueryInitDepth(double depth,
                                           const CameraRig& cameras,
                                           const ViewQuery& query);

}  // namespace mvtap

#endif  // MVTAP_BASELINES_H_
