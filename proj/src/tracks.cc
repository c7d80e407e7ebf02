#include "mvtap/tracks.h"

namespace mvtap {

MultiViewTracks MultiViewTracks::SelectViews(
    const std::vector<int>& views) const {
  TrackDims d = dims;
  d.views = static_cast<int>(views.size());
  MultiViewTracks out(d);
  for (int i = 0; i < d.views; ++i) {
    for (int t = 0; t < d.frames; ++t) {
      for (int n = 0; n < d.points; ++n) {
        const size_t src = dims.index(views[i], t, n);
        const size_t dst = d.index(i, t, n);
        out.xy[dst] = xy[src];
        out.visible[dst] = visible[src];
        out.in_frame[dst] = in_frame[src];
      }
    }
  }
  return out;
}

TrackPrediction TrackPrediction::SelectViews(
    const std::vector<int>& views) const {
  TrackDims d = dims;
  d.views = static_cast<int>(views.size());
  TrackPrediction out(d);
  for (int i = 0; i < d.views; ++i) {
    for (int t = 0; t < d.frames; ++t) {
      for (int n = 0; n < d.points; ++n) {
        const size_t src = dims.index(views[i], t, n);
        const size_t dst = d.index(i, t, n);
        out.xy[dst] = xy[src];
        out.occlusion[dst] = occlusion[src];
      }
    }
  }
  return out;
}

TrackPrediction AsPrediction(const MultiViewTracks& gt) {
  TrackPrediction p(gt.dims);
  p.xy = gt.xy;
  for (size_t i = 0; i < gt.visible.size(); ++i) {
    p.occlusion[i] = gt.visible[i] ? 0.0 : 1.0;
  }
  return p;
}

QuerySet QuerySet::SelectViews(const std::vector<int>& views) const {
  QuerySet out(static_cast<int>(views.size()), points);
  for (int i = 0; i < out.views; ++i) {
    for (int n = 0; n < points; ++n) out.at(i, n) = at(views[i], n);
  }
  return out;
}

}  // namespace mvtap
