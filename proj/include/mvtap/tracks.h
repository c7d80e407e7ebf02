#ifndef MVTAP_TRACKS_H_
#define MVTAP_TRACKS_H_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mvtap/geometry.h"

namespace mvtap {

// Shape of every per-(view, frame, point) array. Storage order is view-major,
// then frame, then point.
struct TrackDims {
  int views = 0;
  int frames = 0;
  int points = 0;

  size_t size() const {
    return static_cast<size_t>(views) * frames * points;
  }
  size_t index(int v, int t, int n) const {
    return (static_cast<size_t>(v) * frames + t) * points + n;
  }
  bool operator==(const TrackDims&) const = default;
};

// Ground-truth trajectories with visibility and in-frame flags.
// visible implies in_frame.
struct MultiViewTracks {
  TrackDims dims;
  std::vector<Pixel> xy;
  std::vector<std::uint8_t> visible;
  std::vector<std::uint8_t> in_frame;

  explicit MultiViewTracks(TrackDims d = {})
      : dims(d), xy(d.size(), Pixel::Zero()), visible(d.size(), 0),
        in_frame(d.size(), 0) {}

  Pixel& at(int v, int t, int n) { return xy[dims.index(v, t, n)]; }
  const Pixel& at(int v, int t, int n) const {
    return xy[dims.index(v, t, n)];
  }
  bool is_visible(int v, int t, int n) const {
    return visible[dims.index(v, t, n)] != 0;
  }
  bool is_in_frame(int v, int t, int n) const {
    return in_frame[dims.index(v, t, n)] != 0;
  }

  MultiViewTracks SelectViews(const std::vector<int>& views) const;
};

// Tracker output: pixel trajectories and occlusion probabilities in (0, 1).
// A point counts as occluded when its probability exceeds 0.5.
struct TrackPrediction {
  TrackDims dims;
  std::vector<Pixel> xy;
  std::vector<double> occlusion;

  explicit TrackPrediction(TrackDims d = {})
      : dims(d), xy(d.size(), Pixel::Zero()), occlusion(d.size(), 0.0) {}

  Pixel& at(int v, int t, int n) { return xy[dims.index(v, t, n)]; }
  const Pixel& at(int v, int t, int n) const {
    return xy[dims.index(v, t, n)];
  }
  bool predicted_occluded(int v, int t, int n) const {
    return occlusion[dims.index(v, t, n)] > 0.5;
  }

  TrackPrediction SelectViews(const std::vector<int>& views) const;
};

// Ground truth read as a prediction with hard visibility.
TrackPrediction AsPrediction(const MultiViewTracks& gt);

struct Query {
  int frame = 0;  // zero-based t_q
  Pixel xy = Pixel::Zero();
};

// One query per (view, point); every view's query denotes the same scene
// point, anchored at that view's own frame.
struct QuerySet {
  int views = 0;
  int points = 0;
  std::vector<Query> queries;

  QuerySet() = default;
  QuerySet(int v, int n) : views(v), points(n), queries(v * n) {}

  Query& at(int v, int n) { return queries[static_cast<size_t>(v) * points + n]; }
  const Query& at(int v, int n) const {
    return queries[static_cast<size_t>(v) * points + n];
  }

  QuerySet SelectViews(const std::vector<int>& views) const;
};

}  // namespace mvtap

#endif  // MVTAP_TRACKS_H_
