#ifndef MVTAP_FILES_H_
#define MVTAP_FILES_H_

#include <string>
#include <vector>

#include "mvtap/container.h"
#include "mvtap/scene_gen.h"
#include "mvtap/tracker.h"
#include "mvtap/tracks.h"

namespace mvtap {

// Shortest decimal text that parses back to the same double.
std::string FormatDouble(double x);

void PutSceneConfig(const SceneConfig& config, Container* c);
SceneConfig GetSceneConfig(const Container& c);
void PutTrackerConfig(const TrackerConfig& config, Container* c);
TrackerConfig GetTrackerConfig(const Container& c);

std::string TrackerModeName(TrackerMode mode);
TrackerMode ParseTrackerMode(const std::string& name);

// Scene files carry the generator config in the header and the cameras,
// world trajectories, occluders and anchor features as arrays.
Container SceneToContainer(const Scene& scene);
Scene SceneFromContainer(const Container& c);

// Track files: the prediction, the queries it was run from, and the scene
// views (in order) it covers.
struct TrackFile {
  TrackPrediction prediction;
  QuerySet queries;
  std::vector<int> views;
};

Container TracksToContainer(const TrackFile& tracks);
TrackFile TracksFromContainer(const Container& c);

Container WeightsToContainer(const ModelWeights& w, const TrackerConfig& config);
// Reads the tracker config back into `config` when non-null.
ModelWeights WeightsFromContainer(const Container& c,
                                  TrackerConfig* config = nullptr);

// Header keys stamped on every file: kind, toolkit version.
void StampHeader(const std::string& kind, Container* c);
// Throws kFormatError unless the file is of `kind`.
void ExpectKind(const Container& c, const std::string& kind);

}  // namespace mvtap

#endif  // MVTAP_FILES_H_
