#include "mvtap/files.h"

#include <charconv>
#include <cstdio>
#include <stdexcept>

#include "mvtap/error.h"

namespace mvtap {
namespace {

std::int64_t I(int x) { return static_cast<std::int64_t>(x); }

double ParseDouble(const Container& c, const std::string& key) {
  const std::string& s = c.Get(key);
  try {
    size_t used = 0;
    const double x = std::stod(s, &used);
    if (used == s.size()) return x;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::kFormatError, "header '" + key + "' is not a number");
}

int ParseInt(const Container& c, const std::string& key) {
  const std::string& s = c.Get(key);
  int x = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || end != s.data() + s.size()) {
    throw Error(ErrorCode::kFormatError, "header '" + key + "' is not an integer");
  }
  return x;
}

std::uint64_t ParseU64(const Container& c, const std::string& key) {
  const std::string& s = c.Get(key);
  std::uint64_t x = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || end != s.data() + s.size()) {
    throw Error(ErrorCode::kFormatError, "header '" + key + "' is not an integer");
  }
  return x;
}

void CheckShape(const Array& a, const std::vector<std::int64_t>& shape) {
  if (a.shape != shape) {
    throw Error(ErrorCode::kShapeMismatch,
                "array '" + a.name + "' has an unexpected shape");
  }
}

}  // namespace

std::string FormatDouble(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, r.ptr);
}

void StampHeader(const std::string& kind, Container* c) {
  c->Set("kind", kind);
  c->Set("toolkit_version", kToolkitVersion);
}

void ExpectKind(const Container& c, const std::string& kind) {
  if (!c.Has("kind") || c.Get("kind") != kind) {
    throw Error(ErrorCode::kFormatError, "expected a " + kind + " file");
  }
}

void PutSceneConfig(const SceneConfig& s, Container* c) {
  c->Set("scene.views", std::to_string(s.views));
  c->Set("scene.frames", std::to_string(s.frames));
  c->Set("scene.points", std::to_string(s.points));
  c->Set("scene.radius_min", FormatDouble(s.radius_min));
  c->Set("scene.radius_max", FormatDouble(s.radius_max));
  c->Set("scene.separation_min_deg", FormatDouble(s.separation_min_deg));
  c->Set("scene.separation_max_deg", FormatDouble(s.separation_max_deg));
  c->Set("scene.elevation_min_deg", FormatDouble(s.elevation_min_deg));
  c->Set("scene.elevation_max_deg", FormatDouble(s.elevation_max_deg));
  c->Set("scene.height", std::to_string(s.height));
  c->Set("scene.width", std::to_string(s.width));
  c->Set("scene.motion_amplitude", FormatDouble(s.motion_amplitude));
  c->Set("scene.cluster_size", std::to_string(s.cluster_size));
  c->Set("scene.occluders", std::to_string(s.occluders));
  c->Set("scene.occluder_radius_min", FormatDouble(s.occluder_radius_min));
  c->Set("scene.occluder_radius_max", FormatDouble(s.occluder_radius_max));
  c->Set("scene.feature_channels", std::to_string(s.feature_channels));
  c->Set("scene.feature_stride", std::to_string(s.feature_stride));
  c->Set("scene.feature_sigma_cells", FormatDouble(s.feature_sigma_cells));
  c->Set("scene.feature_noise", FormatDouble(s.feature_noise));
  c->Set("scene.seed", std::to_string(s.seed));
}

SceneConfig GetSceneConfig(const Container& c) {
  SceneConfig s;
  s.views = ParseInt(c, "scene.views");
  s.frames = ParseInt(c, "scene.frames");
  s.points = ParseInt(c, "scene.points");
  s.radius_min = ParseDouble(c, "scene.radius_min");
  s.radius_max = ParseDouble(c, "scene.radius_max");
  s.separation_min_deg = ParseDouble(c, "scene.separation_min_deg");
  s.separation_max_deg = ParseDouble(c, "scene.separation_max_deg");
  s.elevation_min_deg = ParseDouble(c, "scene.elevation_min_deg");
  s.elevation_max_deg = ParseDouble(c, "scene.elevation_max_deg");
  s.height = ParseInt(c, "scene.height");
  s.width = ParseInt(c, "scene.width");
  s.motion_amplitude = ParseDouble(c, "scene.motion_amplitude");
  s.cluster_size = ParseInt(c, "scene.cluster_size");
  s.occluders = ParseInt(c, "scene.occluders");
  s.occluder_radius_min = ParseDouble(c, "scene.occluder_radius_min");
  s.occluder_radius_max = ParseDouble(c, "scene.occluder_radius_max");
  s.feature_channels = ParseInt(c, "scene.feature_channels");
  s.feature_stride = ParseInt(c, "scene.feature_stride");
  s.feature_sigma_cells = ParseDouble(c, "scene.feature_sigma_cells");
  s.feature_noise = ParseDouble(c, "scene.feature_noise");
  s.seed = ParseU64(c, "scene.seed");
  s.Validate();
  return s;
}

std::string TrackerModeName(TrackerMode mode) {
  return mode == TrackerMode::kMultiView ? "multiview" : "flattened";
}

TrackerMode ParseTrackerMode(const std::string& name) {
  if (name == "multiview") return TrackerMode::kMultiView;
  if (name == "flattened") return TrackerMode::kFlattened;
  throw Error(ErrorCode::kInvalidConfig, "unknown tracker mode '" + name + "'");
}

void PutTrackerConfig(const TrackerConfig& t, Container* c) {
  c->Set("tracker.iterations", std::to_string(t.iterations));
  c->Set("tracker.radius", std::to_string(t.radius));
  c->Set("tracker.dim", std::to_string(t.dim));
  c->Set("tracker.blocks", std::to_string(t.blocks));
  c->Set("tracker.heads", std::to_string(t.heads));
  c->Set("tracker.mode", TrackerModeName(t.mode));
  c->Set("tracker.temporal_encoding", t.temporal_encoding ? "1" : "0");
}

TrackerConfig GetTrackerConfig(const Container& c) {
  TrackerConfig t;
  t.iterations = ParseInt(c, "tracker.iterations");
  t.radius = ParseInt(c, "tracker.radius");
  t.dim = ParseInt(c, "tracker.dim");
  t.blocks = ParseInt(c, "tracker.blocks");
  t.heads = ParseInt(c, "tracker.heads");
  t.mode = ParseTrackerMode(c.Get("tracker.mode"));
  t.temporal_encoding = ParseInt(c, "tracker.temporal_encoding") != 0;
  t.Validate();
  return t;
}

Container SceneToContainer(const Scene& scene) {
  const SceneConfig& s = scene.config;
  Container c;
  StampHeader("scene", &c);
  PutSceneConfig(s, &c);
  c.Set("scene.static_rig", scene.cameras.is_static() ? "1" : "0");

  const auto& cams = scene.cameras.cameras();
  std::vector<double> K, R, t;
  for (const Camera& cam : cams) {
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        K.push_back(cam.K()(i, j));
        R.push_back(cam.R()(i, j));
      }
      t.push_back(cam.t()(i));
    }
  }
  const auto n_cams = static_cast<std::int64_t>(cams.size());
  c.AddF64("cameras.K", {n_cams, 3, 3}, std::move(K));
  c.AddF64("cameras.R", {n_cams, 3, 3}, std::move(R));
  c.AddF64("cameras.t", {n_cams, 3}, std::move(t));

  std::vector<double> pts;
  for (const auto& p : scene.point_tracks) pts.insert(pts.end(), {p.x(), p.y(), p.z()});
  c.AddF64("points", {I(s.points), I(s.frames), 3}, std::move(pts));

  std::vector<double> centers, radii;
  for (const Occluder& o : scene.occluders) {
    for (const auto& p : o.centers) centers.insert(centers.end(), {p.x(), p.y(), p.z()});
    radii.push_back(o.radius);
  }
  const auto n_occ = static_cast<std::int64_t>(scene.occluders.size());
  c.AddF64("occluders.centers", {n_occ, I(s.frames), 3}, std::move(centers));
  c.AddF64("occluders.radius", {n_occ}, std::move(radii));

  std::vector<double> feats;
  for (int n = 0; n < scene.anchor_features.rows(); ++n) {
    for (int k = 0; k < scene.anchor_features.cols(); ++k) {
      feats.push_back(scene.anchor_features(n, k));
    }
  }
  c.AddF64("anchor_features",
           {scene.anchor_features.rows(), scene.anchor_features.cols()},
           std::move(feats));
  return c;
}

Scene SceneFromContainer(const Container& c) {
  ExpectKind(c, "scene");
  Scene scene;
  scene.config = GetSceneConfig(c);
  const SceneConfig& s = scene.config;
  const bool is_static = c.Get("scene.static_rig") == "1";
  const int n_cams = is_static ? s.views : s.views * s.frames;

  const Array& K = c.Find("cameras.K", DType::kF64);
  const Array& R = c.Find("cameras.R", DType::kF64);
  const Array& t = c.Find("cameras.t", DType::kF64);
  CheckShape(K, {n_cams, 3, 3});
  CheckShape(R, {n_cams, 3, 3});
  CheckShape(t, {n_cams, 3});
  std::vector<Camera> cams;
  for (int i = 0; i < n_cams; ++i) {
    Eigen::Matrix3d k, r;
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        k(a, b) = K.f64[9 * i + 3 * a + b];
        r(a, b) = R.f64[9 * i + 3 * a + b];
      }
    }
    cams.emplace_back(k, r, Eigen::Vector3d(t.f64[3 * i], t.f64[3 * i + 1],
                                            t.f64[3 * i + 2]));
  }
  scene.cameras = is_static
                      ? CameraRig::Static(std::move(cams), s.frames)
                      : CameraRig::PerFrame(std::move(cams), s.views, s.frames);

  const Array& pts = c.Find("points", DType::kF64);
  CheckShape(pts, {I(s.points), I(s.frames), 3});
  for (size_t i = 0; i < pts.f64.size(); i += 3) {
    scene.point_tracks.emplace_back(pts.f64[i], pts.f64[i + 1], pts.f64[i + 2]);
  }

  const Array& radii = c.Find("occluders.radius", DType::kF64);
  const Array& centers = c.Find("occluders.centers", DType::kF64);
  const auto n_occ = static_cast<int>(radii.element_count());
  CheckShape(centers, {n_occ, I(s.frames), 3});
  for (int o = 0; o < n_occ; ++o) {
    Occluder occ;
    occ.radius = radii.f64[o];
    for (int f = 0; f < s.frames; ++f) {
      const size_t i = (static_cast<size_t>(o) * s.frames + f) * 3;
      occ.centers.emplace_back(centers.f64[i], centers.f64[i + 1],
                               centers.f64[i + 2]);
    }
    scene.occluders.push_back(std::move(occ));
  }

  const Array& feats = c.Find("anchor_features", DType::kF64);
  CheckShape(feats, {I(s.points), I(s.feature_channels)});
  scene.anchor_features.resize(s.points, s.feature_channels);
  for (int n = 0; n < s.points; ++n) {
    for (int k = 0; k < s.feature_channels; ++k) {
      scene.anchor_features(n, k) =
          feats.f64[static_cast<size_t>(n) * s.feature_channels + k];
    }
  }
  return scene;
}

Container TracksToContainer(const TrackFile& tf) {
  const TrackDims& d = tf.prediction.dims;
  Container c;
  StampHeader("tracks", &c);
  c.Set("tracks.views", std::to_string(d.views));
  c.Set("tracks.frames", std::to_string(d.frames));
  c.Set("tracks.points", std::to_string(d.points));

  std::vector<double> xy;
  for (const Pixel& p : tf.prediction.xy) xy.insert(xy.end(), {p.x(), p.y()});
  c.AddF64("tracks.xy", {I(d.views), I(d.frames), I(d.points), 2}, std::move(xy));
  c.AddF64("tracks.occlusion", {I(d.views), I(d.frames), I(d.points)},
           tf.prediction.occlusion);

  std::vector<double> qf, qxy;
  for (const Query& q : tf.queries.queries) {
    qf.push_back(q.frame);
    qxy.insert(qxy.end(), {q.xy.x(), q.xy.y()});
  }
  c.AddF64("queries.frame", {I(tf.queries.views), I(tf.queries.points)},
           std::move(qf));
  c.AddF64("queries.xy", {I(tf.queries.views), I(tf.queries.points), 2},
           std::move(qxy));
  c.AddF64("views", {I(static_cast<int>(tf.views.size()))},
           std::vector<double>(tf.views.begin(), tf.views.end()));
  return c;
}

TrackFile TracksFromContainer(const Container& c) {
  ExpectKind(c, "tracks");
  TrackDims d{ParseInt(c, "tracks.views"), ParseInt(c, "tracks.frames"),
              ParseInt(c, "tracks.points")};
  TrackFile tf;
  tf.prediction = TrackPrediction(d);
  const Array& xy = c.Find("tracks.xy", DType::kF64);
  CheckShape(xy, {I(d.views), I(d.frames), I(d.points), 2});
  for (size_t i = 0; i < d.size(); ++i) {
    tf.prediction.xy[i] = Pixel(xy.f64[2 * i], xy.f64[2 * i + 1]);
  }
  const Array& occ = c.Find("tracks.occlusion", DType::kF64);
  CheckShape(occ, {I(d.views), I(d.frames), I(d.points)});
  tf.prediction.occlusion = occ.f64;

  tf.queries = QuerySet(d.views, d.points);
  const Array& qf = c.Find("queries.frame", DType::kF64);
  const Array& qxy = c.Find("queries.xy", DType::kF64);
  CheckShape(qf, {I(d.views), I(d.points)});
  CheckShape(qxy, {I(d.views), I(d.points), 2});
  for (size_t i = 0; i < tf.queries.queries.size(); ++i) {
    tf.queries.queries[i].frame = static_cast<int>(qf.f64[i]);
    tf.queries.queries[i].xy = Pixel(qxy.f64[2 * i], qxy.f64[2 * i + 1]);
  }
  const Array& views = c.Find("views", DType::kF64);
  CheckShape(views, {I(d.views)});
  for (double v : views.f64) tf.views.push_back(static_cast<int>(v));
  return tf;
}

Container WeightsToContainer(const ModelWeights& w,
                             const TrackerConfig& config) {
  w.CheckCompatible(config);
  Container c;
  StampHeader("weights", &c);
  PutTrackerConfig(config, &c);
  w.ForEachParam([&](const std::string& name, const nn::Matrix& m) {
    std::vector<double> values;
    values.reserve(m.size());
    for (int i = 0; i < m.rows(); ++i) {
      for (int j = 0; j < m.cols(); ++j) values.push_back(m(i, j));
    }
    c.AddF64(name, {m.rows(), m.cols()}, std::move(values));
  });
  return c;
}

ModelWeights WeightsFromContainer(const Container& c, TrackerConfig* config) {
  ExpectKind(c, "weights");
  const TrackerConfig cfg = GetTrackerConfig(c);
  ModelWeights w = ModelWeights::Zeros(cfg);
  w.ForEachParam([&](const std::string& name, nn::Matrix& m) {
    const Array& a = c.Find(name, DType::kF64);
    CheckShape(a, {m.rows(), m.cols()});
    for (int i = 0; i < m.rows(); ++i) {
      for (int j = 0; j < m.cols(); ++j) {
        m(i, j) = a.f64[static_cast<size_t>(i) * m.cols() + j];
      }
    }
  });
  if (config != nullptr) *config = cfg;
  return w;
}

}  // namespace mvtap
