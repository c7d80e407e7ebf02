#include "mvtap/cli.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "mvtap/baselines.h"
#include "mvtap/container.h"
#include "mvtap/error.h"
#include "mvtap/files.h"
#include "mvtap/metrics.h"
#include "mvtap/overfit.h"
#include "mvtap/plot.h"
#include "mvtap/scene_gen.h"
#include "mvtap/tracker.h"

namespace mvtap {
namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

Scene LoadScene(const std::string& path) {
  return SceneFromContainer(ReadContainer(path));
}

void Save(const std::string& path, const Container& c,
          const std::string& json_path) {
  WriteContainer(path, c);
  if (!json_path.empty()) WriteTextFile(json_path, ContainerToJson(c));
}

ViewSampling ParseStrategy(const std::string& s) {
  if (s == "nearest") return ViewSampling::kNearest;
  if (s == "random") return ViewSampling::kRandom;
  if (s == "farthest") return ViewSampling::kFarthest;
  throw Error(ErrorCode::kInvalidConfig, "unknown view strategy '" + s + "'");
}

QueryMode ParseQueryMode(const std::string& s) {
  if (s == "first") return QueryMode::kFirstVisible;
  if (s == "random") return QueryMode::kRandomVisible;
  throw Error(ErrorCode::kInvalidConfig, "unknown query mode '" + s + "'");
}

Json Optional(const std::optional<double>& x) {
  return x ? Json(*x) : Json(nullptr);
}

// Header entries copied from an input file into a derived output, except the
// ones the output stamps itself.
void CopyProvenance(const Container& from, Container* to) {
  for (const auto& [key, value] : from.header) {
    if (key == "kind" || key == "toolkit_version") continue;
    to->Set(key, value);
  }
}

std::vector<std::string> ProvenanceComments(const Container& c) {
  std::vector<std::string> out = {std::string("toolkit_version=") +
                                  kToolkitVersion};
  for (const auto& [key, value] : c.header) {
    if (key == "kind" || key == "toolkit_version") continue;
    out.push_back(key + "=" + value);
  }
  return out;
}

// ---------------------------------------------------------------- gen

struct GenOptions {
  SceneConfig config;
  std::string output;
  std::string json;
};

void AddGen(CLI::App* cmd, GenOptions* o) {
  SceneConfig& c = o->config;
  cmd->add_option("--views", c.views, "Number of cameras")->capture_default_str();
  cmd->add_option("--frames", c.frames, "Frames T")->capture_default_str();
  cmd->add_option("--points", c.points, "Tracked points N")->capture_default_str();
  cmd->add_option("--radius-min", c.radius_min)->capture_default_str();
  cmd->add_option("--radius-max", c.radius_max)->capture_default_str();
  cmd->add_option("--separation-min", c.separation_min_deg, "Degrees")
      ->capture_default_str();
  cmd->add_option("--separation-max", c.separation_max_deg, "Degrees")
      ->capture_default_str();
  cmd->add_option("--elevation-min", c.elevation_min_deg, "Degrees")
      ->capture_default_str();
  cmd->add_option("--elevation-max", c.elevation_max_deg, "Degrees")
      ->capture_default_str();
  cmd->add_option("--height", c.height)->capture_default_str();
  cmd->add_option("--width", c.width)->capture_default_str();
  cmd->add_option("--amplitude", c.motion_amplitude, "Motion amplitude")
      ->capture_default_str();
  cmd->add_option("--cluster-size", c.cluster_size)->capture_default_str();
  cmd->add_option("--occluders", c.occluders)->capture_default_str();
  cmd->add_option("--occluder-radius-min", c.occluder_radius_min)
      ->capture_default_str();
  cmd->add_option("--occluder-radius-max", c.occluder_radius_max)
      ->capture_default_str();
  cmd->add_option("--channels", c.feature_channels)->capture_default_str();
  cmd->add_option("--stride", c.feature_stride)->capture_default_str();
  cmd->add_option("--sigma", c.feature_sigma_cells, "Splat sigma in cells")
      ->capture_default_str();
  cmd->add_option("--noise", c.feature_noise, "Feature noise std")
      ->capture_default_str();
  cmd->add_option("--seed", c.seed)->capture_default_str();
  cmd->add_option("-o,--output", o->output, "Scene file")->required();
  cmd->add_option("--json", o->json, "Also write a JSON dump");
}

void CmdGen(const GenOptions& o, std::ostream& out) {
  const Scene scene = GenerateScene(o.config);
  Container c = SceneToContainer(scene);
  const MultiViewTracks gt = RenderGroundTruth(scene);
  std::vector<double> xy;
  for (const Pixel& p : gt.xy) xy.insert(xy.end(), {p.x(), p.y()});
  const TrackDims& d = gt.dims;
  c.AddF64("gt.xy", {d.views, d.frames, d.points, 2}, std::move(xy));
  c.AddU8("gt.visible", {d.views, d.frames, d.points}, gt.visible);
  c.AddU8("gt.in_frame", {d.views, d.frames, d.points}, gt.in_frame);
  Save(o.output, c, o.json);
  long visible = std::count(gt.visible.begin(), gt.visible.end(), 1);
  out << "scene " << o.output << " views=" << d.views << " frames=" << d.frames
      << " points=" << d.points << " seed=" << o.config.seed
      << " visible=" << visible << "/" << d.size() << '\n';
}

// ---------------------------------------------------------------- tracker

struct TrackerFlags {
  TrackerConfig config;
  std::string mode = "multiview";
  bool no_temporal_encoding = false;
  CLI::Option* radius = nullptr;
  CLI::Option* dim = nullptr;
  CLI::Option* blocks = nullptr;
  CLI::Option* heads = nullptr;
  CLI::Option* iterations = nullptr;
};

void AddTrackerFlags(CLI::App* cmd, TrackerFlags* f) {
  f->iterations = cmd->add_option("--iterations", f->config.iterations,
                                  "Refinement steps M")
                      ->capture_default_str();
  f->radius = cmd->add_option("--radius", f->config.radius, "Correlation radius")
                  ->capture_default_str();
  f->dim = cmd->add_option("--dim", f->config.dim, "Token width d")
               ->capture_default_str();
  f->blocks = cmd->add_option("--blocks", f->config.blocks, "Transformer blocks L")
                  ->capture_default_str();
  f->heads = cmd->add_option("--heads", f->config.heads)->capture_default_str();
  cmd->add_option("--mode", f->mode, "multiview | flattened")->capture_default_str();
  cmd->add_flag("--no-temporal-encoding", f->no_temporal_encoding);
}

TrackerConfig ResolveTracker(const TrackerFlags& f) {
  TrackerConfig c = f.config;
  c.mode = ParseTrackerMode(f.mode);
  c.temporal_encoding = !f.no_temporal_encoding;
  c.Validate();
  return c;
}

// Loaded weights fix the architecture; explicit shape flags must agree.
TrackerConfig MergeWithFile(const TrackerFlags& f, const TrackerConfig& file) {
  auto check = [](CLI::Option* opt, int flag, int stored, const char* name) {
    if (opt->count() > 0 && flag != stored) {
      throw Error(ErrorCode::kDimensionMismatch,
                  std::string("--") + name + " " + std::to_string(flag) +
                      " disagrees with the weights file (" +
                      std::to_string(stored) + ")");
    }
  };
  check(f.radius, f.config.radius, file.radius, "radius");
  check(f.dim, f.config.dim, file.dim, "dim");
  check(f.blocks, f.config.blocks, file.blocks, "blocks");
  check(f.heads, f.config.heads, file.heads, "heads");
  TrackerConfig c = file;
  if (f.iterations->count() > 0) c.iterations = f.config.iterations;
  c.mode = ParseTrackerMode(f.mode);
  c.temporal_encoding = !f.no_temporal_encoding;
  c.Validate();
  return c;
}

// ---------------------------------------------------------------- track

struct TrackOptions {
  std::string scene;
  std::string weights;
  std::uint64_t weights_seed = 0;
  TrackerFlags tracker;
  int views = 0;
  std::string strategy = "farthest";
  std::uint64_t sample_seed = 0;
  std::string query_mode = "first";
  std::uint64_t query_seed = 0;
  std::string output;
  std::string json;
};

void AddTrack(CLI::App* cmd, TrackOptions* o) {
  cmd->add_option("--scene", o->scene, "Scene file")->required();
  auto* w = cmd->add_option("--weights", o->weights, "Weights file");
  cmd->add_option("--weights-seed", o->weights_seed,
                  "Seed for random weights when no file is given")
      ->capture_default_str()
      ->excludes(w);
  AddTrackerFlags(cmd, &o->tracker);
  cmd->add_option("--views", o->views, "Track a subset of k views (0 = all)")
      ->capture_default_str();
  cmd->add_option("--strategy", o->strategy, "nearest | random | farthest")
      ->capture_default_str();
  cmd->add_option("--sample-seed", o->sample_seed, "Seed for random view sampling")
      ->capture_default_str();
  cmd->add_option("--query-mode", o->query_mode, "first | random")
      ->capture_default_str();
  cmd->add_option("--query-seed", o->query_seed)->capture_default_str();
  cmd->add_option("-o,--output", o->output, "Tracks file")->required();
  cmd->add_option("--json", o->json, "Also write a JSON dump");
}

void CmdTrack(const TrackOptions& o, std::ostream& out) {
  const Scene scene = LoadScene(o.scene);
  TrackerConfig config;
  ModelWeights weights;
  if (!o.weights.empty()) {
    TrackerConfig stored;
    weights = WeightsFromContainer(ReadContainer(o.weights), &stored);
    config = MergeWithFile(o.tracker, stored);
  } else {
    config = ResolveTracker(o.tracker);
    weights = ModelWeights::Random(config, o.weights_seed);
  }

  const MultiViewTracks gt_all = RenderGroundTruth(scene);
  const QuerySet queries_all =
      SampleQueries(gt_all, ParseQueryMode(o.query_mode), o.query_seed);
  std::vector<int> views(scene.config.views);
  for (int v = 0; v < scene.config.views; ++v) views[v] = v;
  const ViewSampling strategy = ParseStrategy(o.strategy);
  if (o.views != 0) {
    std::vector<Camera> refs;
    for (int v = 0; v < scene.config.views; ++v) {
      refs.push_back(scene.cameras.reference(v));
    }
    views = SampleViews(refs, o.views, strategy, o.sample_seed);
  }

  const FeatureVolume features = AllFeatureFields(scene).SelectViews(views);
  const QuerySet queries = queries_all.SelectViews(views);
  const CameraRig cameras = scene.cameras.Select(views);
  TrackDiagnostics diag;
  const TrackResult result =
      Track({features, queries, cameras}, weights, config, &diag);

  TrackFile tf{result.prediction, queries, views};
  Container c = TracksToContainer(tf);
  PutSceneConfig(scene.config, &c);
  PutTrackerConfig(config, &c);
  c.Set("weights.source", o.weights.empty() ? "random" : o.weights);
  c.Set("weights.seed", o.weights.empty() ? std::to_string(o.weights_seed) : "");
  c.Set("views.k", std::to_string(o.views));
  c.Set("views.strategy", o.strategy);
  c.Set("views.sample_seed", std::to_string(o.sample_seed));
  c.Set("queries.mode", o.query_mode);
  c.Set("queries.seed", std::to_string(o.query_seed));
  Save(o.output, c, o.json);

  out << "tracks " << o.output << " views=" << views.size()
      << " frames=" << tf.prediction.dims.frames
      << " points=" << tf.prediction.dims.points << " steps=" << diag.steps
      << " view_attention_layers=" << diag.view_attention_layers
      << " temporal_sequence=" << diag.temporal_sequence_length << '\n';
}

// ---------------------------------------------------------------- refine

struct RefineFlags {
  std::string when = "none";
  int window = 8;
  bool ransac = false;
  double threshold = 2.0;
  int iterations = 100;
  std::uint64_t seed = 0;
  bool occluded_only = false;
  int min_views = 2;
};

void AddRefineFlags(CLI::App* cmd, RefineFlags* f, const std::string& name) {
  cmd->add_option(name, f->when, "none | final | window")->capture_default_str();
  cmd->add_option("--window", f->window, "Window length in frames")
      ->capture_default_str();
  cmd->add_flag("--ransac", f->ransac, "RANSAC-filter the views");
  cmd->add_option("--ransac-threshold", f->threshold, "Inlier threshold (px)")
      ->capture_default_str();
  cmd->add_option("--ransac-iterations", f->iterations)->capture_default_str();
  cmd->add_option("--ransac-seed", f->seed)->capture_default_str();
  cmd->add_flag("--occluded-only", f->occluded_only,
                "Lift from visible views, rewrite occluded views only");
  cmd->add_option("--min-views", f->min_views)->capture_default_str();
}

std::optional<RefineMode> MakeRefineMode(const RefineFlags& f) {
  if (f.when == "none") return std::nullopt;
  RefineMode mode;
  if (f.when == "final") {
    mode.when = RefineWhen::kFinal;
  } else if (f.when == "window") {
    mode.when = RefineWhen::kWindow;
  } else {
    throw Error(ErrorCode::kInvalidConfig, "unknown refine mode '" + f.when + "'");
  }
  mode.window = f.window;
  mode.use_ransac = f.ransac;
  mode.ransac.threshold_px = f.threshold;
  mode.ransac.iterations = f.iterations;
  mode.ransac.seed = f.seed;
  mode.occluded_only = f.occluded_only;
  mode.min_views = f.min_views;
  mode.Validate();
  return mode;
}

Json RefineJson(const RefineFlags& f) {
  Json j;
  j["when"] = f.when;
  if (f.when != "none") {
    j["window"] = f.window;
    j["ransac"] = f.ransac;
    j["ransac_threshold"] = f.threshold;
    j["ransac_iterations"] = f.iterations;
    j["ransac_seed"] = f.seed;
    j["occluded_only"] = f.occluded_only;
    j["min_views"] = f.min_views;
  }
  return j;
}

void PutRefine(const RefineFlags& f, Container* c) {
  c->Set("refine.when", f.when);
  c->Set("refine.window", std::to_string(f.window));
  c->Set("refine.ransac", f.ransac ? "1" : "0");
  c->Set("refine.ransac_threshold", FormatDouble(f.threshold));
  c->Set("refine.ransac_iterations", std::to_string(f.iterations));
  c->Set("refine.ransac_seed", std::to_string(f.seed));
  c->Set("refine.occluded_only", f.occluded_only ? "1" : "0");
  c->Set("refine.min_views", std::to_string(f.min_views));
}

struct RefineOptions {
  std::string tracks;
  std::string scene;
  RefineFlags refine;
  std::string output;
  std::string json;
};

void AddRefine(CLI::App* cmd, RefineOptions* o) {
  cmd->add_option("--tracks", o->tracks, "Tracks file")->required();
  cmd->add_option("--scene", o->scene, "Scene file")->required();
  o->refine.when = "final";
  AddRefineFlags(cmd, &o->refine, "--mode");
  cmd->add_option("-o,--output", o->output, "Refined tracks file")->required();
  cmd->add_option("--json", o->json, "Also write a JSON dump");
}

void CmdRefine(const RefineOptions& o, std::ostream& out) {
  const Scene scene = LoadScene(o.scene);
  const Container in = ReadContainer(o.tracks);
  TrackFile tf = TracksFromContainer(in);
  const std::optional<RefineMode> mode = MakeRefineMode(o.refine);
  RefineStats stats;
  if (mode) {
    tf.prediction = TriangulationRefine(tf.prediction, scene.cameras.Select(tf.views),
                                        *mode, &stats);
  }
  Container c = TracksToContainer(tf);
  CopyProvenance(in, &c);
  PutRefine(o.refine, &c);
  Save(o.output, c, o.json);
  out << "refined " << o.output << " entries=" << stats.refined
      << " kept=" << stats.kept << " windows=" << stats.windows << '\n';
}

// ---------------------------------------------------------------- eval

struct EvalFlags {
  RefineFlags refine;
  double occ_top = 0.0;
  bool per_view = false;
};

void AddEvalFlags(CLI::App* cmd, EvalFlags* f) {
  AddRefineFlags(cmd, &f->refine, "--refine");
  cmd->add_option("--occ-top", f->occ_top,
                  "Score only this fraction of trajectories with the most "
                  "visibility transitions (0 = all)")
      ->capture_default_str();
  cmd->add_flag("--per-view", f->per_view,
                "Average per-view reports instead of pooling");
}

struct Evaluated {
  EvalReport report;
  RefineStats stats;
  std::vector<int> views;
};

Evaluated EvaluateTracks(const Scene& scene, const MultiViewTracks& gt_all,
                         const TrackFile& tf, const EvalFlags& f) {
  for (int v : tf.views) {
    if (v < 0 || v >= gt_all.dims.views) {
      throw Error(ErrorCode::kShapeMismatch, "tracks reference a view outside the scene");
    }
  }
  const MultiViewTracks gt = gt_all.SelectViews(tf.views);
  if (!(gt.dims == tf.prediction.dims)) {
    throw Error(ErrorCode::kShapeMismatch, "tracks do not match the scene");
  }
  Evaluated e;
  e.views = tf.views;
  TrackPrediction pred = tf.prediction;
  if (const auto mode = MakeRefineMode(f.refine)) {
    pred = TriangulationRefine(pred, scene.cameras.Select(tf.views), *mode, &e.stats);
  }
  std::vector<std::uint8_t> trajectories;
  if (f.occ_top != 0.0) trajectories = OcclusionFrequencyFilter(gt, f.occ_top);
  const EvalMask mask = MakeEvalMask(gt.dims, &tf.queries,
                                     f.occ_top != 0.0 ? &trajectories : nullptr);
  e.report = f.per_view ? EvaluatePerViewMean(pred, gt, mask)
                        : Evaluate(pred, gt, mask);
  return e;
}

Json RecordsJson(const Evaluated& e, const Container& tracks_header,
                 const EvalFlags& f) {
  Json j;
  j["toolkit_version"] = kToolkitVersion;
  Json prov = Json::object();
  for (const auto& [key, value] : tracks_header.header) {
    if (key == "kind" || key == "toolkit_version") continue;
    prov[key] = value;
  }
  j["provenance"] = prov;
  j["views"] = e.views;
  j["refine"] = RefineJson(f.refine);
  j["occ_top"] = f.occ_top == 0.0 ? Json(nullptr) : Json(f.occ_top);
  j["aggregation"] = f.per_view ? "per_view_mean" : "pooled";
  Json metrics = Json::object();
  for (const auto& [name, v] : ReportMetrics(e.report)) metrics[name] = Optional(v);
  j["metrics"] = metrics;
  j["counts"] = {{"visible", e.report.visible_points},
                 {"occluded_in_frame", e.report.occluded_in_frame_points},
                 {"evaluated", e.report.evaluated_points}};
  return j;
}

std::vector<Series> PckSeries(const EvalReport& r, const std::string& prefix) {
  return {{prefix + "pck", r.thresholds, r.pck},
          {prefix + "pck_occ", r.thresholds, r.pck_occ},
          {prefix + "jaccard", r.thresholds, r.jaccard}};
}

PlotSpec PckPlot(std::vector<std::string> comments) {
  PlotSpec spec;
  spec.title = "Accuracy vs threshold";
  spec.x_label = "threshold (px)";
  spec.y_label = "percent";
  spec.log2_x = true;
  spec.y_min = 0.0;
  spec.y_max = 100.0;
  spec.comments = std::move(comments);
  return spec;
}

std::vector<std::string> ListTrackFiles(const std::string& dir) {
  if (!fs::is_directory(dir)) {
    throw Error(ErrorCode::kIOError, "'" + dir + "' is not a directory");
  }
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".mvt") {
      files.push_back(entry.path().string());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

struct SweepOutputs {
  std::string series;
  std::string svg;
};

// Metric-vs-view-count over several track files of one scene. Files sharing
// a view count are averaged.
void RunSweep(const Scene& scene, const std::vector<std::string>& files,
              const EvalFlags& f, const SweepOutputs& outputs,
              std::ostream& out) {
  if (files.empty()) throw Error(ErrorCode::kIOError, "no track files to sweep");
  const MultiViewTracks gt_all = RenderGroundTruth(scene);
  const std::vector<std::string> names = {"delta_avg", "delta_occ",
                                          "occlusion_accuracy", "average_jaccard"};
  std::map<int, std::vector<std::vector<std::optional<double>>>> by_views;
  for (const auto& path : files) {
    const TrackFile tf = TracksFromContainer(ReadContainer(path));
    const Evaluated e = EvaluateTracks(scene, gt_all, tf, f);
    const EvalReport& r = e.report;
    auto& slot = by_views[static_cast<int>(tf.views.size())];
    slot.resize(names.size());
    const std::optional<double> values[] = {r.delta_avg, r.delta_occ,
                                            r.occlusion_accuracy, r.average_jaccard};
    out << "sweep " << path << " views=" << tf.views.size();
    for (size_t k = 0; k < names.size(); ++k) {
      slot[k].push_back(values[k]);
      out << ' ' << names[k] << '=';
      if (values[k]) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.4f", *values[k]);
        out << buf;
      } else {
        out << "undefined";
      }
    }
    out << '\n';
  }
  std::vector<Series> series(names.size());
  for (size_t k = 0; k < names.size(); ++k) {
    series[k].name = names[k];
    for (const auto& [views, values] : by_views) {
      series[k].x.push_back(views);
      series[k].y.push_back(MeanDefined(values[k]));
    }
  }
  std::vector<std::string> comments = {std::string("toolkit_version=") +
                                       kToolkitVersion};
  comments.push_back("scene.seed=" + std::to_string(scene.config.seed));
  comments.push_back("refine=" + RefineJson(f.refine).dump());
  if (!outputs.series.empty()) {
    WriteTextFile(outputs.series, SeriesToTsv(series, comments));
  }
  if (!outputs.svg.empty()) {
    PlotSpec spec;
    spec.title = "Metrics vs number of views";
    spec.x_label = "views";
    spec.y_label = "percent";
    spec.y_min = 0.0;
    spec.y_max = 100.0;
    spec.comments = comments;
    WriteTextFile(outputs.svg, LinePlotSvg(series, spec));
  }
}

struct EvalOptions {
  std::string tracks;
  std::string scene;
  EvalFlags flags;
  std::string records;
  std::string series;
  std::string svg;
  std::string sweep_dir;
  std::string sweep_series;
  std::string sweep_svg;
};

void AddEval(CLI::App* cmd, EvalOptions* o) {
  cmd->add_option("--tracks", o->tracks, "Tracks file");
  cmd->add_option("--scene", o->scene, "Scene file")->required();
  AddEvalFlags(cmd, &o->flags);
  cmd->add_option("--records", o->records, "Write JSON records here");
  cmd->add_option("--series", o->series, "Write PCK-vs-threshold series here");
  cmd->add_option("--svg", o->svg, "Write the PCK-vs-threshold plot here");
  cmd->add_option("--sweep-dir", o->sweep_dir,
                  "Evaluate every .mvt tracks file in this directory");
  cmd->add_option("--sweep-series", o->sweep_series,
                  "Metric-vs-views series for --sweep-dir");
  cmd->add_option("--sweep-svg", o->sweep_svg, "Metric-vs-views plot for --sweep-dir");
}

void CmdEval(const EvalOptions& o, std::ostream& out) {
  if (o.tracks.empty() && o.sweep_dir.empty()) {
    throw Error(ErrorCode::kInvalidConfig, "eval needs --tracks or --sweep-dir");
  }
  const Scene scene = LoadScene(o.scene);
  if (!o.tracks.empty()) {
    const Container c = ReadContainer(o.tracks);
    const TrackFile tf = TracksFromContainer(c);
    const Evaluated e = EvaluateTracks(scene, RenderGroundTruth(scene), tf, o.flags);
    out << FormatReport(e.report);
    if (MakeRefineMode(o.flags.refine)) {
      out << "refined_entries " << e.stats.refined << '\n';
      out << "kept_entries " << e.stats.kept << '\n';
    }
    if (!o.records.empty()) {
      WriteTextFile(o.records, RecordsJson(e, c, o.flags).dump(2) + "\n");
    }
    std::vector<std::string> comments = ProvenanceComments(c);
    comments.push_back("refine=" + RefineJson(o.flags.refine).dump());
    if (!o.series.empty()) {
      WriteTextFile(o.series, SeriesToTsv(PckSeries(e.report, ""), comments));
    }
    if (!o.svg.empty()) {
      WriteTextFile(o.svg, LinePlotSvg(PckSeries(e.report, ""), PckPlot(comments)));
    }
  }
  if (!o.sweep_dir.empty()) {
    RunSweep(scene, ListTrackFiles(o.sweep_dir), o.flags,
             {o.sweep_series, o.sweep_svg}, out);
  }
}

// ---------------------------------------------------------------- report

struct ReportOptions {
  std::string scene;
  std::vector<std::string> tracks;
  std::string sweep_dir;
  EvalFlags flags;
  std::string out_dir;
};

void AddReport(CLI::App* cmd, ReportOptions* o) {
  cmd->add_option("--scene", o->scene, "Scene file")->required();
  cmd->add_option("--tracks", o->tracks, "Tracks files");
  cmd->add_option("--sweep-dir", o->sweep_dir, "Directory of tracks files");
  AddEvalFlags(cmd, &o->flags);
  cmd->add_option("--out-dir", o->out_dir, "Output directory")->required();
}

void CmdReport(const ReportOptions& o, std::ostream& out) {
  std::vector<std::string> files = o.tracks;
  if (!o.sweep_dir.empty()) {
    for (auto& f : ListTrackFiles(o.sweep_dir)) files.push_back(f);
  }
  if (files.empty()) {
    throw Error(ErrorCode::kInvalidConfig, "report needs --tracks or --sweep-dir");
  }
  fs::create_directories(o.out_dir);
  const Scene scene = LoadScene(o.scene);
  const MultiViewTracks gt_all = RenderGroundTruth(scene);
  std::vector<Series> pck;
  std::ostringstream summary;
  for (const auto& path : files) {
    const TrackFile tf = TracksFromContainer(ReadContainer(path));
    const Evaluated e = EvaluateTracks(scene, gt_all, tf, o.flags);
    const std::string label = fs::path(path).stem().string();
    pck.push_back({label, e.report.thresholds, e.report.pck});
    summary << "# " << path << '\n' << FormatReport(e.report);
  }
  std::vector<std::string> comments = {std::string("toolkit_version=") +
                                       kToolkitVersion};
  comments.push_back("scene.seed=" + std::to_string(scene.config.seed));
  comments.push_back("refine=" + RefineJson(o.flags.refine).dump());
  const fs::path dir(o.out_dir);
  WriteTextFile((dir / "summary.txt").string(), summary.str());
  WriteTextFile((dir / "pck_vs_threshold.tsv").string(), SeriesToTsv(pck, comments));
  WriteTextFile((dir / "pck_vs_threshold.svg").string(),
                LinePlotSvg(pck, PckPlot(comments)));
  RunSweep(scene, files, o.flags,
           {(dir / "metric_vs_views.tsv").string(),
            (dir / "metric_vs_views.svg").string()},
           out);
  out << "report " << o.out_dir << " files=" << files.size() << '\n';
}

// ---------------------------------------------------------------- init-query

struct InitQueryOptions {
  std::string scene;
  std::string method = "feature";
  int view = 0;
  int point = 0;
  int frame = -1;
  bool restrict_frame = false;
  bool all = false;
};

void AddInitQuery(CLI::App* cmd, InitQueryOptions* o) {
  cmd->add_option("--scene", o->scene, "Scene file")->required();
  cmd->add_option("--method", o->method, "feature | depth")->capture_default_str();
  cmd->add_option("--view", o->view, "Query view")->capture_default_str();
  cmd->add_option("--point", o->point, "Query point")->capture_default_str();
  cmd->add_option("--frame", o->frame,
                  "Query frame (default: first visible frame)")
      ->capture_default_str();
  cmd->add_flag("--restrict-frame", o->restrict_frame,
                "Feature method searches only the query frame");
  cmd->add_flag("--all", o->all,
                "Run every (view, point) query and print summary statistics");
}

int FirstVisible(const MultiViewTracks& gt, int v, int n) {
  for (int t = 0; t < gt.dims.frames; ++t) {
    if (gt.is_visible(v, t, n)) return t;
  }
  throw Error(ErrorCode::kNoVisibleFrame, "point " + std::to_string(n) +
                                              " is never visible in view " +
                                              std::to_string(v));
}

std::vector<Correspondence> RunInitQuery(const Scene& scene,
                                         const FeatureVolume* features,
                                         const std::string& method,
                                         const ViewQuery& q, int point,
                                         bool restrict_frame) {
  if (method == "feature") return QueryInitFeature(*features, q, restrict_frame);
  if (method == "depth") {
    return QueryInitDepth(PointDepth(scene, q.view, q.frame, point), scene.cameras, q);
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown method '" + method + "'");
}

void CmdInitQuery(const InitQueryOptions& o, std::ostream& out) {
  const Scene scene = LoadScene(o.scene);
  const MultiViewTracks gt = RenderGroundTruth(scene);
  const TrackDims& d = gt.dims;
  std::optional<FeatureVolume> features;
  if (o.method == "feature") features = AllFeatureFields(scene);
  const FeatureVolume* fv = features ? &*features : nullptr;
  const double cell = scene.config.feature_stride;

  if (!o.all) {
    if (o.view < 0 || o.view >= d.views || o.point < 0 || o.point >= d.points) {
      throw Error(ErrorCode::kInvalidConfig, "query view or point out of range");
    }
    const int frame = o.frame >= 0 ? o.frame : FirstVisible(gt, o.view, o.point);
    if (frame >= d.frames) throw Error(ErrorCode::kInvalidConfig, "frame out of range");
    const ViewQuery q{o.view, frame, gt.at(o.view, frame, o.point)};
    out << "query view=" << q.view << " frame=" << q.frame << " x=" << q.xy.x()
        << " y=" << q.xy.y() << '\n';
    for (const Correspondence& c :
         RunInitQuery(scene, fv, o.method, q, o.point, o.restrict_frame)) {
      char buf[160];
      const double err = (c.xy - gt.at(c.view, c.frame, o.point)).norm();
      std::snprintf(buf, sizeof(buf),
                    "view %d frame %d x %.6f y %.6f valid %d error_px %.6f\n",
                    c.view, c.frame, c.xy.x(), c.xy.y(), c.valid ? 1 : 0, err);
      out << buf;
    }
    return;
  }

  long total = 0, within_cell = 0, invalid = 0;
  double max_err = 0.0;
  for (int v = 0; v < d.views; ++v) {
    for (int n = 0; n < d.points; ++n) {
      const int frame = FirstVisible(gt, v, n);
      const ViewQuery q{v, frame, gt.at(v, frame, n)};
      for (const Correspondence& c :
           RunInitQuery(scene, fv, o.method, q, n, o.restrict_frame)) {
        if (!c.valid) {
          ++invalid;
          continue;
        }
        const double err = (c.xy - gt.at(c.view, c.frame, n)).norm();
        ++total;
        within_cell += err <= cell;
        max_err = std::max(max_err, err);
      }
    }
  }
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "method %s correspondences %ld invalid %ld within_cell %.4f "
                "max_error_px %.6g\n",
                o.method.c_str(), total, invalid,
                total > 0 ? 100.0 * within_cell / total : 0.0, max_err);
  out << buf;
}

// ---------------------------------------------------------------- overfit

struct OverfitOptions {
  std::vector<std::string> scenes;
  bool online = false;
  int steps = 500;
  double lr = AdamConfig().learning_rate;
  int warmup = AdamConfig().warmup_steps;
  double clip = AdamConfig().clip_norm;
  std::uint64_t init_seed = 0;
  TrackerFlags tracker;
  std::string output;
  std::string history;
  std::string json;
};

void AddOverfit(CLI::App* cmd, OverfitOptions* o) {
  cmd->add_option("--scene", o->scenes, "Training scene file(s)")->required();
  cmd->add_flag("--online", o->online,
                "Each step trains on a fresh scene generated from the first "
                "scene's config (seed + 1 + step)");
  cmd->add_option("--steps", o->steps)->capture_default_str();
  cmd->add_option("--lr", o->lr, "Peak learning rate")->capture_default_str();
  cmd->add_option("--warmup", o->warmup, "Warmup steps")->capture_default_str();
  cmd->add_option("--clip", o->clip, "Gradient-norm clip (0 = off)")
      ->capture_default_str();
  cmd->add_option("--init-seed", o->init_seed, "Seed of the random init")
      ->capture_default_str();
  AddTrackerFlags(cmd, &o->tracker);
  cmd->add_option("-o,--output", o->output, "Weights file")->required();
  cmd->add_option("--history", o->history, "Write the loss curve here");
  cmd->add_option("--json", o->json, "Also write a JSON dump");
}

void CmdOverfit(const OverfitOptions& o, std::ostream& out) {
  const TrackerConfig config = ResolveTracker(o.tracker);
  std::vector<Scene> scenes;
  for (const auto& path : o.scenes) scenes.push_back(LoadScene(path));
  auto example = [](const Scene& scene) {
    TrainingExample ex{AllFeatureFields(scene), {}, scene.cameras,
                       RenderGroundTruth(scene)};
    ex.queries = SampleQueries(ex.gt, QueryMode::kFirstVisible, scene.config.seed);
    return ex;
  };
  OverfitConfig oc;
  oc.steps = o.steps;
  oc.adam.learning_rate = o.lr;
  oc.adam.warmup_steps = o.warmup;
  oc.adam.decay_steps = o.steps;
  oc.adam.clip_norm = o.clip;
  const ModelWeights init = ModelWeights::Random(config, o.init_seed);
  OverfitResult result;
  if (o.online) {
    const SceneConfig base = scenes.front().config;
    result = TrainOnline(
        [&](int step) {
          if (step == 0) return example(scenes.front());
          SceneConfig c = base;
          c.seed = base.seed + 1 + static_cast<std::uint64_t>(step);
          return MakeExample(c);
        },
        init, config, oc);
  } else {
    std::vector<TrainingExample> examples;
    for (const Scene& s : scenes) examples.push_back(example(s));
    result = Overfit(examples, init, config, oc);
  }

  Container c = WeightsToContainer(result.weights, config);
  c.Set("train.steps", std::to_string(o.steps));
  c.Set("train.online", o.online ? "1" : "0");
  c.Set("train.lr", FormatDouble(o.lr));
  c.Set("train.warmup", std::to_string(o.warmup));
  c.Set("train.clip", FormatDouble(o.clip));
  c.Set("train.init_seed", std::to_string(o.init_seed));
  std::string seeds;
  for (const Scene& s : scenes) {
    seeds += (seeds.empty() ? "" : ",") + std::to_string(s.config.seed);
  }
  c.Set("train.scene_seeds", seeds);
  Save(o.output, c, o.json);

  if (!o.history.empty()) {
    Series track{"track_loss", {}, {}}, occ{"occlusion_loss", {}, {}};
    for (const auto& r : result.history) {
      track.x.push_back(r.step);
      track.y.push_back(r.loss.track);
      occ.x.push_back(r.step);
      occ.y.push_back(r.loss.occlusion);
    }
    WriteTextFile(o.history,
                  SeriesToTsv({track, occ}, ProvenanceComments(c)));
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "weights %s params=%ld initial_loss=%.6f final_loss=%.6f\n",
                o.output.c_str(), result.weights.ParameterCount(),
                result.initial.total(), result.final.total());
  out << buf;
}

// ---------------------------------------------------------------- run

struct RunOptions {
  std::string manifest;
};

std::string ValueText(const Json& v) {
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

// {"a_b": 1, "flag": true} -> {"--a-b", "1", "--flag"}.
void AppendFlags(const Json& obj, const std::map<std::string, std::string>& rename,
                 std::vector<std::string>* args) {
  if (!obj.is_object()) {
    throw Error(ErrorCode::kFormatError, "manifest section must be an object");
  }
  for (const auto& [key, value] : obj.items()) {
    std::string flag;
    if (auto it = rename.find(key); it != rename.end()) {
      flag = it->second;
    } else {
      flag = "--" + key;
      std::replace(flag.begin(), flag.end(), '_', '-');
    }
    if (value.is_boolean()) {
      if (value.get<bool>()) args->push_back(flag);
      continue;
    }
    args->push_back(flag);
    args->push_back(ValueText(value));
  }
}

int CmdRun(const RunOptions& o, std::ostream& out, std::ostream& err) {
  std::ifstream f(o.manifest);
  if (!f) throw Error(ErrorCode::kIOError, "cannot open '" + o.manifest + "'");
  Json m;
  try {
    m = Json::parse(f);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kFormatError, std::string("manifest: ") + e.what());
  }
  if (!m.contains("output_dir")) {
    throw Error(ErrorCode::kFormatError, "manifest needs output_dir");
  }
  const fs::path dir = m["output_dir"].get<std::string>();
  fs::create_directories(dir);
  auto run = [&](std::vector<std::string> args) {
    args.insert(args.begin(), "mvtap");
    return RunCli(args, out, err);
  };

  std::string scene_path;
  if (m.contains("scene_file")) {
    scene_path = m["scene_file"].get<std::string>();
  } else {
    scene_path = (dir / "scene.mvt").string();
    std::vector<std::string> args = {"gen", "-o", scene_path};
    if (m.contains("scene")) AppendFlags(m["scene"], {}, &args);
    if (int rc = run(args)) return rc;
  }

  const std::string tracks_path = (dir / "tracks.mvt").string();
  std::vector<std::string> track = {"track", "--scene", scene_path, "-o", tracks_path};
  if (m.contains("weights_file")) {
    track.insert(track.end(), {"--weights", m["weights_file"].get<std::string>()});
  } else if (m.contains("weights_seed")) {
    track.insert(track.end(), {"--weights-seed", ValueText(m["weights_seed"])});
  }
  if (m.contains("tracker")) AppendFlags(m["tracker"], {}, &track);
  if (m.contains("views")) {
    AppendFlags(m["views"],
                {{"k", "--views"}, {"strategy", "--strategy"}, {"seed", "--sample-seed"}},
                &track);
  }
  if (int rc = run(track)) return rc;

  std::vector<std::string> eval = {"eval",
                                   "--scene",
                                   scene_path,
                                   "--tracks",
                                   tracks_path,
                                   "--records",
                                   (dir / "records.json").string(),
                                   "--series",
                                   (dir / "pck.tsv").string(),
                                   "--svg",
                                   (dir / "pck.svg").string()};
  if (m.contains("refine")) {
    AppendFlags(m["refine"],
                {{"when", "--refine"},
                 {"threshold", "--ransac-threshold"},
                 {"iterations", "--ransac-iterations"},
                 {"seed", "--ransac-seed"}},
                &eval);
  }
  if (m.contains("occ_top")) eval.insert(eval.end(), {"--occ-top", ValueText(m["occ_top"])});
  if (m.value("per_view", false)) eval.push_back("--per-view");
  std::ostringstream report;
  {
    std::vector<std::string> args = eval;
    args.insert(args.begin(), "mvtap");
    if (int rc = RunCli(args, report, err)) return rc;
  }
  WriteTextFile((dir / "report.txt").string(), report.str());
  out << report.str();

  Json echo = m;
  echo["toolkit_version"] = kToolkitVersion;
  WriteTextFile((dir / "manifest.json").string(), echo.dump(2) + "\n");
  return 0;
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"Multi-view point tracking toolkit"};
  app.name(args.empty() ? "mvtap" : fs::path(args[0]).filename().string());
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolkitVersion);

  GenOptions gen;
  AddGen(app.add_subcommand("gen", "Generate a synthetic multi-view scene"), &gen);
  TrackOptions track;
  AddTrack(app.add_subcommand("track", "Run the tracker on a scene"), &track);
  EvalOptions eval;
  AddEval(app.add_subcommand("eval", "Score tracks against scene ground truth"),
          &eval);
  RefineOptions refine;
  AddRefine(app.add_subcommand("refine", "Triangulation-based track refinement"),
            &refine);
  InitQueryOptions init_query;
  AddInitQuery(app.add_subcommand("init-query",
                                  "Cross-view query initialization (feature "
                                  "matching or depth lifting)"),
               &init_query);
  ReportOptions report;
  AddReport(app.add_subcommand("report", "Plot data for a set of track files"),
            &report);
  OverfitOptions overfit;
  AddOverfit(app.add_subcommand("overfit", "Fit tracker weights to scenes"),
             &overfit);
  RunOptions run;
  app.add_subcommand("run", "Run gen/track/eval from a JSON manifest")
      ->add_option("--manifest", run.manifest, "Manifest file")
      ->required();

  std::vector<std::string> rev;
  for (size_t i = args.size(); i-- > 1;) rev.push_back(args[i]);
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kToolkitVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << ErrorCodeName(ErrorCode::kInvalidConfig) << ": " << e.what() << '\n';
    return 2;
  }

  try {
    const CLI::App* cmd = app.get_subcommands().front();
    const std::string name = cmd->get_name();
    if (name == "gen") CmdGen(gen, out);
    if (name == "track") CmdTrack(track, out);
    if (name == "eval") CmdEval(eval, out);
    if (name == "refine") CmdRefine(refine, out);
    if (name == "init-query") CmdInitQuery(init_query, out);
    if (name == "report") CmdReport(report, out);
    if (name == "overfit") CmdOverfit(overfit, out);
    if (name == "run") return CmdRun(run, out, err);
  } catch (const Error& e) {
    err << ErrorCodeName(e.code()) << ": " << e.what() << '\n';
    return 1;
  } catch (const fs::filesystem_error& e) {
    err << ErrorCodeName(ErrorCode::kIOError) << ": " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace mvtap
