#include "radcam/cli.hpp"

#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"

#include "radcam/error.hpp"
#include "radcam/io.hpp"
#include "radcam/metrics.hpp"
#include "radcam/pipeline.hpp"
#include "radcam/synth.hpp"

namespace radcam {

namespace {

namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitPipeline = 1;
constexpr int kExitInput = 2;

struct CalibrateArgs {
  std::string radar;
  std::string annotations;
  std::string intrinsics;
  std::optional<double> start_ts;
  std::string start_ts_file;
  std::string out;
  std::uint64_t seed = 0;
  double max_range = 20.0;
  std::vector<double> zscore_thr{2.0, 2.0, 2.0};
  double window = 1.0;
  double ransac_thr = 8.0;
  bool least_squares_refine = false;
};

struct ProjectArgs {
  std::string calibration;
  std::string radar;
  std::string intrinsics;
  std::string out;
};

struct MetricsArgs {
  std::string projected;
  std::string annotations;
  std::string bboxes;
  double start_ts = 0.0;
};

struct SimulateArgs {
  std::string out_dir;
  ScenarioParams params;
  std::size_t clutter = 0;
};

std::string fixed4(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << v;
  return s.str();
}

std::string metrics_line(std::span<const PointPair> pairs) {
  std::string line = "AED=" + fixed4(aed(pairs));
  if (pairs.size() >= 2) line += " CDSD=" + fixed4(cdsd(pairs));
  return line;
}

int cmd_calibrate(const CalibrateArgs& a, std::ostream& out, std::ostream& err) {
  const auto detections = read_radar_csv(a.radar);
  const auto annotations = read_annotations_csv(a.annotations);
  const CameraModel cam = read_intrinsics_json(a.intrinsics);

  PipelineOptions opts;
  opts.start_timestamp = a.start_ts ? *a.start_ts : read_start_timestamp(a.start_ts_file);
  opts.max_range = a.max_range;
  opts.window_half_width = a.window;
  if (a.zscore_thr.size() != 3) {
    throw Error(ErrorCode::kValidation, "--zscore-thr expects three values X,Y,Z");
  }
  opts.zscore_thresholds = {a.zscore_thr[0], a.zscore_thr[1], a.zscore_thr[2]};
  opts.ransac.inlier_threshold = a.ransac_thr;
  opts.ransac.seed = a.seed;
  opts.robust_refinement = !a.least_squares_refine;
  opts.validate();

  std::vector<std::size_t> dropped;
  auto corrs = build_correspondences(detections, annotations, opts, &dropped);
  for (std::size_t i : dropped) {
    err << "note: annotation " << i << " has no usable radar window; dropped\n";
  }
  const CalibrationResult result = calibrate_correspondences(std::move(corrs), cam, opts);

  std::vector<PointPair> pairs;
  for (const auto& c : result.correspondences) {
    const Point3 pc = transform_point(result.pose, c.radar);
    if (pc.z() > 1e-9) pairs.push_back({c.pixel, project_camera_point(cam, pc)});
  }

  CalibrationFile file;
  file.pose = result.pose;
  file.euler = result.euler;
  file.rmse = result.rmse;
  file.aed = pairs.empty() ? 0.0 : aed(pairs);
  file.cdsd = pairs.size() < 2 ? 0.0 : cdsd(pairs);
  file.inlier_count = static_cast<std::size_t>(
      std::count(result.inlier_mask.begin(), result.inlier_mask.end(), true));
  file.solver_chosen = std::string(to_string(result.solver_chosen));
  file.seed = a.seed;
  write_calibration_json(a.out, file);

  out << "solver=" << file.solver_chosen << " pairs=" << result.correspondences_used
      << " inliers=" << file.inlier_count << '\n';
  out << "RMSE=" << fixed4(result.rmse) << '\n';
  out << metrics_line(pairs) << '\n';
  return kExitOk;
}

int cmd_project(const ProjectArgs& a, std::ostream& out, std::ostream& err) {
  const CalibrationFile calib = read_calibration_json(a.calibration);
  const auto detections = read_radar_csv(a.radar);
  const CameraModel cam = read_intrinsics_json(a.intrinsics);

  std::vector<TimedPoint> projected;
  std::size_t skipped = 0;
  for (const auto& d : detections) {
    const Point3 pc = transform_point(calib.pose, d.position);
    if (!(pc.z() > 1e-9)) {
      ++skipped;
      continue;
    }
    projected.push_back({d.timestamp, project_camera_point(cam, pc)});
  }
  write_projected_csv(a.out, projected);
  if (skipped > 0) {
    err << "warning: skipped " << skipped << " point(s) behind the camera\n";
  }
  out << "projected=" << projected.size() << " skipped=" << skipped << '\n';
  return kExitOk;
}

int cmd_metrics(const MetricsArgs& a, std::ostream& out, std::ostream&) {
  const auto projected = read_projected_csv(a.projected);
  const auto annotations = read_annotations_csv(a.annotations);
  std::vector<TimedPoint> observed;
  observed.reserve(annotations.size());
  for (const auto& an : annotations) {
    observed.push_back({an.local_timestamp + a.start_ts, an.pixel});
  }
  const std::vector<PointPair> pairs = match_by_timestamp(observed, projected);
  if (pairs.empty()) {
    throw Error(ErrorCode::kInsufficientData,
                "no annotation has a projected point within 0.05 s");
  }
  std::string line = metrics_line(pairs);
  if (!a.bboxes.empty()) {
    const auto boxes = read_bboxes_csv(a.bboxes);
    line += " Acc=" + fixed4(100.0 * acc(projected, boxes)) + "%";
  }
  out << line << '\n';
  return kExitOk;
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out, std::ostream&) {
  Scenario s = generate_scenario(a.params);
  if (a.clutter > 0) s = add_clutter(std::move(s), a.clutter, ClutterRegion{}, a.params.seed);

  std::error_code ec;
  fs::create_directories(a.out_dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + a.out_dir + ": " + ec.message());
  const fs::path dir(a.out_dir);
  write_radar_csv(dir / "radar.csv", s.detections);
  write_annotations_csv(dir / "annotations.csv", s.annotations);
  write_intrinsics_json(dir / "intrinsics.json", s.cam);
  write_start_timestamp(dir / "start_ts.txt", s.start_timestamp);

  CalibrationFile truth;
  truth.pose = s.ground_truth;
  truth.euler = rotation_to_euler(s.ground_truth.rotation);
  truth.inlier_count = s.annotations.size() - s.planted_outlier_indices.size();
  truth.solver_chosen = "ground_truth";
  truth.seed = a.params.seed;
  write_calibration_json(dir / "ground_truth.json", truth);

  out << "wrote " << s.detections.size() << " detections and " << s.annotations.size()
      << " annotations to " << dir.string() << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Radar-camera extrinsic calibration from corner reflector correspondences",
               "radcam"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  CalibrateArgs cal;
  auto* calibrate = app.add_subcommand("calibrate", "Estimate the radar-to-camera extrinsics");
  calibrate->add_option("--radar", cal.radar, "Radar detections CSV")->required();
  calibrate->add_option("--annotations", cal.annotations, "Reflector pixel annotations CSV")
      ->required();
  calibrate->add_option("--intrinsics", cal.intrinsics, "Camera intrinsics JSON")->required();
  auto* start_opt = calibrate->add_option("--start-ts", cal.start_ts,
                                          "Absolute timestamp of the first video frame");
  auto* start_file_opt = calibrate->add_option("--start-ts-file", cal.start_ts_file,
                                               "File holding the start timestamp");
  start_opt->excludes(start_file_opt);
  calibrate->add_option("--out", cal.out, "Output calibration JSON")->required();
  calibrate->add_option("--seed", cal.seed, "RANSAC seed");
  calibrate->add_option("--max-range", cal.max_range, "Static filter range gate, meters");
  calibrate->add_option("--zscore-thr", cal.zscore_thr, "Per-axis Z-score gates X,Y,Z")
      ->delimiter(',')
      ->expected(3);
  calibrate->add_option("--window", cal.window, "Aggregation window half width, seconds");
  calibrate->add_option("--ransac-thr", cal.ransac_thr, "RANSAC inlier threshold, pixels");
  calibrate->add_flag("--least-squares-refine", cal.least_squares_refine,
                      "Refine with plain least squares instead of the robust loss");

  ProjectArgs proj;
  auto* project = app.add_subcommand("project", "Project radar detections into the image");
  project->add_option("--calibration", proj.calibration, "Calibration JSON")->required();
  project->add_option("--radar", proj.radar, "Radar detections CSV")->required();
  project->add_option("--intrinsics", proj.intrinsics, "Camera intrinsics JSON")->required();
  project->add_option("--out", proj.out, "Output projected points CSV")->required();

  MetricsArgs met;
  auto* metrics = app.add_subcommand("metrics", "AED, CDSD and Acc of projected points");
  metrics->add_option("--projected", met.projected, "Projected points CSV")->required();
  metrics->add_option("--annotations", met.annotations, "Annotations CSV")->required();
  metrics->add_option("--bboxes", met.bboxes, "Bounding boxes CSV");
  metrics->add_option("--start-ts", met.start_ts, "Offset added to annotation timestamps");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Write a synthetic calibration scenario");
  auto& sp = sim.params;
  simulate->add_option("--out-dir", sim.out_dir, "Output directory")->required();
  simulate->add_option("--seed", sp.seed, "Scenario seed");
  simulate->add_option("--n-placements", sp.n_placements, "Reflector placements");
  simulate->add_option("--tilt-deg", sp.tilt_deg, "Downward rig pitch, degrees");
  simulate->add_option("--baseline", sp.baseline_m, "Camera-below-radar offset, meters");
  simulate->add_option("--sensor-height", sp.sensor_height_m, "Rig height, meters");
  simulate->add_option("--radar-noise", sp.radar_noise_sigma, "Radar noise sigma, meters");
  simulate->add_option("--pixel-noise", sp.pixel_noise_sigma, "Pixel noise sigma");
  simulate->add_option("--radar-rate", sp.radar_rate_hz, "Radar frame rate, Hz");
  simulate->add_option("--dwell", sp.dwell_s, "Seconds per placement");
  simulate->add_option("--outlier-fraction", sp.outlier_fraction, "Fraction of bad annotations");
  simulate->add_option("--misalignment-deg", sp.misalignment_deg, "Mount error bound, degrees");
  simulate->add_option("--misalignment-m", sp.misalignment_m, "Mount error bound, meters");
  simulate->add_option("--clutter", sim.clutter, "Moving/out-of-range clutter points to add");

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (calibrate->parsed()) {
      if (!cal.start_ts && cal.start_ts_file.empty()) {
        throw Error(ErrorCode::kSchema, "calibrate needs --start-ts or --start-ts-file");
      }
      return cmd_calibrate(cal, out, err);
    }
    if (project->parsed()) return cmd_project(proj, out, err);
    if (metrics->parsed()) return cmd_metrics(met, out, err);
    if (simulate->parsed()) return cmd_simulate(sim, out, err);
  } catch (const Error& e) {
    err << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
    return e.is_input_error() ? kExitInput : kExitPipeline;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitPipeline;
  }
  return kExitInput;
}

}  // namespace radcam
