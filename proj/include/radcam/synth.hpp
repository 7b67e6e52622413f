#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "radcam/geometry.hpp"
#include "radcam/pipeline.hpp"

namespace radcam {

inline constexpr int kImageWidth = 1280;
inline constexpr int kImageHeight = 720;

/// Corner reflector placement area on the ground, in the level rig frame (x forward, y left).
struct GroundExtent {
  double x_min = 3.0;
  double x_max = 15.0;
  double y_min = -4.0;
  double y_max = 4.0;
};

struct ScenarioParams {
  double tilt_deg = 10.0;       // downward pitch of the rig
  double baseline_m = 0.045;    // camera mounted this far below the radar
  int n_placements = 20;
  GroundExtent ground_extent;
  double sensor_height_m = 1.5;
  double radar_noise_sigma = 0.02;  // meters, per axis
  double pixel_noise_sigma = 1.0;
  double radar_rate_hz = 10.0;
  double dwell_s = 4.0;
  double outlier_fraction = 0.0;
  std::uint64_t seed = 0;

  // Ground truth deviates from the nominal mount by a seeded offset up to these bounds.
  double misalignment_deg = 2.0;
  double misalignment_m = 0.02;
  double start_timestamp = 1700000000.25;
  CameraModel camera = default_camera();

  static CameraModel default_camera();
  void validate() const;
};

struct Scenario {
  RigidTransform ground_truth;
  CameraModel cam;
  std::vector<RadarDetection> detections;
  std::vector<ImageAnnotation> annotations;
  double start_timestamp = 0.0;
  std::vector<Point3> true_placements;  // radar frame
  std::vector<std::size_t> planted_outlier_indices;
};

/// Axis mapping radar -> camera, the camera pitched down by `tilt_deg` relative to the
/// radar board, mounted `baseline_m` below the radar.
RigidTransform nominal_extrinsics(double tilt_deg, double baseline_m);

/// Throws kInfeasibleScenario when a placement cannot be made to project into the
/// 1280x720 image within 100 attempts.
Scenario generate_scenario(const ScenarioParams& params);

struct ClutterRegion {
  Point3 min{2.0, -8.0, -2.0};
  Point3 max{18.0, 8.0, 2.0};
};

/// Appends detections that the static filter must reject: alternately moving
/// (|v| in [0.2, 5] m/s) and static beyond 20 m range.
Scenario add_clutter(Scenario scenario, std::size_t n_points, const ClutterRegion& region,
                     std::uint64_t seed = 0);

}  // namespace radcam
