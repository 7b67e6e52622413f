#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "radcam/geometry.hpp"
#include "radcam/pnp.hpp"

namespace radcam {

/// Radar frame: x normal to the board pointing forward, y left, z up along the board.
struct RadarDetection {
  double timestamp = 0.0;  // seconds, epoch based
  Point3 position = Point3::Zero();
  double velocity = 0.0;  // radial Doppler, m/s
  double range = 0.0;     // meters

  static RadarDetection at(double timestamp, const Point3& position, double velocity) {
    return {timestamp, position, velocity, position.norm()};
  }
};

struct ImageAnnotation {
  double local_timestamp = 0.0;  // seconds from video start
  Point2 pixel = Point2::Zero();
};

struct PipelineOptions {
  double start_timestamp = 0.0;
  double max_range = 20.0;
  double velocity_eps = 1e-3;
  double window_half_width = 1.0;
  std::array<double, 3> zscore_thresholds{2.0, 2.0, 2.0};
  RansacOptions ransac;
  // Seed pose for the iterative solver; the radar-to-camera axis mapping when unset.
  std::optional<RigidTransform> initial_pose;
  // Final all-pairs refinement uses Tukey's biweight at twice the RANSAC threshold
  // so gross outliers cannot drag the pose; false gives plain least squares.
  bool robust_refinement = true;

  void validate() const;
};

struct CalibrationResult {
  RigidTransform pose;
  EulerXYZ euler;
  double rmse = 0.0;  // full-set, after refinement
  std::vector<bool> inlier_mask;  // from the selected RANSAC solution
  std::vector<double> per_pair_error;
  SolverKind solver_chosen = SolverKind::kIterative;
  std::size_t correspondences_used = 0;

  std::vector<Correspondence> correspondences;
  std::optional<double> iterative_rmse;
  std::optional<double> algebraic_rmse;
  double selected_full_rmse = 0.0;  // selected candidate over every pair, before refinement
};

/// img_ts = local_ts + start_ts. Throws kOrdering when input is not ascending.
std::vector<double> absolutize_timestamps(std::span<const ImageAnnotation> annotations,
                                          double start_timestamp);

/// Keeps |velocity| <= velocity_eps and range < max_range.
std::vector<RadarDetection> static_filter(std::span<const RadarDetection> detections,
                                          const PipelineOptions& opts);

/// For every image timestamp, the closest radar timestamp (ties go to the earlier one).
/// Both inputs must be sorted ascending.
std::vector<double> associate_closest(std::span<const double> radar_timestamps,
                                      std::span<const double> image_timestamps);

/// Mean of the detections in [round(ts) - w, round(ts) + w] that pass the per-axis
/// Z-score gate. Empty when the window or the surviving set is empty.
std::optional<Point3> aggregate_window(std::span<const RadarDetection> detections,
                                       double associated_timestamp,
                                       const PipelineOptions& opts);

/// One correspondence per annotation whose window aggregation succeeds, in annotation
/// order. An annotation whose closest static return lies more than window_half_width
/// away in time has an empty window. Indices of dropped annotations go to `dropped` when given.
/// Throws kInsufficientData below 4 pairs.
std::vector<Correspondence> build_correspondences(std::span<const RadarDetection> detections,
                                                  std::span<const ImageAnnotation> annotations,
                                                  const PipelineOptions& opts,
                                                  std::vector<std::size_t>* dropped = nullptr);

CalibrationResult calibrate_correspondences(std::vector<Correspondence> corrs,
                                            const CameraModel& cam, const PipelineOptions& opts);

CalibrationResult calibrate(std::span<const RadarDetection> detections,
                            std::span<const ImageAnnotation> annotations, const CameraModel& cam,
                            const PipelineOptions& opts);

}  // namespace radcam
