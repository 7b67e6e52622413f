#include "radcam/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "radcam/error.hpp"
#include "radcam/optim.hpp"

namespace radcam {

namespace {

constexpr std::size_t kMinPairs = 4;
constexpr std::size_t kMinAlgebraicPairs = 6;

}  // namespace

void PipelineOptions::validate() const {
  if (!(max_range > 0.0)) throw Error(ErrorCode::kValidation, "max range must be positive");
  if (!(velocity_eps >= 0.0)) {
    throw Error(ErrorCode::kValidation, "velocity epsilon must be non-negative");
  }
  if (!(window_half_width > 0.0)) {
    throw Error(ErrorCode::kValidation, "window half width must be positive");
  }
  for (double t : zscore_thresholds) {
    if (!(t > 0.0)) throw Error(ErrorCode::kValidation, "Z-score thresholds must be positive");
  }
  ransac.validate();
}

std::vector<double> absolutize_timestamps(std::span<const ImageAnnotation> annotations,
                                          double start_timestamp) {
  std::vector<double> out;
  out.reserve(annotations.size());
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    if (i > 0 && annotations[i].local_timestamp < annotations[i - 1].local_timestamp) {
      throw Error(ErrorCode::kOrdering,
                  "annotation timestamps must be ascending (row " + std::to_string(i) + ")");
    }
    out.push_back(annotations[i].local_timestamp + start_timestamp);
  }
  return out;
}

std::vector<RadarDetection> static_filter(std::span<const RadarDetection> detections,
                                          const PipelineOptions& opts) {
  std::vector<RadarDetection> out;
  std::copy_if(detections.begin(), detections.end(), std::back_inserter(out),
               [&](const RadarDetection& d) {
                 return std::abs(d.velocity) <= opts.velocity_eps && d.range < opts.max_range;
               });
  return out;
}

std::vector<double> associate_closest(std::span<const double> radar_timestamps,
                                      std::span<const double> image_timestamps) {
  if (radar_timestamps.empty() || image_timestamps.empty()) {
    throw Error(ErrorCode::kEmptyInput, "timestamp association needs non-empty inputs");
  }
  std::vector<double> out;
  out.reserve(image_timestamps.size());
  for (double ts : image_timestamps) {
    const auto hi = std::lower_bound(radar_timestamps.begin(), radar_timestamps.end(), ts);
    if (hi == radar_timestamps.begin()) {
      out.push_back(*hi);
    } else if (hi == radar_timestamps.end()) {
      out.push_back(*(hi - 1));
    } else {
      const double before = *(hi - 1);
      out.push_back(ts - before <= *hi - ts ? before : *hi);
    }
  }
  return out;
}

std::optional<Point3> aggregate_window(std::span<const RadarDetection> detections,
                                       double associated_timestamp,
                                       const PipelineOptions& opts) {
  const double center = std::round(associated_timestamp);
  const double lo = center - opts.window_half_width;
  const double hi = center + opts.window_half_width;

  std::vector<Point3> window;
  for (const auto& d : detections) {
    if (d.timestamp >= lo && d.timestamp <= hi) window.push_back(d.position);
  }
  if (window.empty()) return std::nullopt;

  std::array<std::vector<double>, 3> scores;
  for (int axis = 0; axis < 3; ++axis) {
    std::vector<double> values(window.size());
    std::transform(window.begin(), window.end(), values.begin(),
                   [axis](const Point3& p) { return p(axis); });
    scores[axis] = zscore(values);
  }

  Point3 sum = Point3::Zero();
  std::size_t kept = 0;
  for (std::size_t i = 0; i < window.size(); ++i) {
    bool keep = true;
    for (int axis = 0; axis < 3; ++axis) {
      keep = keep && std::abs(scores[axis][i]) < opts.zscore_thresholds[axis];
    }
    if (keep) {
      sum += window[i];
      ++kept;
    }
  }
  if (kept == 0) return std::nullopt;
  return Point3(sum / static_cast<double>(kept));
}

std::vector<Correspondence> build_correspondences(std::span<const RadarDetection> detections,
                                                  std::span<const ImageAnnotation> annotations,
                                                  const PipelineOptions& opts,
                                                  std::vector<std::size_t>* dropped) {
  opts.validate();
  if (annotations.size() < kMinPairs) {
    throw Error(ErrorCode::kInsufficientData,
                "need at least 4 annotations, got " + std::to_string(annotations.size()));
  }

  // Annotation order is free; timestamps are absolutized on a sorted view.
  std::vector<std::size_t> order(annotations.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return annotations[a].local_timestamp < annotations[b].local_timestamp;
  });
  std::vector<ImageAnnotation> sorted;
  sorted.reserve(order.size());
  for (std::size_t i : order) sorted.push_back(annotations[i]);
  const std::vector<double> sorted_ts = absolutize_timestamps(sorted, opts.start_timestamp);
  std::vector<double> image_ts(annotations.size());
  for (std::size_t k = 0; k < order.size(); ++k) image_ts[order[k]] = sorted_ts[k];

  std::vector<RadarDetection> radar = static_filter(detections, opts);
  std::stable_sort(radar.begin(), radar.end(), [](const RadarDetection& a, const RadarDetection& b) {
    return a.timestamp < b.timestamp;
  });
  if (radar.empty()) {
    throw Error(ErrorCode::kInsufficientData, "no radar detections survive the static filter");
  }
  std::vector<double> radar_ts(radar.size());
  std::transform(radar.begin(), radar.end(), radar_ts.begin(),
                 [](const RadarDetection& d) { return d.timestamp; });

  const std::vector<double> associated = associate_closest(radar_ts, image_ts);

  std::vector<Correspondence> out;
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    // No static return within a window of the annotation: nothing to pair.
    std::optional<Point3> mean;
    if (std::abs(associated[i] - image_ts[i]) <= opts.window_half_width) {
      mean = aggregate_window(radar, associated[i], opts);
    }
    if (!mean) {
      if (dropped) dropped->push_back(i);
      continue;
    }
    out.push_back({*mean, annotations[i].pixel, image_ts[i], i});
  }
  if (out.size() < kMinPairs) {
    throw Error(ErrorCode::kInsufficientData,
                "only " + std::to_string(out.size()) +
                    " radar-camera pairs after aggregation; need at least 4");
  }
  return out;
}

CalibrationResult calibrate_correspondences(std::vector<Correspondence> corrs,
                                            const CameraModel& cam, const PipelineOptions& opts) {
  opts.validate();
  cam.validate();
  if (corrs.size() < kMinPairs) {
    throw Error(ErrorCode::kInsufficientData,
                "need at least 4 correspondences, got " + std::to_string(corrs.size()));
  }
  RigidTransform init;
  init.rotation = radar_to_camera_axes();
  if (opts.initial_pose) init = *opts.initial_pose;

  std::optional<PnpSolution> iterative;
  std::optional<PnpSolution> algebraic;
  std::string iterative_error = "not run";
  std::string algebraic_error = "fewer than 6 pairs";
  try {
    iterative = ransac_pnp(corrs, cam, SolverKind::kIterative, opts.ransac, init);
  } catch (const Error& e) {
    iterative_error = e.what();
  }
  if (corrs.size() >= kMinAlgebraicPairs) {
    try {
      algebraic = ransac_pnp(corrs, cam, SolverKind::kAlgebraic, opts.ransac, init);
    } catch (const Error& e) {
      algebraic_error = e.what();
    }
  }
  if (!iterative && !algebraic) {
    throw Error(ErrorCode::kCalibrationFailure, "both PnP solvers failed: iterative: " +
                                                    iterative_error +
                                                    "; algebraic: " + algebraic_error);
  }

  CalibrationResult result;
  if (iterative) result.iterative_rmse = iterative->rmse;
  if (algebraic) result.algebraic_rmse = algebraic->rmse;
  const bool use_algebraic = !iterative || (algebraic && algebraic->rmse < iterative->rmse);
  const PnpSolution& selected = use_algebraic ? *algebraic : *iterative;
  result.solver_chosen = use_algebraic ? SolverKind::kAlgebraic : SolverKind::kIterative;

  const std::vector<double> selected_err = reprojection_errors(selected.pose, corrs, cam);
  result.selected_full_rmse = rms(selected_err);

  // Biweight scale is twice the inlier threshold.
  const RobustLoss loss = opts.robust_refinement
                              ? RobustLoss::tukey(2.0 * opts.ransac.inlier_threshold)
                              : RobustLoss::squared();
  const PnpSolution refined = refine_all_pairs(selected.pose, corrs, cam, loss);

  result.pose = refined.pose;
  result.euler = rotation_to_euler(refined.pose.rotation);
  result.rmse = refined.rmse;
  result.per_pair_error = refined.per_point_error;
  result.inlier_mask = selected.inlier_mask;
  result.correspondences_used = corrs.size();
  result.correspondences = std::move(corrs);
  return result;
}

CalibrationResult calibrate(std::span<const RadarDetection> detections,
                            std::span<const ImageAnnotation> annotations, const CameraModel& cam,
                            const PipelineOptions& opts) {
  cam.validate();
  return calibrate_correspondences(build_correspondences(detections, annotations, opts), cam,
                                   opts);
}

}  // namespace radcam
