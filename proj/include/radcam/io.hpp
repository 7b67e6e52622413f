#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "radcam/geometry.hpp"
#include "radcam/metrics.hpp"
#include "radcam/pipeline.hpp"

namespace radcam {

inline constexpr std::string_view kVersion = "0.1.0";

/// Persisted extrinsics plus the summary of the run that produced them.
struct CalibrationFile {
  RigidTransform pose;
  EulerXYZ euler;
  double rmse = 0.0;
  double aed = 0.0;
  double cdsd = 0.0;
  std::size_t inlier_count = 0;
  std::string solver_chosen;
  std::string version{kVersion};
  std::uint64_t seed = 0;
};

/// Shortest-exact text for a double: 17 significant digits, always with a decimal
/// point or exponent so it reads back as floating point.
std::string format_double(double value);

// CSV readers validate the exact header and report malformed rows by line number
// (kParse), header problems as kSchema, and invariant violations as kValidation.

/// Header: timestamp_s,x_m,y_m,z_m,velocity_mps[,range_m]. Range is derived when absent.
std::vector<RadarDetection> read_radar_csv(const std::filesystem::path& path);
void write_radar_csv(const std::filesystem::path& path, std::span<const RadarDetection> rows);

/// Header: local_ts_s,u_px,v_px.
std::vector<ImageAnnotation> read_annotations_csv(const std::filesystem::path& path);
void write_annotations_csv(const std::filesystem::path& path,
                           std::span<const ImageAnnotation> rows);

/// Header: timestamp_s,min_u,min_v,max_u,max_v.
std::vector<BBox> read_bboxes_csv(const std::filesystem::path& path);
void write_bboxes_csv(const std::filesystem::path& path, std::span<const BBox> rows);

/// Header: timestamp_s,u_px,v_px.
std::vector<TimedPoint> read_projected_csv(const std::filesystem::path& path);
void write_projected_csv(const std::filesystem::path& path, std::span<const TimedPoint> rows);

/// {"fx", "fy", "cx", "cy", "skew" (optional, 0), "dist" (optional, 5 values)}.
CameraModel read_intrinsics_json(const std::filesystem::path& path);
void write_intrinsics_json(const std::filesystem::path& path, const CameraModel& cam);

/// Rotation must pass the orthonormality check on load.
CalibrationFile read_calibration_json(const std::filesystem::path& path);
void write_calibration_json(const std::filesystem::path& path, const CalibrationFile& file);

double read_start_timestamp(const std::filesystem::path& path);
void write_start_timestamp(const std::filesystem::path& path, double start_timestamp);

}  // namespace radcam
