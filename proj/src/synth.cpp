#include "radcam/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "radcam/error.hpp"

namespace radcam {

namespace {

constexpr int kMaxPlacementAttempts = 100;
constexpr double kPlacementGap = 2.0;   // seconds between placements, no returns
constexpr double kLeadIn = 1.0;          // seconds from recording start to first placement
constexpr double kVelocitySigma = 1e-4;  // m/s, Doppler jitter of the static reflector
constexpr double kOutlierMinPx = 100.0;
constexpr double kOutlierMaxPx = 200.0;

double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t x = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

bool in_image(const Point2& px) {
  return px.x() >= 0.0 && px.x() < kImageWidth && px.y() >= 0.0 && px.y() < kImageHeight;
}

}  // namespace

CameraModel ScenarioParams::default_camera() {
  CameraModel cam;
  cam.fx = 1000.0;
  cam.fy = 1000.0;
  cam.cx = 640.0;
  cam.cy = 360.0;
  cam.dist = {-0.05, 0.01, 0.001, -0.0005, 0.0};
  return cam;
}

void ScenarioParams::validate() const {
  if (!(std::abs(tilt_deg) < 90.0)) throw Error(ErrorCode::kValidation, "tilt must be below 90 deg");
  if (!(ground_extent.x_min < ground_extent.x_max) ||
      !(ground_extent.y_min < ground_extent.y_max)) {
    throw Error(ErrorCode::kValidation, "ground extent bounds must be ordered");
  }
  if (n_placements < 1) throw Error(ErrorCode::kValidation, "need at least one placement");
  if (!(radar_rate_hz > 0.0) || !(dwell_s > 0.0)) {
    throw Error(ErrorCode::kValidation, "radar rate and dwell time must be positive");
  }
  if (!(radar_noise_sigma >= 0.0) || !(pixel_noise_sigma >= 0.0)) {
    throw Error(ErrorCode::kValidation, "noise sigmas must be non-negative");
  }
  if (!(outlier_fraction >= 0.0 && outlier_fraction <= 1.0)) {
    throw Error(ErrorCode::kValidation, "outlier fraction must lie in [0, 1]");
  }
  if (!(sensor_height_m > 0.0)) throw Error(ErrorCode::kValidation, "sensor height must be positive");
  camera.validate();
}

RigidTransform nominal_extrinsics(double tilt_deg, double baseline_m) {
  if (!(std::abs(tilt_deg) < 90.0)) {
    throw Error(ErrorCode::kValidation, "tilt must be below 90 degrees");
  }
  RigidTransform q;
  // Pitching the camera down is a positive rotation about its x (right) axis.
  q.rotation = rot_x(deg2rad(tilt_deg)) * radar_to_camera_axes();
  // Camera origin sits at (0, 0, -baseline) in the radar frame.
  q.translation = -(q.rotation * Point3(0.0, 0.0, -baseline_m));
  return q;
}

Scenario generate_scenario(const ScenarioParams& p) {
  p.validate();
  std::mt19937_64 geom_rng(stream_seed(p.seed, 0));
  std::mt19937_64 noise_rng(stream_seed(p.seed, 1));
  std::mt19937_64 outlier_rng(stream_seed(p.seed, 2));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto uniform = [&](std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * unit(rng);
  };

  Scenario s;
  s.cam = p.camera;
  s.start_timestamp = p.start_timestamp;

  const RigidTransform nominal = nominal_extrinsics(p.tilt_deg, p.baseline_m);
  const double mis = deg2rad(p.misalignment_deg);
  const AxisAngle mount_error(uniform(geom_rng, -mis, mis), uniform(geom_rng, -mis, mis),
                              uniform(geom_rng, -mis, mis));
  s.ground_truth.rotation = axis_angle_to_rotation(mount_error) * nominal.rotation;
  s.ground_truth.translation =
      nominal.translation + Point3(uniform(geom_rng, -p.misalignment_m, p.misalignment_m),
                                   uniform(geom_rng, -p.misalignment_m, p.misalignment_m),
                                   uniform(geom_rng, -p.misalignment_m, p.misalignment_m));

  // Radar frame pitched down by the tilt: p_level = Ry(tilt) * p_radar.
  const Eigen::Matrix3d level_to_radar = rot_y(deg2rad(p.tilt_deg)).transpose();
  const auto& ext = p.ground_extent;

  const auto samples_per_placement =
      static_cast<int>(std::llround(p.dwell_s * p.radar_rate_hz));
  for (int k = 0; k < p.n_placements; ++k) {
    Point3 placement;
    Point2 pixel;
    bool ok = false;
    for (int attempt = 0; attempt < kMaxPlacementAttempts && !ok; ++attempt) {
      const Point3 level(uniform(geom_rng, ext.x_min, ext.x_max),
                         uniform(geom_rng, ext.y_min, ext.y_max), -p.sensor_height_m);
      placement = level_to_radar * level;
      const Point3 pc = transform_point(s.ground_truth, placement);
      if (pc.z() <= 0.1) continue;
      pixel = project_camera_point(s.cam, pc);
      ok = in_image(pixel);
    }
    if (!ok) {
      throw Error(ErrorCode::kInfeasibleScenario,
                  "placement " + std::to_string(k) + " never projected into the image");
    }
    s.true_placements.push_back(placement);

    const double dwell_start = p.start_timestamp + kLeadIn + k * (p.dwell_s + kPlacementGap);
    for (int j = 0; j < samples_per_placement; ++j) {
      const Point3 noisy = placement + p.radar_noise_sigma * Point3(gauss(noise_rng),
                                                                    gauss(noise_rng),
                                                                    gauss(noise_rng));
      const double velocity = kVelocitySigma * gauss(noise_rng);
      s.detections.push_back(
          RadarDetection::at(dwell_start + j / p.radar_rate_hz, noisy, velocity));
    }

    Point2 observed = pixel + p.pixel_noise_sigma * Point2(gauss(noise_rng), gauss(noise_rng));
    observed = observed.cwiseMax(Point2::Zero());
    const double local_ts = dwell_start + 0.5 * p.dwell_s - p.start_timestamp;
    s.annotations.push_back({local_ts, observed});
  }

  const auto n_outliers = static_cast<std::size_t>(
      std::llround(p.outlier_fraction * static_cast<double>(p.n_placements)));
  std::vector<std::size_t> idx(s.annotations.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (std::size_t i = 0; i < n_outliers; ++i) {
    const auto j = i + static_cast<std::size_t>(unit(outlier_rng) * static_cast<double>(idx.size() - i));
    std::swap(idx[i], idx[std::min(j, idx.size() - 1)]);
  }
  idx.resize(n_outliers);
  std::sort(idx.begin(), idx.end());
  const Point2 center(0.5 * kImageWidth, 0.5 * kImageHeight);
  for (std::size_t i : idx) {
    Point2& px = s.annotations[i].pixel;
    bool moved = false;
    for (int attempt = 0; attempt < kMaxPlacementAttempts && !moved; ++attempt) {
      const double angle = uniform(outlier_rng, -std::numbers::pi, std::numbers::pi);
      const double mag = uniform(outlier_rng, kOutlierMinPx, kOutlierMaxPx);
      const Point2 cand = px + mag * Point2(std::cos(angle), std::sin(angle));
      if (in_image(cand)) {
        px = cand;
        moved = true;
      }
    }
    if (!moved) px += kOutlierMinPx * (center - px).normalized();
  }
  s.planted_outlier_indices = std::move(idx);
  return s;
}

Scenario add_clutter(Scenario scenario, std::size_t n_points, const ClutterRegion& region,
                     std::uint64_t seed) {
  if (n_points == 0) return scenario;
  std::mt19937_64 rng(stream_seed(seed, 7));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  double t_min = scenario.start_timestamp;
  double t_max = scenario.start_timestamp + 1.0;
  for (const auto& d : scenario.detections) {
    t_min = std::min(t_min, d.timestamp);
    t_max = std::max(t_max, d.timestamp);
  }

  for (std::size_t i = 0; i < n_points; ++i) {
    Point3 pos(uniform(region.min.x(), region.max.x()), uniform(region.min.y(), region.max.y()),
               uniform(region.min.z(), region.max.z()));
    double velocity = 0.0;
    if (i % 2 == 0) {
      velocity = uniform(0.2, 5.0) * (unit(rng) < 0.5 ? -1.0 : 1.0);
    } else if (pos.norm() < 20.0) {
      const double norm = std::max(pos.norm(), 1e-6);
      pos *= uniform(20.0, 40.0) / norm;
    }
    scenario.detections.push_back(RadarDetection::at(uniform(t_min, t_max), pos, velocity));
  }
  return scenario;
}

}  // namespace radcam
