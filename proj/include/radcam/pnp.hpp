#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "radcam/geometry.hpp"
#include "radcam/optim.hpp"

namespace radcam {

/// One aggregated radar point paired with the clicked reflector pixel.
struct Correspondence {
  Point3 radar = Point3::Zero();  // meters, radar frame
  Point2 pixel = Point2::Zero();  // pixels
  double source_timestamp = 0.0;  // absolute image timestamp, seconds
  std::size_t annotation_index = 0;
};

struct RansacOptions {
  int max_iters = 500;
  int sample_size = 4;
  double inlier_threshold = 8.0;  // pixels
  double confidence = 0.999;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PnpSolution {
  RigidTransform pose;
  double rmse = 0.0;  // over inliers
  std::vector<double> per_point_error;
  std::vector<bool> inlier_mask;

  std::size_t inlier_count() const;
};

enum class SolverKind { kIterative, kAlgebraic };

std::string_view to_string(SolverKind kind);

/// Loss applied per correspondence to its pixel distance e.
/// Huber keeps e^2 below `scale` and grows as 2*scale*e - scale^2 beyond it.
/// Tukey's biweight, normalized to e^2 near zero, flattens out at scale^2 / 3 for
/// e >= scale, so pairs that far out exert no pull at all.
struct RobustLoss {
  enum class Kind { kSquared, kHuber, kTukey };
  Kind kind = Kind::kSquared;
  double scale = 1.0;

  static RobustLoss squared() { return {}; }
  static RobustLoss huber(double scale) { return {Kind::kHuber, scale}; }
  static RobustLoss tukey(double scale) { return {Kind::kTukey, scale}; }
};

/// Residual value used for both components of a pair whose point lands behind the camera.
inline constexpr double kBehindCameraResidual = 1e6;

/// Reprojection least-squares problem over 6 parameters: x = [w, t] with
/// R = exp(w) * base_rotation. Keeping the rotation local to a base avoids the
/// axis-angle singularity at pi.
class ReprojectionProblem {
 public:
  ReprojectionProblem(std::span<const Correspondence> corrs, const CameraModel& cam,
                      const Eigen::Matrix3d& base_rotation, RobustLoss loss = {});

  Eigen::VectorXd parameters_for(const RigidTransform& pose) const;
  RigidTransform pose_at(const Eigen::VectorXd& x) const;

  Eigen::VectorXd residuals(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const;

 private:
  std::span<const Correspondence> corrs_;
  CameraModel cam_;
  Eigen::Matrix3d base_;
  RobustLoss loss_;
};

/// 2N residuals, projected minus observed; behind-camera pairs read kBehindCameraResidual.
/// Throws kEmptyInput for an empty list.
Eigen::VectorXd reprojection_residuals(const RigidTransform& pose,
                                       std::span<const Correspondence> corrs,
                                       const CameraModel& cam);

std::vector<double> reprojection_errors(const RigidTransform& pose,
                                        std::span<const Correspondence> corrs,
                                        const CameraModel& cam);

double rms(std::span<const double> values);

/// Sum over pairs of the robust loss of the pixel distance.
double robust_cost(const RigidTransform& pose, std::span<const Correspondence> corrs,
                   const CameraModel& cam, RobustLoss loss);

/// Local LM refinement from `init`; needs at least 4 pairs.
PnpSolution solve_pnp_iterative(std::span<const Correspondence> corrs, const CameraModel& cam,
                                const RigidTransform& init, const LmOptions& lm = {});

/// Initialization-free estimate: linear transform on undistorted normalized
/// coordinates (a plane homography when the radar points are coplanar), projected
/// onto the nearest rotation, then polished by one LM pass. Needs at least 6 pairs.
PnpSolution solve_pnp_algebraic(std::span<const Correspondence> corrs, const CameraModel& cam);

/// Seeded RANSAC around either solver. Sampling is keyed to a canonical ordering of
/// the correspondences, so permuting the input permutes the mask and nothing else.
PnpSolution ransac_pnp(std::span<const Correspondence> corrs, const CameraModel& cam,
                       SolverKind kind, const RansacOptions& opts, const RigidTransform& init);

/// LM over every correspondence, outliers included, starting from pose0.
PnpSolution refine_all_pairs(const RigidTransform& pose0, std::span<const Correspondence> corrs,
                             const CameraModel& cam, RobustLoss loss = {});

}  // namespace radcam
