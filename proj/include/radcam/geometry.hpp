#pragma once

#include <array>

#include <Eigen/Core>

namespace radcam {

using Point2 = Eigen::Vector2d;
using Point3 = Eigen::Vector3d;

/// Euler angles for the xyz rotation sequence, R = Rz(phi) * Ry(theta) * Rx(psi).
struct EulerXYZ {
  double psi = 0.0;    // about x
  double theta = 0.0;  // about y
  double phi = 0.0;    // about z
};

/// Rotation vector: direction is the axis, norm is the angle in radians.
using AxisAngle = Eigen::Vector3d;

/// Extrinsic matrix Q = [R|T]; maps radar-frame points into the camera frame.
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static RigidTransform identity() { return {}; }

  RigidTransform inverse() const;

  /// (this * other)(p) == this(other(p))
  RigidTransform compose(const RigidTransform& other) const;
};

/// Pinhole intrinsics plus 5-coefficient Brown-Conrady distortion [k1, k2, p1, p2, k3].
struct CameraModel {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  double skew = 0.0;
  std::array<double, 5> dist{};

  /// Throws kValidation when focal lengths or principal point are out of range.
  void validate() const;

  Eigen::Matrix3d intrinsic_matrix() const;

  /// Pixel -> distorted normalized coordinates (inverse of K only).
  Point2 pixel_to_normalized(const Point2& px) const;
};

Eigen::Matrix3d rot_x(double angle);
Eigen::Matrix3d rot_y(double angle);
Eigen::Matrix3d rot_z(double angle);

Eigen::Matrix3d euler_to_rotation(const EulerXYZ& e);

/// Canonical range psi, phi in (-pi, pi], theta in [-pi/2, pi/2].
/// At gimbal lock (|cos theta| < 1e-9) psi is pinned to 0 and phi absorbs the free angle.
EulerXYZ rotation_to_euler(const Eigen::Matrix3d& rotation);

Eigen::Matrix3d axis_angle_to_rotation(const AxisAngle& a);

/// Returned magnitude lies in [0, pi]. At exactly pi the axis sign is chosen so that
/// its largest-magnitude component is positive.
AxisAngle rotation_to_axis_angle(const Eigen::Matrix3d& rotation);

Eigen::Matrix3d skew_symmetric(const Eigen::Vector3d& v);

/// Left Jacobian of SO(3): exp(a + d) ~= exp(J_l(a) d) exp(a) for small d.
Eigen::Matrix3d so3_left_jacobian(const AxisAngle& a);

/// Nearest rotation in the Frobenius sense (polar factor with det fixed to +1).
Eigen::Matrix3d nearest_rotation(const Eigen::Matrix3d& m);

/// Max-entry deviation of R^T R from I and of det(R) from 1.
bool is_rotation(const Eigen::Matrix3d& m, double tol = 1e-9);

/// Angle of R_a^T R_b in radians.
double rotation_angle_between(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b);

Point3 transform_point(const RigidTransform& q, const Point3& p);

Point2 apply_distortion(const Point2& normalized, const std::array<double, 5>& dist);

/// d(distorted)/d(normalized), 2x2.
Eigen::Matrix2d distortion_jacobian(const Point2& normalized,
                                    const std::array<double, 5>& dist);

/// Iterative inverse of apply_distortion; at most 20 iterations, 1e-10 tolerance.
/// Throws kInversionFailure if it does not converge.
Point2 undistort_point(const Point2& distorted, const std::array<double, 5>& dist);

/// s * [u v 1]^T = K [R|T] p_r. Throws kBehindCamera when Z_c <= 1e-9.
Point2 project_point(const CameraModel& cam, const RigidTransform& q, const Point3& p_r);

/// Projection of a camera-frame point; same depth check as project_point.
Point2 project_camera_point(const CameraModel& cam, const Point3& p_c);

/// Pixel Jacobian with respect to the camera-frame point, 2x3. Requires Z_c > 0.
Eigen::Matrix<double, 2, 3> projection_jacobian(const CameraModel& cam, const Point3& p_c);

/// Radar (x forward, y left, z up) to camera (x right, y down, z forward) axis mapping:
/// x_c = -y_r, y_c = -z_r, z_c = x_r.
Eigen::Matrix3d radar_to_camera_axes();

}  // namespace radcam
