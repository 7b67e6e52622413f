#include "radcam/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "radcam/error.hpp"

namespace radcam {

namespace {

constexpr double kGimbalEps = 1e-9;
constexpr double kMinDepth = 1e-9;
constexpr int kUndistortMaxIters = 20;
constexpr double kUndistortTol = 1e-10;

// atan2 maps onto [-pi, pi]; fold -pi onto +pi for the half-open canonical range.
double wrap_canonical(double angle) {
  return angle <= -std::numbers::pi ? angle + 2.0 * std::numbers::pi : angle;
}

}  // namespace

RigidTransform RigidTransform::inverse() const {
  RigidTransform inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

RigidTransform RigidTransform::compose(const RigidTransform& other) const {
  RigidTransform out;
  out.rotation = rotation * other.rotation;
  out.translation = rotation * other.translation + translation;
  return out;
}

void CameraModel::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy)) {
    throw Error(ErrorCode::kValidation, "camera focal lengths must be positive and finite");
  }
  if (!(cx > 0.0) || !(cy > 0.0) || !std::isfinite(cx) || !std::isfinite(cy)) {
    throw Error(ErrorCode::kValidation, "camera principal point must be positive and finite");
  }
  if (!std::isfinite(skew)) {
    throw Error(ErrorCode::kValidation, "camera skew must be finite");
  }
  for (double d : dist) {
    if (!std::isfinite(d)) {
      throw Error(ErrorCode::kValidation, "distortion coefficients must be finite");
    }
  }
}

Eigen::Matrix3d CameraModel::intrinsic_matrix() const {
  Eigen::Matrix3d k;
  k << fx, skew, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

Point2 CameraModel::pixel_to_normalized(const Point2& px) const {
  const double y = (px.y() - cy) / fy;
  const double x = (px.x() - cx - skew * y) / fx;
  return {x, y};
}

Eigen::Matrix3d rot_x(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Eigen::Matrix3d r;
  r << 1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c;
  return r;
}

Eigen::Matrix3d rot_y(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Eigen::Matrix3d r;
  r << c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c;
  return r;
}

Eigen::Matrix3d rot_z(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Eigen::Matrix3d r;
  r << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
  return r;
}

Eigen::Matrix3d euler_to_rotation(const EulerXYZ& e) {
  return rot_z(e.phi) * rot_y(e.theta) * rot_x(e.psi);
}

EulerXYZ rotation_to_euler(const Eigen::Matrix3d& r) {
  // R = [[c_phi c_th, ., .], [s_phi c_th, ., .], [-s_th, c_th s_psi, c_th c_psi]]
  const double cos_theta = std::hypot(r(0, 0), r(1, 0));
  EulerXYZ e;
  e.theta = std::atan2(-r(2, 0), cos_theta);
  if (cos_theta < kGimbalEps) {
    // With psi = 0 both lock branches reduce to R01 = -sin(phi), R11 = cos(phi).
    e.psi = 0.0;
    e.phi = wrap_canonical(std::atan2(-r(0, 1), r(1, 1)));
  } else {
    e.psi = wrap_canonical(std::atan2(r(2, 1), r(2, 2)));
    e.phi = wrap_canonical(std::atan2(r(1, 0), r(0, 0)));
  }
  return e;
}

Eigen::Matrix3d skew_symmetric(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

Eigen::Matrix3d axis_angle_to_rotation(const AxisAngle& a) {
  const double angle = a.norm();
  const Eigen::Matrix3d w = skew_symmetric(a);
  if (angle < 1e-8) {
    return Eigen::Matrix3d::Identity() + w + 0.5 * w * w;
  }
  const double s = std::sin(angle) / angle;
  const double c = (1.0 - std::cos(angle)) / (angle * angle);
  return Eigen::Matrix3d::Identity() + s * w + c * w * w;
}

AxisAngle rotation_to_axis_angle(const Eigen::Matrix3d& r) {
  // vee(R - R^T) / 2 = sin(angle) * axis
  const Eigen::Vector3d v(0.5 * (r(2, 1) - r(1, 2)), 0.5 * (r(0, 2) - r(2, 0)),
                          0.5 * (r(1, 0) - r(0, 1)));
  const double sin_angle = v.norm();
  const double cos_angle = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
  const double angle = std::atan2(sin_angle, cos_angle);

  if (cos_angle > 0.0 || sin_angle > 1e-4) {
    if (sin_angle < 1e-15) return v;
    return v * (angle / sin_angle);
  }

  // Near pi: symmetric part is cos(a) I + (1 - cos(a)) n n^T.
  const Eigen::Matrix3d sym = 0.5 * (r + r.transpose());
  const Eigen::Matrix3d nnt =
      (sym - cos_angle * Eigen::Matrix3d::Identity()) / (1.0 - cos_angle);
  Eigen::Index k = 0;
  nnt.diagonal().maxCoeff(&k);
  Eigen::Vector3d axis = nnt.col(k) / std::sqrt(std::max(nnt(k, k), 1e-300));
  axis.normalize();
  if (sin_angle > 1e-12) {
    if (axis.dot(v) < 0.0) axis = -axis;
  } else {
    Eigen::Index big = 0;
    axis.cwiseAbs().maxCoeff(&big);
    if (axis(big) < 0.0) axis = -axis;
  }
  return axis * angle;
}

Eigen::Matrix3d so3_left_jacobian(const AxisAngle& a) {
  const double angle = a.norm();
  const Eigen::Matrix3d w = skew_symmetric(a);
  if (angle < 1e-6) {
    return Eigen::Matrix3d::Identity() + 0.5 * w + w * w / 6.0;
  }
  const double a2 = angle * angle;
  return Eigen::Matrix3d::Identity() + (1.0 - std::cos(angle)) / a2 * w +
         (angle - std::sin(angle)) / (a2 * angle) * w * w;
}

Eigen::Matrix3d nearest_rotation(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  const Eigen::Matrix3d v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) = -u.col(2);
  return u * v.transpose();
}

bool is_rotation(const Eigen::Matrix3d& m, double tol) {
  if (!m.allFinite()) return false;
  const double ortho = (m.transpose() * m - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(m.determinant() - 1.0) <= tol;
}

double rotation_angle_between(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  return rotation_to_axis_angle(a.transpose() * b).norm();
}

Point3 transform_point(const RigidTransform& q, const Point3& p) {
  return q.rotation * p + q.translation;
}

Point2 apply_distortion(const Point2& n, const std::array<double, 5>& dist) {
  const auto [k1, k2, p1, p2, k3] = dist;
  const double x = n.x();
  const double y = n.y();
  const double r2 = x * x + y * y;
  const double radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3));
  return {x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x),
          y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y};
}

Eigen::Matrix2d distortion_jacobian(const Point2& n, const std::array<double, 5>& dist) {
  const auto [k1, k2, p1, p2, k3] = dist;
  const double x = n.x();
  const double y = n.y();
  const double r2 = x * x + y * y;
  const double radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3));
  const double dradial_dr2 = k1 + r2 * (2.0 * k2 + 3.0 * k3 * r2);
  Eigen::Matrix2d j;
  j(0, 0) = radial + x * dradial_dr2 * 2.0 * x + 2.0 * p1 * y + 6.0 * p2 * x;
  j(0, 1) = x * dradial_dr2 * 2.0 * y + 2.0 * p1 * x + 2.0 * p2 * y;
  j(1, 0) = y * dradial_dr2 * 2.0 * x + 2.0 * p1 * x + 2.0 * p2 * y;
  j(1, 1) = radial + y * dradial_dr2 * 2.0 * y + 6.0 * p1 * y + 2.0 * p2 * x;
  return j;
}

Point2 undistort_point(const Point2& distorted, const std::array<double, 5>& dist) {
  // Newton iteration on apply_distortion(x) = distorted, seeded at the distorted point.
  Point2 x = distorted;
  for (int iter = 0; iter < kUndistortMaxIters; ++iter) {
    const Point2 residual = apply_distortion(x, dist) - distorted;
    if (!residual.allFinite()) break;
    if (residual.norm() < kUndistortTol * 1e-2) return x;
    const Eigen::Matrix2d j = distortion_jacobian(x, dist);
    const Point2 step = j.partialPivLu().solve(residual);
    if (!step.allFinite()) break;
    x -= step;
    if (step.norm() < kUndistortTol) return x;
  }
  throw Error(ErrorCode::kInversionFailure,
              "distortion inversion did not converge in " + std::to_string(kUndistortMaxIters) +
                  " iterations");
}

Point2 project_camera_point(const CameraModel& cam, const Point3& p_c) {
  if (!(p_c.z() > kMinDepth)) {
    throw Error(ErrorCode::kBehindCamera, "point is behind the camera");
  }
  const Point2 n(p_c.x() / p_c.z(), p_c.y() / p_c.z());
  const Point2 d = apply_distortion(n, cam.dist);
  return {cam.fx * d.x() + cam.skew * d.y() + cam.cx, cam.fy * d.y() + cam.cy};
}

Point2 project_point(const CameraModel& cam, const RigidTransform& q, const Point3& p_r) {
  return project_camera_point(cam, transform_point(q, p_r));
}

Eigen::Matrix<double, 2, 3> projection_jacobian(const CameraModel& cam, const Point3& p_c) {
  const double inv_z = 1.0 / p_c.z();
  const Point2 n(p_c.x() * inv_z, p_c.y() * inv_z);
  Eigen::Matrix<double, 2, 3> dn;
  dn << inv_z, 0.0, -n.x() * inv_z, 0.0, inv_z, -n.y() * inv_z;
  Eigen::Matrix2d dk;
  dk << cam.fx, cam.skew, 0.0, cam.fy;
  return dk * distortion_jacobian(n, cam.dist) * dn;
}

Eigen::Matrix3d radar_to_camera_axes() {
  Eigen::Matrix3d p;
  p << 0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0;
  return p;
}

}  // namespace radcam
