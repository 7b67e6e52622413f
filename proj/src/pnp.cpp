#include "radcam/pnp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <tuple>

#include <Eigen/Dense>

#include "radcam/error.hpp"

namespace radcam {

namespace {

constexpr int kMinIterativePoints = 4;
constexpr int kMinAlgebraicPoints = 6;
// Smallest-to-largest spread ratio of the radar points below which the plane path is used.
constexpr double kPlanarRatio = 0.05;
constexpr double kRankTol = 1e-9;
constexpr int kLocalOptimizationRounds = 5;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Counter-based sampler: iteration index -> sample, independent of evaluation order.
std::vector<std::size_t> draw_sample(std::uint64_t seed, int iteration, std::size_t n,
                                     std::size_t k) {
  std::uint64_t state = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(iteration)));
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    state = splitmix64(state);
    const std::size_t j = i + static_cast<std::size_t>(state % (n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

std::vector<std::size_t> canonical_order(std::span<const Correspondence> corrs) {
  std::vector<std::size_t> order(corrs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto key = [&](std::size_t i) {
    const auto& c = corrs[i];
    return std::make_tuple(c.source_timestamp, c.pixel.x(), c.pixel.y(), c.radar.x(),
                           c.radar.y(), c.radar.z());
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
  return order;
}

std::vector<Correspondence> gather(std::span<const Correspondence> corrs,
                                   std::span<const std::size_t> idx) {
  std::vector<Correspondence> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(corrs[i]);
  return out;
}

void require_points(std::size_t have, int need, const char* who) {
  if (have < static_cast<std::size_t>(need)) {
    throw Error(ErrorCode::kInsufficientPoints,
                std::string(who) + " needs at least " + std::to_string(need) +
                    " correspondences, got " + std::to_string(have));
  }
}

PnpSolution make_solution(const RigidTransform& pose, std::span<const Correspondence> corrs,
                          const CameraModel& cam, std::vector<bool> mask) {
  PnpSolution sol;
  sol.pose = pose;
  sol.per_point_error = reprojection_errors(pose, corrs, cam);
  sol.inlier_mask = std::move(mask);
  std::vector<double> inlier_err;
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    if (sol.inlier_mask[i]) inlier_err.push_back(sol.per_point_error[i]);
  }
  sol.rmse = rms(inlier_err);
  return sol;
}

std::vector<bool> threshold_mask(std::span<const double> errors, double threshold) {
  std::vector<bool> mask(errors.size());
  for (std::size_t i = 0; i < errors.size(); ++i) mask[i] = errors[i] <= threshold;
  return mask;
}

// Hartley normalization: centroid to origin, mean distance sqrt(dim).
template <int Dim>
Eigen::Matrix<double, Dim + 1, Dim + 1> similarity_normalizer(
    const std::vector<Eigen::Matrix<double, Dim, 1>>& pts) {
  Eigen::Matrix<double, Dim, 1> c = Eigen::Matrix<double, Dim, 1>::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += (p - c).norm();
  mean_dist /= static_cast<double>(pts.size());
  const double s = mean_dist > 1e-12 ? std::sqrt(static_cast<double>(Dim)) / mean_dist : 1.0;
  Eigen::Matrix<double, Dim + 1, Dim + 1> t = Eigen::Matrix<double, Dim + 1, Dim + 1>::Identity();
  t.template topLeftCorner<Dim, Dim>() *= s;
  t.template topRightCorner<Dim, 1>() = -s * c;
  return t;
}

Eigen::VectorXd null_vector(const Eigen::MatrixXd& a, int expected_rank) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  if (sv.size() < expected_rank || sv(0) <= 0.0 || sv(expected_rank - 1) / sv(0) < kRankTol) {
    throw Error(ErrorCode::kDegenerateConfiguration,
                "linear system is rank deficient for this point configuration");
  }
  return svd.matrixV().col(a.cols() - 1);
}

RigidTransform dlt_general(const std::vector<Eigen::Vector3d>& world,
                           const std::vector<Eigen::Vector2d>& image) {
  const auto t3 = similarity_normalizer<3>(world);
  const auto t2 = similarity_normalizer<2>(image);
  const auto n = static_cast<Eigen::Index>(world.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * n, 12);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector4d xw = t3 * world[i].homogeneous();
    const Eigen::Vector3d xi = t2 * image[i].homogeneous();
    a.block<1, 4>(2 * i, 0) = xw.transpose();
    a.block<1, 4>(2 * i, 8) = -xi.x() * xw.transpose();
    a.block<1, 4>(2 * i + 1, 4) = xw.transpose();
    a.block<1, 4>(2 * i + 1, 8) = -xi.y() * xw.transpose();
  }
  const Eigen::VectorXd h = null_vector(a, 11);
  Eigen::Matrix<double, 3, 4> p_norm;
  p_norm << h.segment<4>(0).transpose(), h.segment<4>(4).transpose(), h.segment<4>(8).transpose();
  Eigen::Matrix<double, 3, 4> p = t2.inverse() * p_norm * t3;

  double depth_sum = 0.0;
  for (const auto& x : world) depth_sum += p.row(2).dot(x.homogeneous());
  if (depth_sum < 0.0) p = -p;

  const Eigen::Matrix3d m = p.leftCols<3>();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m);
  const double scale = svd.singularValues().mean();
  if (!(scale > 0.0)) {
    throw Error(ErrorCode::kDegenerateConfiguration, "projection matrix has zero scale");
  }
  RigidTransform pose;
  pose.rotation = nearest_rotation(m / scale);
  pose.translation = p.col(3) / scale;
  return pose;
}

RigidTransform dlt_planar(const std::vector<Eigen::Vector3d>& world,
                          const std::vector<Eigen::Vector2d>& image, const Eigen::Vector3d& centroid,
                          const Eigen::Matrix3d& basis) {
  // basis columns: two in-plane directions and their normal (right-handed).
  std::vector<Eigen::Vector2d> plane(world.size());
  for (std::size_t i = 0; i < world.size(); ++i) {
    const Eigen::Vector3d d = world[i] - centroid;
    plane[i] = {d.dot(basis.col(0)), d.dot(basis.col(1))};
  }
  const auto tp = similarity_normalizer<2>(plane);
  const auto ti = similarity_normalizer<2>(image);
  const auto n = static_cast<Eigen::Index>(world.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * n, 9);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector3d xp = tp * plane[i].homogeneous();
    const Eigen::Vector3d xi = ti * image[i].homogeneous();
    a.block<1, 3>(2 * i, 0) = xp.transpose();
    a.block<1, 3>(2 * i, 6) = -xi.x() * xp.transpose();
    a.block<1, 3>(2 * i + 1, 3) = xp.transpose();
    a.block<1, 3>(2 * i + 1, 6) = -xi.y() * xp.transpose();
  }
  const Eigen::VectorXd h = null_vector(a, 8);
  Eigen::Matrix3d hn;
  hn << h.segment<3>(0).transpose(), h.segment<3>(3).transpose(), h.segment<3>(6).transpose();
  Eigen::Matrix3d hom = ti.inverse() * hn * tp;

  // hom ~ [R b1, R b2, R c + t]
  const double scale = 0.5 * (hom.col(0).norm() + hom.col(1).norm());
  if (!(scale > 1e-12)) {
    throw Error(ErrorCode::kDegenerateConfiguration, "plane homography has zero scale");
  }
  if (hom(2, 2) < 0.0) hom = -hom;
  const Eigen::Vector3d r1 = hom.col(0) / scale;
  const Eigen::Vector3d r2 = hom.col(1) / scale;
  Eigen::Matrix3d rb;
  rb << r1, r2, r1.cross(r2);

  RigidTransform pose;
  pose.rotation = nearest_rotation(rb) * basis.transpose();
  pose.translation = hom.col(2) / scale - pose.rotation * centroid;
  return pose;
}

// A robust loss rho(e) is fed to LM as the residual pair scaled by s(e) = sqrt(rho(e)) / e.
struct LossScale {
  double s = 1.0;
  double ds_de = 0.0;
};

LossScale loss_scale(const RobustLoss& loss, double e) {
  const double c = loss.scale;
  switch (loss.kind) {
    case RobustLoss::Kind::kSquared:
      return {};
    case RobustLoss::Kind::kHuber: {
      if (e <= c) return {};
      const double g = std::sqrt(2.0 * c * e - c * c);
      return {g / e, (c / g * e - g) / (e * e)};
    }
    case RobustLoss::Kind::kTukey: {
      if (e >= c) return {c / (std::sqrt(3.0) * e), -c / (std::sqrt(3.0) * e * e)};
      // rho = c^2/3 (1 - (1 - u)^3) with u = e^2/c^2, so rho / e^2 = 1 - u + u^2/3.
      const double u = e * e / (c * c);
      const double s = std::sqrt(1.0 - u + u * u / 3.0);
      return {s, (-1.0 + 2.0 * u / 3.0) * (e / (c * c)) / s};
    }
  }
  return {};
}

}  // namespace

void RansacOptions::validate() const {
  if (sample_size < kMinIterativePoints) {
    throw Error(ErrorCode::kValidation, "RANSAC sample size must be at least 4");
  }
  if (!(inlier_threshold > 0.0)) {
    throw Error(ErrorCode::kValidation, "RANSAC inlier threshold must be positive");
  }
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw Error(ErrorCode::kValidation, "RANSAC confidence must lie in (0, 1)");
  }
  if (max_iters < 1) throw Error(ErrorCode::kValidation, "RANSAC needs at least one iteration");
}

std::size_t PnpSolution::inlier_count() const {
  return static_cast<std::size_t>(std::count(inlier_mask.begin(), inlier_mask.end(), true));
}

std::string_view to_string(SolverKind kind) {
  return kind == SolverKind::kIterative ? "iterative" : "algebraic";
}

ReprojectionProblem::ReprojectionProblem(std::span<const Correspondence> corrs,
                                         const CameraModel& cam,
                                         const Eigen::Matrix3d& base_rotation, RobustLoss loss)
    : corrs_(corrs), cam_(cam), base_(base_rotation), loss_(loss) {}

Eigen::VectorXd ReprojectionProblem::parameters_for(const RigidTransform& pose) const {
  Eigen::VectorXd x(6);
  x.head<3>() = rotation_to_axis_angle(pose.rotation * base_.transpose());
  x.tail<3>() = pose.translation;
  return x;
}

RigidTransform ReprojectionProblem::pose_at(const Eigen::VectorXd& x) const {
  RigidTransform pose;
  pose.rotation = axis_angle_to_rotation(x.head<3>()) * base_;
  pose.translation = x.tail<3>();
  return pose;
}

Eigen::VectorXd ReprojectionProblem::residuals(const Eigen::VectorXd& x) const {
  const RigidTransform pose = pose_at(x);
  Eigen::VectorXd r = reprojection_residuals(pose, corrs_, cam_);
  if (loss_.kind == RobustLoss::Kind::kSquared) return r;
  for (Eigen::Index i = 0; i < r.size(); i += 2) {
    if (r(i) == kBehindCameraResidual && r(i + 1) == kBehindCameraResidual) continue;
    r.segment<2>(i) *= loss_scale(loss_, r.segment<2>(i).norm()).s;
  }
  return r;
}

Eigen::MatrixXd ReprojectionProblem::jacobian(const Eigen::VectorXd& x) const {
  const RigidTransform pose = pose_at(x);
  const Eigen::Matrix3d jl = so3_left_jacobian(x.head<3>());
  const auto n = static_cast<Eigen::Index>(corrs_.size());
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(2 * n, 6);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector3d rp = pose.rotation * corrs_[i].radar;
    const Eigen::Vector3d pc = rp + pose.translation;
    if (!(pc.z() > 1e-9)) continue;  // sentinel residual is constant

    const Eigen::Matrix<double, 2, 3> dproj = projection_jacobian(cam_, pc);
    Eigen::Matrix<double, 2, 6> block;
    block.leftCols<3>() = -dproj * skew_symmetric(rp) * jl;
    block.rightCols<3>() = dproj;

    if (loss_.kind != RobustLoss::Kind::kSquared) {
      const Eigen::Vector2d r = project_camera_point(cam_, pc) - corrs_[i].pixel;
      const double e = r.norm();
      const LossScale ls = loss_scale(loss_, e);
      if (e > 0.0) {
        block = ls.s * block + (ls.ds_de / e) * r * (r.transpose() * block);
      } else {
        block *= ls.s;
      }
    }
    jac.block<2, 6>(2 * i, 0) = block;
  }
  return jac;
}

Eigen::VectorXd reprojection_residuals(const RigidTransform& pose,
                                       std::span<const Correspondence> corrs,
                                       const CameraModel& cam) {
  if (corrs.empty()) throw Error(ErrorCode::kEmptyInput, "no correspondences");
  Eigen::VectorXd r(2 * static_cast<Eigen::Index>(corrs.size()));
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    const Point3 pc = transform_point(pose, corrs[i].radar);
    const auto row = static_cast<Eigen::Index>(2 * i);
    if (pc.z() > 1e-9) {
      r.segment<2>(row) = project_camera_point(cam, pc) - corrs[i].pixel;
    } else {
      r.segment<2>(row).setConstant(kBehindCameraResidual);
    }
  }
  return r;
}

std::vector<double> reprojection_errors(const RigidTransform& pose,
                                        std::span<const Correspondence> corrs,
                                        const CameraModel& cam) {
  const Eigen::VectorXd r = reprojection_residuals(pose, corrs, cam);
  std::vector<double> err(corrs.size());
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    err[i] = r.segment<2>(static_cast<Eigen::Index>(2 * i)).norm();
  }
  return err;
}

double rms(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double ss = 0.0;
  for (double v : values) ss += v * v;
  return std::sqrt(ss / static_cast<double>(values.size()));
}

double robust_cost(const RigidTransform& pose, std::span<const Correspondence> corrs,
                   const CameraModel& cam, RobustLoss loss) {
  double cost = 0.0;
  for (double e : reprojection_errors(pose, corrs, cam)) {
    const double s = loss_scale(loss, e).s;
    cost += s * s * e * e;
  }
  return cost;
}

PnpSolution solve_pnp_iterative(std::span<const Correspondence> corrs, const CameraModel& cam,
                                const RigidTransform& init, const LmOptions& lm) {
  require_points(corrs.size(), kMinIterativePoints, "iterative PnP");
  const ReprojectionProblem problem(corrs, cam, init.rotation);
  const LmResult res = levenberg_marquardt(
      [&](const Eigen::VectorXd& x) { return problem.residuals(x); },
      problem.parameters_for(init), lm,
      [&](const Eigen::VectorXd& x) { return problem.jacobian(x); });
  return make_solution(problem.pose_at(res.solution), corrs, cam,
                       std::vector<bool>(corrs.size(), true));
}

PnpSolution solve_pnp_algebraic(std::span<const Correspondence> corrs, const CameraModel& cam) {
  require_points(corrs.size(), kMinAlgebraicPoints, "algebraic PnP");

  std::vector<Eigen::Vector3d> world;
  std::vector<Eigen::Vector2d> image;
  world.reserve(corrs.size());
  image.reserve(corrs.size());
  for (const auto& c : corrs) {
    world.push_back(c.radar);
    image.push_back(undistort_point(cam.pixel_to_normalized(c.pixel), cam.dist));
  }

  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : world) centroid += p;
  centroid /= static_cast<double>(world.size());
  Eigen::Matrix3Xd centered(3, static_cast<Eigen::Index>(world.size()));
  for (std::size_t i = 0; i < world.size(); ++i) {
    centered.col(static_cast<Eigen::Index>(i)) = world[i] - centroid;
  }
  Eigen::JacobiSVD<Eigen::Matrix3Xd> spread(centered, Eigen::ComputeFullU);
  const Eigen::Vector3d sv = spread.singularValues();
  if (!(sv(0) > 1e-12)) {
    throw Error(ErrorCode::kDegenerateConfiguration, "radar points coincide");
  }

  RigidTransform init;
  if (sv(2) / sv(0) < kPlanarRatio) {
    Eigen::Matrix3d basis = spread.matrixU();
    basis.col(2) = basis.col(0).cross(basis.col(1));
    init = dlt_planar(world, image, centroid, basis);
  } else {
    init = dlt_general(world, image);
  }
  return solve_pnp_iterative(corrs, cam, init);
}

PnpSolution ransac_pnp(std::span<const Correspondence> corrs, const CameraModel& cam,
                       SolverKind kind, const RansacOptions& opts, const RigidTransform& init) {
  opts.validate();
  const std::size_t n = corrs.size();
  const auto sample_size = static_cast<std::size_t>(
      kind == SolverKind::kAlgebraic ? std::max(opts.sample_size, kMinAlgebraicPoints)
                                     : opts.sample_size);
  require_points(n, static_cast<int>(sample_size), "RANSAC");

  const std::vector<std::size_t> order = canonical_order(corrs);
  auto solve = [&](std::span<const Correspondence> subset, const RigidTransform& start) {
    return kind == SolverKind::kAlgebraic ? solve_pnp_algebraic(subset, cam)
                                          : solve_pnp_iterative(subset, cam, start);
  };
  auto better = [](std::size_t count, double rmse_value, std::size_t best_count,
                   double best_rmse) {
    return count > best_count || (count == best_count && rmse_value < best_rmse);
  };

  bool have_best = false;
  PnpSolution best;
  std::size_t best_count = 0;
  double needed = opts.max_iters;
  for (int it = 0; it < opts.max_iters && it < needed; ++it) {
    std::vector<std::size_t> sample = draw_sample(opts.seed, it, n, sample_size);
    for (auto& s : sample) s = order[s];
    const std::vector<Correspondence> subset = gather(corrs, sample);

    PnpSolution hyp;
    try {
      hyp = solve(subset, init);
    } catch (const Error&) {
      continue;
    }
    const std::vector<double> err = reprojection_errors(hyp.pose, corrs, cam);
    PnpSolution scored = make_solution(hyp.pose, corrs, cam,
                                       threshold_mask(err, opts.inlier_threshold));
    const std::size_t count = scored.inlier_count();
    if (!have_best || better(count, scored.rmse, best_count, best.rmse)) {
      best = std::move(scored);
      best_count = count;
      have_best = true;
      const double w = static_cast<double>(count) / static_cast<double>(n);
      const double p_good = std::pow(w, static_cast<double>(sample_size));
      if (p_good >= 1.0) {
        needed = 0.0;
      } else if (p_good > 0.0) {
        needed = std::ceil(std::log(1.0 - opts.confidence) / std::log(1.0 - p_good));
      }
    }
  }

  const std::size_t required = std::min(sample_size + 2, n);
  if (!have_best || best_count < required) {
    throw Error(ErrorCode::kRansacFailure,
                "no RANSAC model reached " + std::to_string(required) + " inliers (best " +
                    std::to_string(best_count) + ")");
  }

  // Re-solve on the consensus set until the mask settles.
  for (int round = 0; round < kLocalOptimizationRounds; ++round) {
    std::vector<std::size_t> inliers;
    for (std::size_t i : order) {
      if (best.inlier_mask[i]) inliers.push_back(i);
    }
    const std::vector<Correspondence> subset = gather(corrs, inliers);
    PnpSolution refit;
    try {
      refit = solve(subset, best.pose);
    } catch (const Error&) {
      refit = solve_pnp_iterative(subset, cam, best.pose);
    }
    const std::vector<double> err = reprojection_errors(refit.pose, corrs, cam);
    PnpSolution scored = make_solution(refit.pose, corrs, cam,
                                       threshold_mask(err, opts.inlier_threshold));
    const std::size_t count = scored.inlier_count();
    if (count < best_count) break;
    const bool same_mask = scored.inlier_mask == best.inlier_mask;
    best = std::move(scored);
    best_count = count;
    if (same_mask) break;
  }
  return best;
}

PnpSolution refine_all_pairs(const RigidTransform& pose0, std::span<const Correspondence> corrs,
                             const CameraModel& cam, RobustLoss loss) {
  require_points(corrs.size(), 1, "refinement");
  const ReprojectionProblem problem(corrs, cam, pose0.rotation, loss);
  const LmResult res = levenberg_marquardt(
      [&](const Eigen::VectorXd& x) { return problem.residuals(x); },
      problem.parameters_for(pose0), LmOptions{},
      [&](const Eigen::VectorXd& x) { return problem.jacobian(x); });
  return make_solution(problem.pose_at(res.solution), corrs, cam,
                       std::vector<bool>(corrs.size(), true));
}

}  // namespace radcam
