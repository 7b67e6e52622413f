#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "radcam/error.hpp"
#include "radcam/pnp.hpp"
#include "test_support.hpp"

using namespace radcam;
using test::rotation_error;
using test::translation_error;

namespace {

RigidTransform perturb(const RigidTransform& q, double deg, double m, std::mt19937_64& rng) {
  Eigen::Vector3d axis(test::uniform(rng, -1, 1), test::uniform(rng, -1, 1),
                       test::uniform(rng, -1, 1));
  axis.normalize();
  Eigen::Vector3d dir(test::uniform(rng, -1, 1), test::uniform(rng, -1, 1),
                      test::uniform(rng, -1, 1));
  dir.normalize();
  RigidTransform out = q;
  out.rotation = axis_angle_to_rotation(axis * deg * M_PI / 180.0) * q.rotation;
  out.translation += m * dir;
  return out;
}

std::vector<Correspondence> with_pixel_noise(std::vector<Correspondence> corrs, double sigma,
                                             std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, sigma);
  for (auto& c : corrs) c.pixel += Point2(g(rng), g(rng));
  return corrs;
}

}  // namespace

TEST_SUITE("pnp") {

TEST_CASE("reprojection residual examples") {
  const CameraModel cam = test::test_camera(false);
  const RigidTransform id = RigidTransform::identity();
  std::vector<Correspondence> one{{Point3(0, 0, 5), Point2(643, 356), 0.0, 0}};
  const Eigen::VectorXd r = reprojection_residuals(id, one, cam);
  REQUIRE(r.size() == 2);
  CHECK(r(0) == doctest::Approx(-3.0));
  CHECK(r(1) == doctest::Approx(4.0));
  CHECK(reprojection_errors(id, one, cam)[0] == doctest::Approx(5.0));

  one[0].pixel = Point2(637, 364);
  const Eigen::VectorXd r2 = reprojection_residuals(id, one, cam);
  CHECK(r2(0) == doctest::Approx(3.0));
  CHECK(r2(1) == doctest::Approx(-4.0));

  std::vector<Correspondence> behind{{Point3(0, 0, -5), Point2(640, 360), 0.0, 0}};
  const Eigen::VectorXd rb = reprojection_residuals(id, behind, cam);
  CHECK(rb(0) == kBehindCameraResidual);
  CHECK(rb(1) == kBehindCameraResidual);

  CHECK_THROWS_AS(reprojection_residuals(id, std::vector<Correspondence>{}, cam), Error);

  std::mt19937_64 rng(3);
  const RigidTransform truth = test::random_mount(rng);
  const auto exact = test::make_correspondences(truth, test::test_camera(),
                                                test::volume_points(rng, 15));
  CHECK(reprojection_residuals(truth, exact, test::test_camera()).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("iterative solver recovers the truth from a 2 deg / 5 cm start") {
  std::mt19937_64 rng(11);
  const CameraModel cam = test::test_camera();
  for (int trial = 0; trial < 20; ++trial) {
    const RigidTransform truth = test::random_mount(rng);
    const auto corrs = test::make_correspondences(truth, cam, test::volume_points(rng, 8));
    const auto sol = solve_pnp_iterative(corrs, cam, perturb(truth, 2.0, 0.05, rng));
    CHECK(rotation_error(sol.pose, truth) < 1e-6);
    CHECK(translation_error(sol.pose, truth) < 1e-6);
    CHECK(sol.rmse < 1e-6);
    CHECK(sol.inlier_mask.size() == corrs.size());
  }
}

TEST_CASE("iterative solver edge cases") {
  std::mt19937_64 rng(12);
  const CameraModel cam = test::test_camera();
  const RigidTransform truth = test::random_mount(rng);
  auto corrs = test::make_correspondences(truth, cam, test::volume_points(rng, 8));

  const auto at_truth = solve_pnp_iterative(corrs, cam, truth);
  CHECK(at_truth.rmse < 1e-9);
  CHECK(rotation_error(at_truth.pose, truth) < 1e-10);

  corrs.resize(3);
  try {
    solve_pnp_iterative(corrs, cam, truth);
    FAIL("expected insufficient points");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInsufficientPoints);
  }
}

TEST_CASE("iterative solver never worsens the initialization") {
  std::mt19937_64 rng(13);
  const CameraModel cam = test::test_camera();
  for (int trial = 0; trial < 30; ++trial) {
    const RigidTransform truth = test::random_mount(rng);
    const auto corrs = with_pixel_noise(
        test::make_correspondences(truth, cam, test::ground_points(rng, 12)), 2.0, rng);
    const RigidTransform init = perturb(truth, test::uniform(rng, 0, 8), 0.1, rng);
    const auto errs = reprojection_errors(init, corrs, cam);
    const auto sol = solve_pnp_iterative(corrs, cam, init);
    CHECK(sol.rmse <= rms(errs) + 1e-12);
  }
}

TEST_CASE("algebraic solver on non-coplanar points") {
  std::mt19937_64 rng(21);
  const CameraModel cam = test::test_camera();
  for (int trial = 0; trial < 20; ++trial) {
    const RigidTransform truth = test::random_mount(rng, 20.0, 0.3);
    const auto corrs = test::make_correspondences(truth, cam, test::volume_points(rng, 10));
    const auto sol = solve_pnp_algebraic(corrs, cam);
    CHECK(rotation_error(sol.pose, truth) < 1e-4);
    CHECK(translation_error(sol.pose, truth) < 1e-4);
  }
}

TEST_CASE("algebraic solver on ground-plane points") {
  std::mt19937_64 rng(22);
  const CameraModel cam = test::test_camera();
  int solved = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const RigidTransform truth = test::random_mount(rng);
    const auto corrs = test::make_correspondences(truth, cam, test::ground_points(rng, 10));
    try {
      const auto sol = solve_pnp_algebraic(corrs, cam);
      CHECK(rotation_error(sol.pose, truth) < 1e-3);
      ++solved;
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kDegenerateConfiguration);
    }
  }
  CHECK(solved > 0);
}

TEST_CASE("algebraic solver needs six pairs and a non-degenerate layout") {
  std::mt19937_64 rng(23);
  const CameraModel cam = test::test_camera();
  const RigidTransform truth = test::random_mount(rng);
  auto corrs = test::make_correspondences(truth, cam, test::volume_points(rng, 5));
  try {
    solve_pnp_algebraic(corrs, cam);
    FAIL("expected insufficient points");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInsufficientPoints);
  }

  // Every radar point on one line: no linear system can pin the pose.
  std::vector<Point3> line;
  for (int i = 0; i < 8; ++i) line.emplace_back(4.0 + i, 0.5, -0.2);
  const auto collinear = test::make_correspondences(truth, cam, line);
  try {
    solve_pnp_algebraic(collinear, cam);
    FAIL("expected degenerate configuration");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDegenerateConfiguration);
  }
}

TEST_CASE("RANSAC on clean data keeps every pair") {
  std::mt19937_64 rng(31);
  const CameraModel cam = test::test_camera();
  const RigidTransform truth = test::random_mount(rng);
  const auto corrs = test::make_correspondences(truth, cam, test::ground_points(rng, 20));
  RansacOptions opts;
  opts.seed = 5;
  const auto sol = ransac_pnp(corrs, cam, SolverKind::kIterative, opts,
                              nominal_extrinsics(10.0, 0.045));
  CHECK(sol.inlier_count() == 20);
  CHECK(rotation_error(sol.pose, truth) < 1e-6);

  const auto alg = ransac_pnp(corrs, cam, SolverKind::kAlgebraic, opts, RigidTransform{});
  CHECK(alg.inlier_count() == 20);
}

TEST_CASE("RANSAC excludes exactly the planted outliers") {
  std::mt19937_64 rng(32);
  const CameraModel cam = test::test_camera();
  for (int trial = 0; trial < 10; ++trial) {
    const RigidTransform truth = test::random_mount(rng);
    auto corrs = test::make_correspondences(truth, cam, test::ground_points(rng, 20));
    std::vector<std::size_t> idx(corrs.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(6);
    for (std::size_t i : idx) {
      const double a = test::uniform(rng, -M_PI, M_PI);
      corrs[i].pixel += test::uniform(rng, 110, 200) * Point2(std::cos(a), std::sin(a));
    }
    RansacOptions opts;
    opts.seed = static_cast<std::uint64_t>(trial);
    const auto sol = ransac_pnp(corrs, cam, SolverKind::kIterative, opts,
                                nominal_extrinsics(10.0, 0.045));
    for (std::size_t i = 0; i < corrs.size(); ++i) {
      const bool planted = std::find(idx.begin(), idx.end(), i) != idx.end();
      CHECK(sol.inlier_mask[i] == !planted);
    }
    CHECK(rotation_error(sol.pose, truth) < 0.2 * M_PI / 180.0);
    CHECK(translation_error(sol.pose, truth) < 0.02);
  }
}

TEST_CASE("RANSAC minimal clean case and failure") {
  std::mt19937_64 rng(33);
  const CameraModel cam = test::test_camera();
  const RigidTransform truth = test::random_mount(rng);
  const auto four = test::make_correspondences(truth, cam, test::volume_points(rng, 4));
  const auto sol = ransac_pnp(four, cam, SolverKind::kIterative, {}, nominal_extrinsics(10, 0.045));
  CHECK(sol.inlier_count() == 4);

  CHECK_THROWS_AS(ransac_pnp(std::span(four).first(3), cam, SolverKind::kIterative, {},
                             nominal_extrinsics(10, 0.045)),
                  Error);

  // Pixels scattered independently of geometry: no consensus of 6.
  auto junk = test::make_correspondences(truth, cam, test::volume_points(rng, 12));
  for (auto& c : junk) c.pixel = Point2(test::uniform(rng, 0, 1280), test::uniform(rng, 0, 720));
  RansacOptions strict;
  strict.inlier_threshold = 0.5;
  try {
    ransac_pnp(junk, cam, SolverKind::kIterative, strict, nominal_extrinsics(10, 0.045));
    FAIL("expected RANSAC failure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kRansacFailure);
  }
}

TEST_CASE("RANSAC is reproducible for a fixed seed") {
  std::mt19937_64 rng(34);
  const CameraModel cam = test::test_camera();
  const RigidTransform truth = test::random_mount(rng);
  auto corrs = with_pixel_noise(
      test::make_correspondences(truth, cam, test::ground_points(rng, 20)), 1.0, rng);
  for (std::size_t i = 0; i < 5; ++i) corrs[i * 3].pixel += Point2(150, -80);
  RansacOptions opts;
  opts.seed = 1234;
  const auto a = ransac_pnp(corrs, cam, SolverKind::kIterative, opts, nominal_extrinsics(10, 0.045));
  const auto b = ransac_pnp(corrs, cam, SolverKind::kIterative, opts, nominal_extrinsics(10, 0.045));
  CHECK(a.pose.rotation == b.pose.rotation);
  CHECK(a.pose.translation == b.pose.translation);
  CHECK(a.inlier_mask == b.inlier_mask);
  CHECK(a.rmse == b.rmse);
}

TEST_CASE("refine_all_pairs") {
  std::mt19937_64 rng(41);
  const CameraModel cam = test::test_camera();
  for (int trial = 0; trial < 10; ++trial) {
    const RigidTransform truth = test::random_mount(rng);
    const auto exact = test::make_correspondences(truth, cam, test::ground_points(rng, 15));

    const auto fixed = refine_all_pairs(truth, exact, cam);
    CHECK(rotation_error(fixed.pose, truth) < 1e-10);
    CHECK(translation_error(fixed.pose, truth) < 1e-10);

    const auto back = refine_all_pairs(perturb(truth, 5.0, 0.0, rng), exact, cam);
    CHECK(rotation_error(back.pose, truth) < 1e-6);
    CHECK(translation_error(back.pose, truth) < 1e-6);

    const auto noisy = with_pixel_noise(exact, 1.0, rng);
    RansacOptions opts;
    opts.seed = static_cast<std::uint64_t>(trial);
    const auto r = ransac_pnp(noisy, cam, SolverKind::kIterative, opts, nominal_extrinsics(10, 0.045));
    const double before = rms(reprojection_errors(r.pose, noisy, cam));
    const auto refined = refine_all_pairs(r.pose, noisy, cam);
    CHECK(refined.rmse <= before + 1e-12);
    CHECK(refined.inlier_count() == noisy.size());
  }
}

TEST_CASE("robust refinement lowers the robust cost and ignores gross outliers") {
  std::mt19937_64 rng(42);
  const CameraModel cam = test::test_camera();
  const RigidTransform truth = test::random_mount(rng);
  auto corrs = with_pixel_noise(
      test::make_correspondences(truth, cam, test::ground_points(rng, 20)), 1.0, rng);
  for (std::size_t i = 0; i < 6; ++i) {
    const double a = test::uniform(rng, -M_PI, M_PI);
    corrs[i].pixel += 150.0 * Point2(std::cos(a), std::sin(a));
  }
  const RigidTransform start = perturb(truth, 0.3, 0.01, rng);
  for (const RobustLoss loss : {RobustLoss::huber(8.0), RobustLoss::tukey(16.0)}) {
    const auto refined = refine_all_pairs(start, corrs, cam, loss);
    CHECK(robust_cost(refined.pose, corrs, cam, loss) <= robust_cost(start, corrs, cam, loss));
    CHECK(rotation_error(refined.pose, truth) < 0.5 * M_PI / 180.0);
  }
  // Past its scale the biweight is flat: moving an outlier further changes nothing.
  auto further = corrs;
  further[0].pixel += 40.0 * (further[0].pixel - project_point(cam, truth, further[0].radar)).normalized();
  const auto a = refine_all_pairs(start, corrs, cam, RobustLoss::tukey(16.0));
  const auto b = refine_all_pairs(start, further, cam, RobustLoss::tukey(16.0));
  CHECK(rotation_error(a.pose, b.pose) < 1e-9);
}

TEST_CASE("analytic Jacobian matches finite differences") {
  std::mt19937_64 rng(51);
  const CameraModel cam = test::test_camera();
  for (const RobustLoss loss :
       {RobustLoss::squared(), RobustLoss::huber(3.0), RobustLoss::tukey(6.0)}) {
    for (int trial = 0; trial < 25; ++trial) {
      const RigidTransform truth = test::random_mount(rng);
      const auto corrs = with_pixel_noise(
          test::make_correspondences(truth, cam, test::volume_points(rng, 10)), 5.0, rng);
      const RigidTransform at = perturb(truth, 2.0, 0.05, rng);
      const ReprojectionProblem problem(corrs, cam, at.rotation, loss);
      const Eigen::VectorXd x = problem.parameters_for(perturb(at, 0.5, 0.01, rng));
      const Eigen::MatrixXd analytic = problem.jacobian(x);
      const Eigen::MatrixXd numeric = numeric_jacobian(
          [&](const Eigen::VectorXd& v) { return problem.residuals(v); }, x);
      const double scale = std::max(1.0, numeric.cwiseAbs().maxCoeff());
      CHECK((analytic - numeric).cwiseAbs().maxCoeff() / scale < 1e-4);
    }
  }
}

TEST_CASE("parameters round-trip through the problem") {
  std::mt19937_64 rng(52);
  const CameraModel cam = test::test_camera();
  const RigidTransform truth = test::random_mount(rng);
  const auto corrs = test::make_correspondences(truth, cam, test::volume_points(rng, 6));
  const ReprojectionProblem problem(corrs, cam, truth.rotation);
  const RigidTransform q = perturb(truth, 3.0, 0.1, rng);
  const RigidTransform back = problem.pose_at(problem.parameters_for(q));
  CHECK(rotation_error(back, q) < 1e-12);
  CHECK(translation_error(back, q) < 1e-12);
}

TEST_CASE("gauge consistency under a rigid change of radar frame") {
  std::mt19937_64 rng(53);
  const CameraModel cam = test::test_camera();
  for (int trial = 0; trial < 20; ++trial) {
    const RigidTransform truth = test::random_mount(rng);
    const auto corrs = with_pixel_noise(
        test::make_correspondences(truth, cam, test::volume_points(rng, 10)), 3.0, rng);
    RigidTransform g;
    g.rotation = axis_angle_to_rotation(
        AxisAngle(test::uniform(rng, -1, 1), test::uniform(rng, -1, 1), test::uniform(rng, -1, 1)));
    g.translation = Point3(test::uniform(rng, -2, 2), test::uniform(rng, -2, 2),
                           test::uniform(rng, -2, 2));
    auto moved = corrs;
    for (auto& c : moved) c.radar = transform_point(g, c.radar);
    const RigidTransform compensated = truth.compose(g.inverse());
    const Eigen::VectorXd a = reprojection_residuals(truth, corrs, cam);
    const Eigen::VectorXd b = reprojection_residuals(compensated, moved, cam);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-9);
  }
}

}  // TEST_SUITE
