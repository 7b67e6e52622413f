#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "doctest.h"
#include "radcam/error.hpp"
#include "radcam/pipeline.hpp"
#include "radcam/synth.hpp"
#include "test_support.hpp"

using namespace radcam;

namespace {

PipelineOptions options_for(const Scenario& s, std::uint64_t seed = 0) {
  PipelineOptions opts;
  opts.start_timestamp = s.start_timestamp;
  opts.ransac.seed = seed;
  return opts;
}

Scenario scenario(std::uint64_t seed, int n, double radar_noise, double pixel_noise,
                  double outliers = 0.0) {
  ScenarioParams p;
  p.seed = seed;
  p.n_placements = n;
  p.radar_noise_sigma = radar_noise;
  p.pixel_noise_sigma = pixel_noise;
  p.outlier_fraction = outliers;
  return generate_scenario(p);
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kIo;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("absolutize_timestamps") {
  const std::vector<ImageAnnotation> ann{{0.5, {1, 1}}, {2.0, {2, 2}}};
  CHECK(absolutize_timestamps(ann, 1000.0) == std::vector<double>{1000.5, 1002.0});
  CHECK(absolutize_timestamps(ann, 0.0) == std::vector<double>{0.5, 2.0});
  const std::vector<ImageAnnotation> bad{{2.0, {1, 1}}, {0.5, {2, 2}}};
  CHECK(code_of([&] { absolutize_timestamps(bad, 0.0); }) == ErrorCode::kOrdering);
}

TEST_CASE("static_filter") {
  PipelineOptions opts;
  const std::vector<RadarDetection> dets{
      RadarDetection::at(0.0, {5, 0, 0}, 0.5),   // moving
      RadarDetection::at(0.1, {25, 0, 0}, 0.0),  // too far
      RadarDetection::at(0.2, {5, 0, 0}, 0.0),   // kept
      RadarDetection::at(0.3, {20, 0, 0}, 0.0),  // range bound is strict
      RadarDetection::at(0.4, {3, 4, 0}, -1e-3), // at the velocity bound
  };
  const auto kept = static_filter(dets, opts);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].timestamp == 0.2);
  CHECK(kept[1].timestamp == 0.4);
  CHECK(static_filter(std::vector<RadarDetection>{}, opts).empty());
}

TEST_CASE("associate_closest") {
  const std::vector<double> rad{1.0, 2.0, 3.0};
  CHECK(associate_closest(rad, std::vector<double>{2.1}) == std::vector<double>{2.0});
  CHECK(associate_closest(rad, std::vector<double>{3.0}) == std::vector<double>{3.0});
  CHECK(associate_closest(std::vector<double>{1.0, 3.0}, std::vector<double>{2.0}) ==
        std::vector<double>{1.0});
  CHECK(associate_closest(rad, std::vector<double>{-5.0, 99.0}) ==
        std::vector<double>{1.0, 3.0});
  CHECK(code_of([&] { associate_closest(std::vector<double>{}, std::vector<double>{1.0}); }) ==
        ErrorCode::kEmptyInput);
  CHECK(code_of([&] { associate_closest(rad, std::vector<double>{}); }) == ErrorCode::kEmptyInput);
}

TEST_CASE("aggregate_window with a constant window") {
  std::vector<RadarDetection> dets;
  for (int i = 0; i < 10; ++i) dets.push_back(RadarDetection::at(100.0 + 0.1 * i, {2, 0.5, -0.3}, 0));
  const auto mean = aggregate_window(dets, 100.3, PipelineOptions{});
  REQUIRE(mean);
  CHECK((*mean - Point3(2, 0.5, -0.3)).norm() < 1e-15);
}

TEST_CASE("aggregate_window rejects a Z-score outlier") {
  // Nine points spread +-0.01 around (5, 1, 0.2) plus one at x = 8.
  const double pattern[9] = {-0.01, 0.01, -0.01, 0.01, 0.0, -0.01, 0.01, -0.01, 0.01};
  std::vector<Point3> pts;
  for (int i = 0; i < 9; ++i) {
    pts.emplace_back(5.0 + pattern[i], 1.0 + pattern[(i + 3) % 9], 0.2 + pattern[(i + 5) % 9]);
  }
  pts.emplace_back(8.0, 1.0, 0.2);
  std::vector<RadarDetection> dets;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    dets.push_back(RadarDetection::at(50.0 + 0.1 * static_cast<double>(i), pts[i], 0.0));
  }

  // Hand oracle for the outlier's x score.
  double mean_x = 0;
  for (const auto& p : pts) mean_x += p.x();
  mean_x /= 10.0;
  double ss = 0;
  for (const auto& p : pts) ss += (p.x() - mean_x) * (p.x() - mean_x);
  const double z_out = (8.0 - mean_x) / std::sqrt(ss / 9.0);
  CHECK(z_out == doctest::Approx(2.85).epsilon(0.01));
  CHECK(z_out > 2.0);

  Point3 inlier_mean = Point3::Zero();
  for (int i = 0; i < 9; ++i) inlier_mean += pts[static_cast<std::size_t>(i)];
  inlier_mean /= 9.0;

  const auto mean = aggregate_window(dets, 50.4, PipelineOptions{});
  REQUIRE(mean);
  CHECK((*mean - inlier_mean).norm() < 1e-12);
  CHECK((*mean - Point3(5, 1, 0.2)).norm() < 0.01);
}

TEST_CASE("aggregate_window edge cases") {
  const std::vector<RadarDetection> dets{RadarDetection::at(10.0, {3, 0, 0}, 0)};
  CHECK_FALSE(aggregate_window(dets, 20.0, PipelineOptions{}));
  CHECK_FALSE(aggregate_window(std::vector<RadarDetection>{}, 20.0, PipelineOptions{}));
  // Window is centered on the rounded timestamp and closed at both ends.
  const std::vector<RadarDetection> edge{RadarDetection::at(9.0, {3, 0, 0}, 0),
                                         RadarDetection::at(11.0, {5, 0, 0}, 0),
                                         RadarDetection::at(11.6, {100, 0, 0}, 0)};
  const auto mean = aggregate_window(edge, 10.4, PipelineOptions{});
  REQUIRE(mean);
  CHECK(mean->x() == doctest::Approx(4.0));
}

TEST_CASE("aggregate_window mean lies inside the survivors' bounding box") {
  std::mt19937_64 rng(61);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<RadarDetection> dets;
    const int n = 1 + trial % 25;
    for (int i = 0; i < n; ++i) {
      dets.push_back(RadarDetection::at(30.0 + 0.05 * i, {5 + g(rng), g(rng), g(rng)}, 0.0));
    }
    const auto mean = aggregate_window(dets, 30.0, PipelineOptions{});
    REQUIRE(mean);
    Point3 lo = dets[0].position, hi = dets[0].position;
    for (const auto& d : dets) {
      lo = lo.cwiseMin(d.position);
      hi = hi.cwiseMax(d.position);
    }
    CHECK((mean->array() >= lo.array() - 1e-12).all());
    CHECK((mean->array() <= hi.array() + 1e-12).all());
  }
}

TEST_CASE("build_correspondences counts") {
  const Scenario s = scenario(7, 12, 0.02, 1.0);
  const auto opts = options_for(s);
  const auto corrs = build_correspondences(s.detections, s.annotations, opts);
  CHECK(corrs.size() == 12);
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    CHECK(corrs[i].annotation_index == i);
    CHECK((corrs[i].radar - s.true_placements[i]).norm() < 0.05);
  }

  // Silence the radar for placement 4: its annotation has nothing to pair with.
  const double t4 = s.annotations[4].local_timestamp + s.start_timestamp;
  std::vector<RadarDetection> gap;
  for (const auto& d : s.detections) {
    if (std::abs(d.timestamp - t4) > 2.5) gap.push_back(d);
  }
  std::vector<std::size_t> dropped;
  const auto fewer = build_correspondences(gap, s.annotations, opts, &dropped);
  CHECK(fewer.size() == 11);
  CHECK(dropped == std::vector<std::size_t>{4});

  const Scenario tiny = scenario(7, 3, 0.02, 1.0);
  CHECK(code_of([&] { build_correspondences(tiny.detections, tiny.annotations, options_for(tiny)); }) ==
        ErrorCode::kInsufficientData);
}

TEST_CASE("calibrate recovers a noiseless scenario exactly") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Scenario s = scenario(seed, 20, 0.0, 0.0);
    const auto res = calibrate(s.detections, s.annotations, s.cam, options_for(s, seed));
    CHECK(test::rotation_error(res.pose, s.ground_truth) < 1e-6);
    CHECK(test::translation_error(res.pose, s.ground_truth) < 1e-6);
    CHECK(res.correspondences_used == 20);
    CHECK((euler_to_rotation(res.euler) - res.pose.rotation).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("calibrate on a noisy scenario") {
  const Scenario s = scenario(17, 20, 0.02, 1.0);
  const auto res = calibrate(s.detections, s.annotations, s.cam, options_for(s, 17));
  CHECK(test::rotation_error(res.pose, s.ground_truth) < 0.5 * M_PI / 180.0);
  CHECK(test::translation_error(res.pose, s.ground_truth) < 0.02);
  CHECK(res.inlier_mask.size() == 20);
  CHECK(res.per_pair_error.size() == 20);
}

TEST_CASE("calibrate is deterministic") {
  const Scenario s = scenario(23, 20, 0.02, 1.0, 0.2);
  const auto a = calibrate(s.detections, s.annotations, s.cam, options_for(s, 99));
  const auto b = calibrate(s.detections, s.annotations, s.cam, options_for(s, 99));
  CHECK(a.pose.rotation == b.pose.rotation);
  CHECK(a.pose.translation == b.pose.translation);
  CHECK(a.inlier_mask == b.inlier_mask);
  CHECK(a.rmse == b.rmse);
}

TEST_CASE("solver selection and refinement invariants") {
  for (std::uint64_t seed = 30; seed < 40; ++seed) {
    const Scenario s = scenario(seed, 20, 0.02, 1.0);
    for (bool robust : {true, false}) {
      auto opts = options_for(s, seed);
      opts.robust_refinement = robust;
      const auto res = calibrate(s.detections, s.annotations, s.cam, opts);
      REQUIRE(res.iterative_rmse);
      const double best = res.algebraic_rmse ? std::min(*res.iterative_rmse, *res.algebraic_rmse)
                                             : *res.iterative_rmse;
      const double chosen = res.solver_chosen == SolverKind::kIterative ? *res.iterative_rmse
                                                                         : *res.algebraic_rmse;
      CHECK(chosen == best);
      if (res.algebraic_rmse && *res.algebraic_rmse == *res.iterative_rmse) {
        CHECK(res.solver_chosen == SolverKind::kIterative);
      }
      if (robust) {
        // The robust loss, not the plain rmse, is what refinement descends.
        const RobustLoss loss = RobustLoss::tukey(2.0 * opts.ransac.inlier_threshold);
        const double before = std::pow(res.selected_full_rmse, 2) * 20.0;
        CHECK(robust_cost(res.pose, res.correspondences, s.cam, loss) <= before + 1e-9);
      } else {
        CHECK(res.rmse <= res.selected_full_rmse + 1e-12);
      }
    }
  }
}

TEST_CASE("annotation order does not change the pose") {
  const Scenario s = scenario(41, 20, 0.02, 1.0, 0.2);
  const auto base = calibrate(s.detections, s.annotations, s.cam, options_for(s, 5));
  std::mt19937_64 rng(8);
  std::vector<std::size_t> perm(s.annotations.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<ImageAnnotation> shuffled;
  for (std::size_t i : perm) shuffled.push_back(s.annotations[i]);
  const auto res = calibrate(s.detections, shuffled, s.cam, options_for(s, 5));
  CHECK(test::rotation_error(res.pose, base.pose) < 1e-9);
  CHECK(test::translation_error(res.pose, base.pose) < 1e-9);
  for (std::size_t k = 0; k < perm.size(); ++k) {
    CHECK(res.correspondences[k].pixel == base.correspondences[perm[k]].pixel);
    CHECK(res.correspondences[k].radar == base.correspondences[perm[k]].radar);
    CHECK(res.inlier_mask[k] == base.inlier_mask[perm[k]]);
  }
}

TEST_CASE("detections outside every window do not matter") {
  const Scenario s = scenario(43, 20, 0.02, 1.0);
  const auto opts = options_for(s, 3);
  const auto corrs = build_correspondences(s.detections, s.annotations, opts);
  // Each used window is one second either side of a rounded dwell-center timestamp.
  std::vector<RadarDetection> local;
  for (const auto& d : s.detections) {
    for (const auto& a : s.annotations) {
      if (std::abs(d.timestamp - (a.local_timestamp + s.start_timestamp)) <= 1.6) {
        local.push_back(d);
        break;
      }
    }
  }
  REQUIRE(local.size() < s.detections.size());
  const auto again = build_correspondences(local, s.annotations, opts);
  REQUIRE(again.size() == corrs.size());
  for (std::size_t i = 0; i < corrs.size(); ++i) CHECK(again[i].radar == corrs[i].radar);
  const auto a = calibrate(s.detections, s.annotations, s.cam, opts);
  const auto b = calibrate(local, s.annotations, s.cam, opts);
  CHECK(a.pose.rotation == b.pose.rotation);
}

TEST_CASE("calibrate errors") {
  const Scenario s = scenario(44, 20, 0.0, 0.0);
  auto opts = options_for(s);
  opts.window_half_width = 0.0;
  CHECK(code_of([&] { calibrate(s.detections, s.annotations, s.cam, opts); }) ==
        ErrorCode::kValidation);

  // Pixels with no geometric relation to the radar points: both solvers fail.
  std::vector<Correspondence> junk;
  std::mt19937_64 rng(1);
  for (std::size_t i = 0; i < 10; ++i) {
    junk.push_back({s.true_placements[i],
                    Point2(test::uniform(rng, 0, 1280), test::uniform(rng, 0, 720)),
                    static_cast<double>(i), i});
  }
  auto strict = options_for(s);
  strict.ransac.inlier_threshold = 0.5;
  CHECK(code_of([&] { calibrate_correspondences(junk, s.cam, strict); }) ==
        ErrorCode::kCalibrationFailure);
}

}  // TEST_SUITE
