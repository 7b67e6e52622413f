#pragma once

#include <span>
#include <vector>

#include "radcam/geometry.hpp"

namespace radcam {

struct PointPair {
  Point2 observed = Point2::Zero();
  Point2 projected = Point2::Zero();
};

struct TimedPoint {
  double timestamp = 0.0;
  Point2 pixel = Point2::Zero();
};

struct BBox {
  double timestamp = 0.0;
  double min_u = 0.0;
  double min_v = 0.0;
  double max_u = 0.0;
  double max_v = 0.0;

  void validate() const;
  bool contains(const Point2& p) const;  // boundary inclusive
};

inline constexpr double kTimestampGate = 0.05;  // seconds

std::vector<double> euclidean_distances(std::span<const PointPair> pairs);

/// Average Euclidean distance. Throws kEmptyInput when empty.
double aed(std::span<const PointPair> pairs);

/// Corrected (N-1) standard deviation of the distances. Throws kInsufficientData for N < 2.
double cdsd(std::span<const PointPair> pairs);

/// Fraction of projected points inside the bbox nearest in time (within `gate`);
/// points without a box in the gate count as outside. Throws kEmptyInput when empty.
double acc(std::span<const TimedPoint> projected, std::span<const BBox> bboxes,
           double gate = kTimestampGate);

/// Pairs every observed point with the projected point nearest in time within `gate`.
/// Observed points without a partner are skipped.
std::vector<PointPair> match_by_timestamp(std::span<const TimedPoint> observed,
                                          std::span<const TimedPoint> projected,
                                          double gate = kTimestampGate);

}  // namespace radcam
