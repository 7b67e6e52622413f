#include "radcam/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "radcam/error.hpp"

namespace radcam {

namespace {

// Index of the element whose timestamp is nearest to ts within the gate; earlier wins ties.
template <typename T>
std::optional<std::size_t> nearest_in_time(const std::vector<T>& sorted, double ts, double gate) {
  const auto hi = std::lower_bound(sorted.begin(), sorted.end(), ts,
                                   [](const T& item, double t) { return item.timestamp < t; });
  std::optional<std::size_t> best;
  double best_dt = gate;
  if (hi != sorted.begin()) {
    const auto idx = static_cast<std::size_t>(hi - sorted.begin()) - 1;
    const double dt = ts - sorted[idx].timestamp;
    if (dt <= best_dt) {
      best = idx;
      best_dt = dt;
    }
  }
  if (hi != sorted.end()) {
    const auto idx = static_cast<std::size_t>(hi - sorted.begin());
    const double dt = sorted[idx].timestamp - ts;
    if (dt <= gate && (!best || dt < best_dt)) best = idx;
  }
  return best;
}

template <typename T>
std::vector<T> sorted_by_time(std::span<const T> items) {
  std::vector<T> out(items.begin(), items.end());
  std::stable_sort(out.begin(), out.end(),
                   [](const T& a, const T& b) { return a.timestamp < b.timestamp; });
  return out;
}

}  // namespace

void BBox::validate() const {
  if (!(min_u <= max_u) || !(min_v <= max_v)) {
    throw Error(ErrorCode::kValidation, "bounding box has min greater than max");
  }
}

bool BBox::contains(const Point2& p) const {
  return min_u <= p.x() && p.x() <= max_u && min_v <= p.y() && p.y() <= max_v;
}

std::vector<double> euclidean_distances(std::span<const PointPair> pairs) {
  std::vector<double> d(pairs.size());
  std::transform(pairs.begin(), pairs.end(), d.begin(),
                 [](const PointPair& p) { return (p.observed - p.projected).norm(); });
  return d;
}

double aed(std::span<const PointPair> pairs) {
  if (pairs.empty()) throw Error(ErrorCode::kEmptyInput, "AED of an empty pair list");
  const std::vector<double> d = euclidean_distances(pairs);
  return std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
}

double cdsd(std::span<const PointPair> pairs) {
  if (pairs.size() < 2) {
    throw Error(ErrorCode::kInsufficientData, "CDSD needs at least two pairs");
  }
  const double mean = aed(pairs);
  double ss = 0.0;
  for (double d : euclidean_distances(pairs)) ss += (d - mean) * (d - mean);
  return std::sqrt(ss / static_cast<double>(pairs.size() - 1));
}

double acc(std::span<const TimedPoint> projected, std::span<const BBox> bboxes, double gate) {
  if (projected.empty()) throw Error(ErrorCode::kEmptyInput, "Acc of an empty point list");
  const std::vector<BBox> boxes = sorted_by_time(bboxes);
  std::size_t inside = 0;
  for (const auto& p : projected) {
    const auto idx = nearest_in_time(boxes, p.timestamp, gate);
    if (idx && boxes[*idx].contains(p.pixel)) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(projected.size());
}

std::vector<PointPair> match_by_timestamp(std::span<const TimedPoint> observed,
                                          std::span<const TimedPoint> projected, double gate) {
  const std::vector<TimedPoint> proj = sorted_by_time(projected);
  std::vector<PointPair> out;
  for (const auto& o : observed) {
    const auto idx = nearest_in_time(proj, o.timestamp, gate);
    if (idx) out.push_back({o.pixel, proj[*idx].pixel});
  }
  return out;
}

}  // namespace radcam
