#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace radseq {

struct PenPoint {
  double x = 0.0;
  double y = 0.0;
  int stroke = 1;

  friend bool operator==(const PenPoint&, const PenPoint&) = default;
};

/// Thrown for inputs that violate the trajectory invariants, including the
/// degenerate "zero-extent trajectory" case.
class TrajectoryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Ordered pen points as captured by a digitizer. Stroke ids are positive and
/// non-decreasing along the list.
class RawTrajectory {
 public:
  RawTrajectory() = default;
  explicit RawTrajectory(std::vector<PenPoint> points);

  const std::vector<PenPoint>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const PenPoint& operator[](std::size_t i) const { return points_[i]; }

  /// Number of distinct strokes.
  std::size_t stroke_count() const;

  /// Points grouped by stroke, in order.
  std::vector<std::vector<PenPoint>> strokes() const;

  friend bool operator==(const RawTrajectory&, const RawTrajectory&) = default;

 private:
  std::vector<PenPoint> points_;
};

/// Throws TrajectoryError unless `points` is non-empty with positive,
/// non-decreasing stroke ids.
void validate(const std::vector<PenPoint>& points);

using FeatureRow = std::array<double, 6>;

/// Per-point features [x, y, dx, dy, pen_down, pen_up].
struct FeatureSequence {
  std::vector<FeatureRow> rows;

  std::size_t size() const { return rows.size(); }
};

struct Bounds {
  double min_x, min_y, max_x, max_y;
};

Bounds bounding_box(const RawTrajectory& t);

/// Centers the bounding box at the origin and scales the larger side to 1.
RawTrajectory normalize(const RawTrajectory& t);

/// Linear re-interpolation of each stroke at uniform arc-length steps no
/// longer than `spacing`. Stroke endpoints are kept.
RawTrajectory resample(const RawTrajectory& t, double spacing);

FeatureSequence featurize(const RawTrajectory& t);

inline constexpr double kDefaultSpacing = 0.05;

/// normalize -> resample -> featurize.
FeatureSequence preprocess(const RawTrajectory& t, double spacing = kDefaultSpacing);

/// The resampled trajectory that `preprocess` featurizes.
RawTrajectory prepare(const RawTrajectory& t, double spacing = kDefaultSpacing);

}  // namespace radseq
