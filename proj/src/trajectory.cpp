#include "radseq/trajectory.hpp"

#include <algorithm>
#include <cmath>

namespace radseq {

void validate(const std::vector<PenPoint>& points) {
  if (points.empty()) throw TrajectoryError("empty trajectory");
  int prev = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (p.stroke < 1) {
      throw TrajectoryError("stroke id must be positive at point " + std::to_string(i));
    }
    if (p.stroke < prev) {
      throw TrajectoryError("stroke ids decrease at point " + std::to_string(i));
    }
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw TrajectoryError("non-finite coordinate at point " + std::to_string(i));
    }
    prev = p.stroke;
  }
}

RawTrajectory::RawTrajectory(std::vector<PenPoint> points) : points_(std::move(points)) {
  validate(points_);
}

std::size_t RawTrajectory::stroke_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (i == 0 || points_[i].stroke != points_[i - 1].stroke) ++n;
  }
  return n;
}

std::vector<std::vector<PenPoint>> RawTrajectory::strokes() const {
  std::vector<std::vector<PenPoint>> out;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (i == 0 || points_[i].stroke != points_[i - 1].stroke) out.emplace_back();
    out.back().push_back(points_[i]);
  }
  return out;
}

Bounds bounding_box(const RawTrajectory& t) {
  if (t.empty()) throw TrajectoryError("empty trajectory");
  Bounds b{t[0].x, t[0].y, t[0].x, t[0].y};
  for (const auto& p : t.points()) {
    b.min_x = std::min(b.min_x, p.x);
    b.max_x = std::max(b.max_x, p.x);
    b.min_y = std::min(b.min_y, p.y);
    b.max_y = std::max(b.max_y, p.y);
  }
  return b;
}

RawTrajectory normalize(const RawTrajectory& t) {
  const Bounds b = bounding_box(t);
  const double extent = std::max(b.max_x - b.min_x, b.max_y - b.min_y);
  if (!(extent > 0.0)) throw TrajectoryError("zero-extent trajectory");
  const double cx = 0.5 * (b.min_x + b.max_x);
  const double cy = 0.5 * (b.min_y + b.max_y);
  std::vector<PenPoint> out;
  out.reserve(t.size());
  for (const auto& p : t.points()) {
    out.push_back({(p.x - cx) / extent, (p.y - cy) / extent, p.stroke});
  }
  return RawTrajectory(std::move(out));
}

namespace {

void resample_stroke(const std::vector<PenPoint>& stroke, double spacing,
                     std::vector<PenPoint>& out) {
  const int id = stroke.front().stroke;
  std::vector<double> cumulative(stroke.size(), 0.0);
  for (std::size_t i = 1; i < stroke.size(); ++i) {
    cumulative[i] = cumulative[i - 1] +
                    std::hypot(stroke[i].x - stroke[i - 1].x, stroke[i].y - stroke[i - 1].y);
  }
  const double total = cumulative.back();
  if (stroke.size() == 1 || total == 0.0) {
    out.push_back(stroke.front());
    if (stroke.size() > 1) out.push_back(stroke.back());
    return;
  }
  const auto segments = static_cast<std::size_t>(std::ceil(total / spacing - 1e-12));
  const std::size_t n = std::max<std::size_t>(segments, 1);
  const double step = total / static_cast<double>(n);
  std::size_t seg = 1;
  out.push_back(stroke.front());
  for (std::size_t k = 1; k < n; ++k) {
    const double s = step * static_cast<double>(k);
    while (seg + 1 < stroke.size() && cumulative[seg] < s) ++seg;
    const double len = cumulative[seg] - cumulative[seg - 1];
    const double u = len > 0.0 ? (s - cumulative[seg - 1]) / len : 0.0;
    const auto& a = stroke[seg - 1];
    const auto& b = stroke[seg];
    out.push_back({a.x + u * (b.x - a.x), a.y + u * (b.y - a.y), id});
  }
  out.push_back(stroke.back());
}

}  // namespace

RawTrajectory resample(const RawTrajectory& t, double spacing) {
  if (!(spacing > 0.0)) throw std::invalid_argument("resample spacing must be positive");
  if (t.empty()) throw TrajectoryError("empty trajectory");
  std::vector<PenPoint> out;
  out.reserve(t.size());
  for (const auto& stroke : t.strokes()) resample_stroke(stroke, spacing, out);
  return RawTrajectory(std::move(out));
}

FeatureSequence featurize(const RawTrajectory& t) {
  if (t.empty()) throw std::invalid_argument("cannot featurize an empty trajectory");
  FeatureSequence f;
  f.rows.resize(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto& p = t[i];
    if (i + 1 < t.size()) {
      const auto& q = t[i + 1];
      const bool same = p.stroke == q.stroke;
      f.rows[i] = {p.x, p.y, q.x - p.x, q.y - p.y, same ? 1.0 : 0.0, same ? 0.0 : 1.0};
    } else {
      f.rows[i] = {p.x, p.y, 0.0, 0.0, 0.0, 1.0};
    }
  }
  return f;
}

RawTrajectory prepare(const RawTrajectory& t, double spacing) {
  return resample(normalize(t), spacing);
}

FeatureSequence preprocess(const RawTrajectory& t, double spacing) {
  return featurize(prepare(t, spacing));
}

}  // namespace radseq
