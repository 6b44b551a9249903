#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace racing {

class TrackLoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class OffTrackError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrackPoint {
  double s = 0.0;
  double x = 0.0;
  double y = 0.0;
  double phi = 0.0;
  double half_width = 0.0;
};

struct RefPose {
  double x = 0.0;
  double y = 0.0;
  double phi = 0.0;
  double curvature = 0.0;
  double half_width = 0.0;
};

/// Contouring error (positive right of the path) and lag error (positive when
/// the point trails the reference).
struct ContouringErrors {
  double e_c = 0.0;
  double e_l = 0.0;
};

/// Progress along a closed track.
struct PathProgress {
  double theta = 0.0;  // [0, total_length)
  int lap_count = 0;
};

/// Closed, arc-length parameterized reference path. Immutable once built.
class Track {
 public:
  /// Builds a closed loop from (x, y[, half width]) nodes. The closing
  /// segment runs from the last node back to the first; a duplicated final
  /// node is dropped. `min_points` guards against degenerate files.
  static Track from_points(const std::vector<double>& xs,
                           const std::vector<double>& ys,
                           const std::vector<double>& half_widths,
                           std::size_t min_points = 3);

  double total_length() const { return total_length_; }
  const std::vector<TrackPoint>& points() const { return points_; }
  /// Smallest half width along the track.
  double min_half_width() const;
  double max_spacing() const;

  /// Wraps theta into [0, total_length).
  double wrap(double theta) const;
  /// Signed arc-length difference a - b folded into (-L/2, L/2].
  double signed_distance(double a, double b) const;

  RefPose ref_pose(double theta) const;

  /// Arc length of the closest point on the path. Searches +/-50 m around a
  /// finite `theta_guess`, or the whole loop when the guess is NaN or the
  /// local result is implausible. Throws OffTrackError beyond 3 half-widths.
  double project(double x, double y, double theta_guess) const;

  ContouringErrors contouring_errors(double x, double y, double theta) const;

 private:
  std::size_t segment_index(double theta) const;
  double closest_on_segment(std::size_t i, double x, double y, double& dist2) const;
  double search(double x, double y, std::size_t first, std::size_t count, double& best_d2) const;

  std::vector<TrackPoint> points_;
  std::vector<double> curvature_;
  double total_length_ = 0.0;
};

/// Reads a `s,x,y[,w]` CSV with a header row. `half_width` applies to rows
/// without a `w` value. Rejects fewer than 10 rows, non-increasing s, or a
/// loop whose endpoints are more than 5 m apart.
Track load_track(const std::string& path, double half_width);

ContouringErrors contouring_errors(const Track& track, double x, double y, double theta);

}  // namespace racing
