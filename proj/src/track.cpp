#include "racing/track.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

namespace racing {

namespace {

constexpr double kLocalWindow = 50.0;     // m
constexpr double kMaxSpacing = 2.0;       // m
constexpr double kMaxClosingGap = 5.0;    // m
constexpr std::size_t kMinFilePoints = 10;

double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * std::numbers::pi);
  return a <= -std::numbers::pi ? a + 2.0 * std::numbers::pi : a;
}

}  // namespace

Track Track::from_points(const std::vector<double>& xs,
                         const std::vector<double>& ys,
                         const std::vector<double>& half_widths,
                         std::size_t min_points) {
  if (xs.size() != ys.size() || xs.size() != half_widths.size()) {
    throw TrackLoadError("track: coordinate arrays differ in length");
  }
  std::size_t n = xs.size();
  if (n >= 2 && std::hypot(xs[n - 1] - xs[0], ys[n - 1] - ys[0]) < 1e-9) --n;
  if (n < std::max<std::size_t>(min_points, 3)) {
    throw TrackLoadError("track: need at least " + std::to_string(std::max<std::size_t>(min_points, 3)) +
                         " distinct points, got " + std::to_string(n));
  }

  Track t;
  t.points_.resize(n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = (i + 1) % n;
    auto& p = t.points_[i];
    p.s = s;
    p.x = xs[i];
    p.y = ys[i];
    p.half_width = half_widths[i];
    if (!(p.half_width > 0.0)) {
      throw TrackLoadError("track: non-positive half width at point " + std::to_string(i));
    }
    const double len = std::hypot(xs[j] - xs[i], ys[j] - ys[i]);
    if (!(len > 0.0)) throw TrackLoadError("track: repeated point at index " + std::to_string(i));
    s += len;
  }
  t.total_length_ = s;

  for (std::size_t i = 0; i < n; ++i) {
    const auto& prev = t.points_[(i + n - 1) % n];
    const auto& next = t.points_[(i + 1) % n];
    t.points_[i].phi = std::atan2(next.y - prev.y, next.x - prev.x);
  }
  t.curvature_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& prev = t.points_[(i + n - 1) % n];
    const auto& next = t.points_[(i + 1) % n];
    double ds = next.s - prev.s;
    if (ds <= 0.0) ds += t.total_length_;
    t.curvature_[i] = wrap_angle(next.phi - prev.phi) / ds;
  }
  return t;
}

double Track::min_half_width() const {
  double w = std::numeric_limits<double>::infinity();
  for (const auto& p : points_) w = std::min(w, p.half_width);
  return w;
}

double Track::max_spacing() const {
  double m = 0.0;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const double next_s = i + 1 < points_.size() ? points_[i + 1].s : total_length_;
    m = std::max(m, next_s - points_[i].s);
  }
  return m;
}

double Track::wrap(double theta) const {
  double w = std::fmod(theta, total_length_);
  if (w < 0.0) w += total_length_;
  if (w >= total_length_) w = 0.0;
  return w;
}

double Track::signed_distance(double a, double b) const {
  double d = std::fmod(a - b, total_length_);
  if (d > 0.5 * total_length_) d -= total_length_;
  if (d <= -0.5 * total_length_) d += total_length_;
  return d;
}

std::size_t Track::segment_index(double theta_wrapped) const {
  auto it = std::upper_bound(points_.begin(), points_.end(), theta_wrapped,
                             [](double v, const TrackPoint& p) { return v < p.s; });
  return static_cast<std::size_t>(std::distance(points_.begin(), it)) - 1;
}

RefPose Track::ref_pose(double theta) const {
  const double w = wrap(theta);
  const std::size_t i = segment_index(w);
  const std::size_t j = (i + 1) % points_.size();
  const auto& a = points_[i];
  const auto& b = points_[j];
  const double seg_end = j == 0 ? total_length_ : b.s;
  const double t = (w - a.s) / (seg_end - a.s);

  RefPose pose;
  pose.x = a.x + t * (b.x - a.x);
  pose.y = a.y + t * (b.y - a.y);
  pose.phi = wrap_angle(a.phi + t * wrap_angle(b.phi - a.phi));
  pose.curvature = curvature_[i] + t * (curvature_[j] - curvature_[i]);
  pose.half_width = a.half_width + t * (b.half_width - a.half_width);
  return pose;
}

double Track::closest_on_segment(std::size_t i, double x, double y, double& dist2) const {
  const std::size_t j = (i + 1) % points_.size();
  const auto& a = points_[i];
  const auto& b = points_[j];
  const double seg_end = j == 0 ? total_length_ : b.s;
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  const double t = std::clamp(((x - a.x) * dx + (y - a.y) * dy) / len2, 0.0, 1.0);
  const double px = a.x + t * dx - x;
  const double py = a.y + t * dy - y;
  dist2 = px * px + py * py;
  return a.s + t * (seg_end - a.s);
}

double Track::search(double x, double y, std::size_t first, std::size_t count,
                     double& best_d2) const {
  best_d2 = std::numeric_limits<double>::infinity();
  double best = 0.0;
  const std::size_t n = points_.size();
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t i = (first + k) % n;
    double d2 = 0.0;
    const double s = closest_on_segment(i, x, y, d2);
    if (d2 < best_d2) {
      best_d2 = d2;
      best = s;
    }
  }
  return wrap(best);
}

double Track::project(double x, double y, double theta_guess) const {
  const std::size_t n = points_.size();
  double d2 = std::numeric_limits<double>::infinity();
  double theta = 0.0;
  bool found = false;
  if (std::isfinite(theta_guess)) {
    const double start = wrap(theta_guess - kLocalWindow);
    const std::size_t first = segment_index(start);
    std::size_t count = 0;
    double covered = 0.0;
    while (count < n && covered < 2.0 * kLocalWindow + 2.0 * max_spacing()) {
      const std::size_t i = (first + count) % n;
      const double seg_end = i + 1 < n ? points_[i + 1].s : total_length_;
      covered += seg_end - points_[i].s;
      ++count;
    }
    theta = search(x, y, first, count, d2);
    found = std::sqrt(d2) <= 3.0 * ref_pose(theta).half_width;
  }
  if (!found) {
    theta = search(x, y, 0, n, d2);
    if (std::sqrt(d2) > 3.0 * ref_pose(theta).half_width) {
      std::ostringstream msg;
      msg << "track: point (" << x << ", " << y << ") is " << std::sqrt(d2)
          << " m from the path";
      throw OffTrackError(msg.str());
    }
  }
  return theta;
}

ContouringErrors Track::contouring_errors(double x, double y, double theta) const {
  const RefPose ref = ref_pose(theta);
  const double s = std::sin(ref.phi);
  const double c = std::cos(ref.phi);
  const double dx = x - ref.x;
  const double dy = y - ref.y;
  return {s * dx - c * dy, -c * dx - s * dy};
}

ContouringErrors contouring_errors(const Track& track, double x, double y, double theta) {
  return track.contouring_errors(x, y, theta);
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

double parse_number(const std::string& text, std::size_t row, const char* column) {
  const std::string t = trim(text);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (t.empty() || used != t.size() || !std::isfinite(v)) {
    throw TrackLoadError("track: row " + std::to_string(row) + ": bad value '" + t +
                         "' in column " + column);
  }
  return v;
}

}  // namespace

Track load_track(const std::string& path, double half_width) {
  std::ifstream in(path);
  if (!in) throw TrackLoadError("track: cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw TrackLoadError("track: empty file");
  std::vector<std::string> header = split_csv(line);
  for (auto& h : header) h = trim(h);
  const bool has_w = header.size() == 4 && header[3] == "w";
  if (header.size() < 3 || header[0] != "s" || header[1] != "x" || header[2] != "y" ||
      (header.size() == 4 && !has_w) || header.size() > 4) {
    throw TrackLoadError("track: row 1: header must be 's,x,y' or 's,x,y,w'");
  }

  std::vector<double> xs, ys, ws;
  double prev_s = -std::numeric_limits<double>::infinity();
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() < 3 || cells.size() > (has_w ? 4u : 3u)) {
      throw TrackLoadError("track: row " + std::to_string(row) + ": expected " +
                           (has_w ? "3 or 4" : "3") + " columns");
    }
    const double s = parse_number(cells[0], row, "s");
    if (xs.empty() && s < 0.0) {
      throw TrackLoadError("track: row " + std::to_string(row) + ": s must start at 0");
    }
    if (!(s > prev_s)) {
      throw TrackLoadError("track: row " + std::to_string(row) + ": s is not strictly increasing");
    }
    const double x = parse_number(cells[1], row, "x");
    const double y = parse_number(cells[2], row, "y");
    double w = half_width;
    if (cells.size() == 4 && !trim(cells[3]).empty()) w = parse_number(cells[3], row, "w");
    if (!xs.empty() && std::hypot(x - xs.back(), y - ys.back()) > kMaxSpacing) {
      throw TrackLoadError("track: row " + std::to_string(row) + ": spacing exceeds 2 m");
    }
    prev_s = s;
    xs.push_back(x);
    ys.push_back(y);
    ws.push_back(w);
  }
  if (xs.size() < kMinFilePoints) {
    throw TrackLoadError("track: row " + std::to_string(row) + ": need at least 10 points, got " +
                         std::to_string(xs.size()));
  }
  const double gap = std::hypot(xs.back() - xs.front(), ys.back() - ys.front());
  if (gap > kMaxClosingGap) {
    throw TrackLoadError("track: row " + std::to_string(row) + ": loop not closed (endpoint gap " +
                         std::to_string(gap) + " m)");
  }
  return Track::from_points(xs, ys, ws, kMinFilePoints);
}

}  // namespace racing
