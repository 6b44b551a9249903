#include "racing/game_predictor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace racing {

namespace {

constexpr double kNoGuess = std::numeric_limits<double>::quiet_NaN();

double travelled(double speed, double accel, double t) {
  if (accel < 0.0) t = std::min(t, -speed / accel);
  return speed * t + 0.5 * accel * t * t;
}

}  // namespace

VehicleState lift_observation(const OpponentObservation& obs) {
  return {obs.position.x(), obs.position.y(), obs.heading, obs.speed, 0.0, 0.0};
}

std::vector<OpponentObservation> filter_in_range(const VehicleState& ego,
                                                 const std::vector<OpponentObservation>& observations,
                                                 const Track& track, double range) {
  double ego_theta = 0.0;
  try {
    ego_theta = track.project(ego.X, ego.Y, kNoGuess);
  } catch (const OffTrackError&) {
    ego_theta = 0.0;
  }
  std::vector<std::pair<double, OpponentObservation>> kept;
  for (const auto& o : observations) {
    if (std::hypot(o.position.x() - ego.X, o.position.y() - ego.Y) > range) continue;
    try {
      const double theta = track.project(o.position.x(), o.position.y(), kNoGuess);
      kept.emplace_back(track.signed_distance(theta, ego_theta), o);
    } catch (const OffTrackError&) {
    }
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<OpponentObservation> out;
  out.reserve(kept.size());
  for (auto& k : kept) out.push_back(k.second);
  return out;
}

PredictedTrajectory predict_ekf_baseline(const OpponentObservation& obs, int N, double dt,
                                         double sigma) {
  PredictedTrajectory tr;
  tr.id = obs.id;
  tr.sigma = sigma;
  const Eigen::Vector2d dir(std::cos(obs.heading), std::sin(obs.heading));
  for (int k = 0; k <= N; ++k) {
    tr.positions.push_back(obs.position + travelled(obs.speed, obs.acceleration, k * dt) * dir);
  }
  return tr;
}

std::vector<PredictedTrajectory> predict_ekf(const std::vector<OpponentObservation>& observations,
                                             const Track& track, const MpccConfig& config) {
  std::vector<PredictedTrajectory> out;
  for (const auto& o : observations) {
    PredictedTrajectory tr = predict_ekf_baseline(o, config.N, config.dt, config.sigma);
    const double distance = travelled(o.speed, o.acceleration, config.horizon());
    try {
      const double start = track.project(o.position.x(), o.position.y(), kNoGuess);
      tr.progress = start + distance;
      const auto& end = tr.positions.back();
      const double wrapped = track.project(end.x(), end.y(), track.wrap(tr.progress));
      tr.progress = start + track.signed_distance(wrapped, start);
    } catch (const OffTrackError&) {
    }
    out.push_back(std::move(tr));
  }
  return out;
}

std::vector<PredictedTrajectory> predict_stackelberg(
    const std::vector<OpponentObservation>& observations, const Track& track,
    const MpccConfig& config, const VehicleParams& params, PredictionMemory* memory) {
  MpccConfig game = config;
  game.max_sqp_iters = std::max(1, config.max_sqp_iters / 2);
  PredictionMemory next;
  std::vector<PredictedTrajectory> out;
  ObstacleSet solved;
  for (const auto& o : observations) {
    const VehicleState x0 = lift_observation(o);
    PredictedTrajectory tr;
    try {
      const double theta0 = track.project(x0.X, x0.Y, kNoGuess);
      const MpccSolution* warm = nullptr;
      if (memory) {
        auto it = memory->find(o.id);
        if (it != memory->end()) warm = &it->second;
      }
      MpccSolution sol = solve(x0, theta0, track, solved, game, params, warm);
      tr.id = o.id;
      tr.sigma = config.sigma;
      tr.progress = sol.terminal_progress;
      for (const auto& s : sol.states) tr.positions.emplace_back(s.X, s.Y);
      next[o.id] = std::move(sol);
    } catch (const SolverFailure&) {
      tr = predict_ekf({o}, track, config).front();
      tr.fallback = true;
    } catch (const OffTrackError&) {
      tr = predict_ekf({o}, track, config).front();
      tr.fallback = true;
    } catch (const InvalidStateError&) {
      tr = predict_ekf({o}, track, config).front();
      tr.fallback = true;
    }
    solved.trajectories.push_back(tr);
    out.push_back(std::move(tr));
  }
  if (memory) *memory = std::move(next);
  return out;
}

}  // namespace racing
