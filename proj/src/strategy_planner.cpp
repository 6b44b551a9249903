#include "racing/strategy_planner.hpp"

#include <cmath>

namespace racing {

const char* to_string(ModeTag tag) {
  return tag == ModeTag::PositionKeeping ? "PositionKeeping" : "Overtaking";
}

void PlannerConfig::validate() const {
  if (!(threshold >= 0.0)) throw ConfigError("planner: threshold must be >= 0");
  if (!(range > 0.0)) throw ConfigError("planner: range must be > 0");
  if (!(keep_qc_scale >= 0.0) || !(overtake_gamma_scale >= 0.0)) {
    throw ConfigError("planner: weight scales must be >= 0");
  }
  if (hysteresis_cycles < 1) throw ConfigError("planner: hysteresis_cycles must be >= 1");
}

MpccConfig mode_config(ModeTag tag, const MpccConfig& base, const PlannerConfig& planner) {
  MpccConfig c = base;
  if (tag == ModeTag::PositionKeeping) {
    c.q_c *= planner.keep_qc_scale;
  } else {
    c.gamma *= planner.overtake_gamma_scale;
  }
  return c;
}

std::optional<double> progress_gap(double ego_theta0, double candidate_terminal,
                                   const std::vector<PredictedTrajectory>& predictions,
                                   const Track& track, double range) {
  const PredictedTrajectory* nearest = nullptr;
  double nearest_ahead = 0.0;
  for (const auto& p : predictions) {
    if (p.positions.empty()) continue;
    double ahead = 0.0;
    try {
      const auto& now = p.positions.front();
      ahead = track.signed_distance(track.project(now.x(), now.y(), ego_theta0), ego_theta0);
    } catch (const OffTrackError&) {
      continue;
    }
    if (ahead <= 0.0 || ahead > range) continue;
    if (!nearest || ahead < nearest_ahead) {
      nearest = &p;
      nearest_ahead = ahead;
    }
  }
  if (!nearest) return std::nullopt;
  return track.signed_distance(candidate_terminal, nearest->progress);
}

ModeTag select_mode(std::optional<double> gap, double threshold) {
  if (!gap) return ModeTag::Overtaking;
  return *gap > threshold ? ModeTag::Overtaking : ModeTag::PositionKeeping;
}

ModeTag ModeHysteresis::update(ModeTag requested) {
  if (requested == mode_) {
    pending_ = 0;
  } else if (++pending_ >= cycles_) {
    mode_ = requested;
    pending_ = 0;
  }
  return mode_;
}

PlannerDecision StrategyPlanner::plan(const VehicleState& x0, double theta0,
                                      const std::vector<PredictedTrajectory>& predictions,
                                      const Track& track, const MpccConfig& base,
                                      const VehicleParams& params, const MpccSolution* warm) {
  ObstacleSet obstacles{predictions};
  PlannerDecision d;
  std::optional<MpccSolution> candidate;
  std::string failure;
  try {
    candidate = solve(x0, theta0, track, obstacles,
                      mode_config(ModeTag::Overtaking, base, config_), params, warm);
  } catch (const SolverFailure& e) {
    failure = e.what();
  }

  if (candidate) {
    d.progress_gap = progress_gap(theta0, candidate->terminal_progress, predictions, track, config_.range);
    d.requested = select_mode(d.progress_gap, config_.threshold);
  } else {
    d.requested = ModeTag::PositionKeeping;
  }
  d.mode = hysteresis_.update(d.requested);

  if (d.mode == ModeTag::Overtaking && candidate) {
    d.solution = std::move(*candidate);
    return d;
  }
  try {
    d.solution = solve(x0, theta0, track, obstacles,
                       mode_config(ModeTag::PositionKeeping, base, config_), params, warm);
    d.mode = ModeTag::PositionKeeping;
    d.degraded = !candidate;
  } catch (const SolverFailure& e) {
    if (!candidate) throw PlannerFailure(failure + "; " + e.what());
    d.solution = std::move(*candidate);
    d.mode = ModeTag::Overtaking;
    d.degraded = true;
  }
  return d;
}

}  // namespace racing
