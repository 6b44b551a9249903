#pragma once

#include "racing/mpcc.hpp"
#include "racing/track.hpp"
#include "racing/vehicle_model.hpp"

#include <map>
#include <vector>

namespace racing {

/// What the perception stack reports about one opponent.
struct OpponentObservation {
  int id = -1;
  Eigen::Vector2d position = Eigen::Vector2d::Zero();  // m
  double heading = 0.0;                                // rad
  double speed = 0.0;                                  // m/s
  double acceleration = 0.0;                           // m/s^2, longitudinal
  double timestamp = 0.0;                              // s
};

inline constexpr double kPredictionRange = 100.0;  // m

/// Observations within `range` of the ego, leader first. Leading is measured
/// by track progress relative to the ego, so the order survives the start
/// line. Observations that cannot be placed on the track are dropped.
std::vector<OpponentObservation> filter_in_range(const VehicleState& ego,
                                                 const std::vector<OpponentObservation>& observations,
                                                 const Track& track,
                                                 double range = kPredictionRange);

/// Constant acceleration, constant heading rollout on the horizon grid. The
/// speed never goes negative; once it reaches zero the car stays put.
PredictedTrajectory predict_ekf_baseline(const OpponentObservation& obs, int N, double dt,
                                         double sigma = 1.5);

/// Baseline prediction for every observation, with terminal progress filled
/// in from the track.
std::vector<PredictedTrajectory> predict_ekf(const std::vector<OpponentObservation>& observations,
                                             const Track& track, const MpccConfig& config);

/// Previous-cycle solutions per opponent id, used to warm start the games.
using PredictionMemory = std::map<int, MpccSolution>;

/// Leader-first chain of two-player games. Each opponent solves the contouring
/// problem with the ego's dynamics and weights, treating the trajectories of
/// every opponent already solved as obstacles. A failed solve falls back to
/// the baseline for that opponent and is flagged. Observations must already be
/// filtered and ordered.
std::vector<PredictedTrajectory> predict_stackelberg(
    const std::vector<OpponentObservation>& observations, const Track& track,
    const MpccConfig& config, const VehicleParams& params, PredictionMemory* memory = nullptr);

/// Opponent lifted to a full state: no lateral velocity or yaw rate.
VehicleState lift_observation(const OpponentObservation& obs);

}  // namespace racing
