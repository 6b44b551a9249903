#pragma once

#include "racing/mpcc.hpp"

#include <optional>
#include <string>
#include <vector>

namespace racing {

enum class ModeTag { PositionKeeping, Overtaking };

const char* to_string(ModeTag tag);

struct PlannerConfig {
  double threshold = 3.0;          // m
  double range = 100.0;            // m, opponents farther ahead are ignored
  double keep_qc_scale = 10.0;     // PositionKeeping multiplies q_c
  double overtake_gamma_scale = 5.0;  // Overtaking multiplies gamma
  int hysteresis_cycles = 2;       // consecutive cycles before a switch

  void validate() const;
};

/// Weight overrides of a mode applied to the base configuration.
MpccConfig mode_config(ModeTag tag, const MpccConfig& base, const PlannerConfig& planner);

/// Progress gap of the candidate to the nearest opponent ahead of the ego, or
/// nothing when no predicted opponent is ahead within range.
std::optional<double> progress_gap(double ego_theta0, double candidate_terminal,
                                   const std::vector<PredictedTrajectory>& predictions,
                                   const Track& track, double range);

/// Raw mode choice without switching dynamics.
ModeTag select_mode(std::optional<double> gap, double threshold);

/// Debounces mode changes: a new mode is adopted only after it has been
/// requested for `cycles` consecutive calls.
class ModeHysteresis {
 public:
  explicit ModeHysteresis(int cycles = 2, ModeTag initial = ModeTag::Overtaking)
      : cycles_(cycles), mode_(initial) {}
  ModeTag update(ModeTag requested);
  ModeTag mode() const { return mode_; }

 private:
  int cycles_;
  ModeTag mode_;
  int pending_ = 0;
};

struct PlannerDecision {
  ModeTag mode = ModeTag::Overtaking;
  ModeTag requested = ModeTag::Overtaking;  // before hysteresis
  MpccSolution solution;
  std::optional<double> progress_gap;  // m
  bool degraded = false;  // one of the two solves failed
};

class PlannerFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Selects PositionKeeping or Overtaking each control cycle. One instance per
/// ego vehicle; holds the hysteresis state.
class StrategyPlanner {
 public:
  explicit StrategyPlanner(PlannerConfig config = {}) : config_(config), hysteresis_(config.hysteresis_cycles) {
    config_.validate();
  }

  PlannerDecision plan(const VehicleState& x0, double theta0,
                       const std::vector<PredictedTrajectory>& predictions, const Track& track,
                       const MpccConfig& base, const VehicleParams& params,
                       const MpccSolution* warm = nullptr);

  ModeTag mode() const { return hysteresis_.mode(); }
  const PlannerConfig& config() const { return config_; }

 private:
  PlannerConfig config_;
  ModeHysteresis hysteresis_;
};

}  // namespace racing
