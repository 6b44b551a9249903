#pragma once

#include "racing/game_predictor.hpp"
#include "racing/mpcc.hpp"
#include "racing/strategy_planner.hpp"
#include "racing/track.hpp"
#include "racing/vehicle_model.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace racing {

enum class Role { Ego, Opponent };
enum class ControllerKind { FullStack, PlainMpcc, ConstantAccel };
enum class PredictorKind { Stackelberg, Ekf };

struct VehicleSpec {
  Role role = Role::Opponent;
  double start_progress = 0.0;  // m
  double start_speed = 0.0;     // m/s
  ControllerKind controller = ControllerKind::PlainMpcc;
  std::string params_file;
  double lateral_offset = 0.0;  // m, positive left of the centerline
  double accel = 0.0;           // m/s^2, constant-accel controller only
  std::optional<double> speed_limit;  // m/s, caps v_max of this car
  ModeTag mode = ModeTag::PositionKeeping;  // weights of a plain-mpcc car
};

struct Scenario {
  std::string track_file;
  double half_width = 7.5;  // m, for rows without a width column
  std::vector<VehicleSpec> vehicles;
  PredictorKind predictor = PredictorKind::Stackelberg;
  bool planner = true;
  double noise_position = 0.0;  // m
  double noise_speed = 0.0;     // m/s
  std::optional<double> duration;  // s
  std::optional<int> laps;         // ego laps
  double control_period = 0.05;    // s
  double physics_dt = 0.01;        // s
  std::uint64_t seed = 0;
  MpccConfig mpcc;
  PlannerConfig planner_config;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  int ego_index() const;
};

/// Relative file names are resolved against `base_dir`.
Scenario scenario_from_json_text(const std::string& text, const std::string& base_dir = ".");
Scenario load_scenario(const std::string& path);
std::string scenario_to_json_text(const Scenario& scenario);

struct CollisionPair {
  int a = -1;
  int b = -1;
};

/// First pair (in index order) whose centers are closer than the sum of
/// their footprint radii.
std::optional<CollisionPair> detect_collision(const std::vector<VehicleState>& states,
                                              const std::vector<double>& radii);

struct VehicleRuntime {
  VehicleState state;
  VehicleParams params;
  double theta = 0.0;     // wrapped progress, m
  double distance = 0.0;  // unwrapped progress, starts at the start progress, m
  int laps = 0;
  double lap_start = 0.0;  // s
  ControlInput input;
  std::string mode = "-";
  std::string status = "-";
  std::optional<MpccSolution> plan;
};

struct WorldState {
  double time = 0.0;
  std::vector<VehicleRuntime> vehicles;
  std::mt19937_64 perception_rng;
  std::map<int, double> last_observed_speed;  // per opponent, for the acceleration estimate
};

/// Noisy observations of every vehicle other than `ego`. Acceleration is the
/// finite difference of consecutive noisy speeds over `period`; zero on the
/// first sighting.
std::vector<OpponentObservation> sense(WorldState& world, int ego, double position_std,
                                       double speed_std, double period);

struct TickRecord {
  double t = 0.0;
  int vehicle = 0;
  VehicleState state;
  double theta = 0.0;
  std::string mode;
  std::string status;
  double min_dist = 0.0;
  ControlInput input;
};

struct CollisionEvent {
  double t = 0.0;
  int a = 0;
  int b = 0;
};

struct OvertakeEvent {
  double t = 0.0;  // when the order inverted
  int overtaker = 0;
  int overtaken = 0;
};

struct LapEvent {
  double t = 0.0;
  int vehicle = 0;
  int lap = 0;
  double lap_time = 0.0;
};

struct FailureEvent {
  double t = 0.0;
  int vehicle = 0;
  std::string what;
};

struct RaceLog {
  std::vector<TickRecord> ticks;
  std::vector<CollisionEvent> collisions;
  std::vector<OvertakeEvent> overtakes;
  std::vector<LapEvent> laps;
  std::vector<FailureEvent> failures;
  bool dnf = false;
  double end_time = 0.0;
  std::string scenario_json;  // echoed verbatim, weights included

  /// Lap times of `vehicle` in order.
  std::vector<double> lap_times(int vehicle) const;
  int overtakes_by(int vehicle) const;
};

class Simulator {
 public:
  explicit Simulator(Scenario scenario);

  /// Advances one control period: controllers, then physics substeps.
  /// Returns false once the run has ended.
  bool step();
  RaceLog run();

  const WorldState& world() const { return world_; }
  const RaceLog& log() const { return log_; }
  const Track& track() const { return track_; }
  bool finished() const { return finished_; }

 private:
  void control();
  void control_ego(int i);
  void control_plain(int i, const std::vector<int>& order);
  void control_constant_accel(int i);
  void physics_step();
  void record_tick();
  void update_overtakes();
  bool done() const;

  Scenario scenario_;
  Track track_;
  WorldState world_;
  RaceLog log_;
  int ego_ = 0;
  long steps_per_control_ = 5;
  long tick_ = 0;
  bool finished_ = false;
  StrategyPlanner planner_;
  PredictionMemory prediction_memory_;
  // pair (i < j) -> order bookkeeping for overtakes
  struct PairOrder {
    int confirmed = 0;  // +1 when i leads, -1 when j leads
    int current = 0;
    double since = 0.0;
  };
  std::map<std::pair<int, int>, PairOrder> orders_;
  std::map<std::pair<int, int>, bool> touching_;
};

RaceLog run_scenario(const Scenario& scenario);

void write_tick_csv(const RaceLog& log, const std::string& path);
void write_events_json(const RaceLog& log, const std::string& path);
std::string tick_csv_text(const RaceLog& log);
std::string events_json_text(const RaceLog& log);
/// Reads a tick CSV written by `write_tick_csv`. Throws ConfigError on a
/// malformed header or row.
std::vector<TickRecord> read_tick_csv(const std::string& path);

const char* to_string(ControllerKind kind);
const char* to_string(PredictorKind kind);

}  // namespace racing
