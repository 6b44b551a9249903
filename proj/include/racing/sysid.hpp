#pragma once

#include "racing/horizon.hpp"
#include "racing/vehicle_model.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace racing {

/// Names of the parameters identification may touch.
const std::vector<std::string>& identifiable_parameters();

struct ParamRange {
  std::string name;
  double lower = 0.0;
  double upper = 0.0;
  double mutation_std = 0.0;
};

struct ParamSpace {
  std::vector<ParamRange> ranges;

  /// Throws ConfigError for unknown names, duplicates, lower > upper or a
  /// negative mutation std. A zero-width range pins the parameter.
  void validate() const;
};

ParamSpace param_space_from_json_text(const std::string& text);
ParamSpace load_param_space(const std::string& path);

struct Configuration {
  std::map<std::string, double> values;
  std::optional<double> loss;
};

/// `base` with the configuration's values substituted.
VehicleParams apply_configuration(const Configuration& config, const VehicleParams& base);

std::string configuration_to_json_text(const Configuration& config);

struct Episode {
  double dt = 0.0;  // s
  std::vector<VehicleState> states;
  std::vector<ControlInput> inputs;  // inputs[i] is held from states[i] to states[i+1]
};

struct Dataset {
  std::vector<Episode> episodes;
};

/// Reads a simulator tick log; each vehicle (or only `vehicle` when given)
/// becomes one episode. Requires the delta and D columns and a uniform step.
Dataset load_dataset_from_log(const std::string& path, std::optional<int> vehicle = std::nullopt);

struct LossOptions {
  int horizon = 10;  // rollout steps per window
  double w_position = 1.0;  // 1/m^2
  double w_vx = 1.0;        // 1/(m/s)^2
  double w_vy = 1.0;        // 1/(m/s)^2
  double w_yaw_rate = 1.0;  // 1/(rad/s)^2
  Execution execution = Execution::Serial;
};

inline constexpr double kDivergedLoss = 1e9;

/// Mean over all windows of the weighted RMS error of an open-loop rollout
/// that replays the logged inputs from the window start. Throws
/// std::invalid_argument for a dataset without any complete window.
double evaluation_loss(const Configuration& config, const Dataset& dataset,
                       const VehicleParams& base, const LossOptions& options = {});

/// Every parameter ~ Normal(midpoint, (range/4)^2), clamped to its bounds.
std::vector<Configuration> get_hyperparameter_configuration(int n, const ParamSpace& space,
                                                            std::mt19937_64& rng);

/// Greedy Gaussian hill climb of `rounds` proposals. The returned
/// configuration carries its loss.
Configuration mutate_then_return_eval_loss(const Configuration& start, int rounds,
                                           const Dataset& dataset, const ParamSpace& space,
                                           const VehicleParams& base, std::mt19937_64& rng,
                                           const LossOptions& options = {});

/// The k configurations of smallest loss; equal losses keep their order.
std::vector<Configuration> select_top_k_configuration(const std::vector<Configuration>& configs,
                                                      const std::vector<double>& losses,
                                                      std::size_t k);

struct RungPlan {
  int n = 0;       // n_i
  int rounds = 0;  // r_i
};

struct BracketPlan {
  int s = 0;
  int n = 0;
  double r = 0.0;
  std::vector<RungPlan> rungs;
};

struct HyperbandSchedule {
  int s_max = 0;
  double budget = 0.0;  // B
  std::vector<BracketPlan> brackets;
};

HyperbandSchedule hyperband_schedule(int R, int eta);

struct TraceEntry {
  int bracket = 0;
  int rung = 0;
  int index = 0;
  double loss = 0.0;
  double best = 0.0;  // best loss seen so far, in schedule order
};

struct HyperbandResult {
  Configuration best;
  std::vector<TraceEntry> trace;
  long rounds_used = 0;
  std::vector<long> rounds_per_bracket;
};

struct HyperbandOptions {
  LossOptions loss;
  Execution execution = Execution::Parallel;  // across configurations of a rung
};

/// Configurations of one rung are evaluated independently, each with its
/// own generator seeded from (seed, bracket, rung, index), so the result does
/// not depend on the execution mode or thread count.
HyperbandResult hyperband(int R, int eta, const ParamSpace& space, const Dataset& dataset,
                          const VehicleParams& base, std::uint64_t seed,
                          const HyperbandOptions& options = {});

std::mt19937_64 sub_generator(std::uint64_t seed, int bracket, int rung, int index);

}  // namespace racing
