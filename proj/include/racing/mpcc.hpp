#pragma once

#include "racing/track.hpp"
#include "racing/vehicle_model.hpp"

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace racing {

struct MpccConfig {
  int N = 20;
  double dt = 0.05;  // s
  double q_c = 1.0;     // 1/m^2
  double q_l = 100.0;   // 1/m^2
  double gamma = 1.0;   // s/m
  Eigen::Matrix2d R_u = Eigen::Vector2d(1.0, 0.01).asDiagonal();
  Eigen::Matrix2d R_du = Eigen::Vector2d(1000.0, 1.0).asDiagonal();
  ControlInput u_min{-0.2, -1.0};
  ControlInput u_max{0.2, 1.0};
  ControlInput du_min{-0.01, -0.25};  // per step
  ControlInput du_max{0.01, 0.25};
  double sigma = 1.5;  // m
  std::vector<double> p_schedule = linear_p_schedule(20);
  double slack_weight = 1000.0;
  int max_sqp_iters = 12;
  double convergence_tol = 1e-3;
  // Weight on changes of the virtual progress speed between stages; keeps
  // the condensed Hessian well conditioned when q_l alone couples v_theta.
  double r_dvtheta = 0.01;
  // Soft limit on the rear slip angle, rad. Beyond it the planner could use
  // a spin as a brake.
  double max_rear_slip = 0.1;
  // Runtime choice, not part of the serialized config.
  bool parallel_linearization = true;

  /// Throws ConfigError naming the first violated invariant.
  void validate() const;
  double horizon() const { return N * dt; }

  /// p_0 at the first stage decaying linearly to p_N at the last.
  static std::vector<double> linear_p_schedule(int N, double p0 = 3.0, double pN = 1.0);
};

MpccConfig mpcc_config_from_json_text(const std::string& text);
std::string mpcc_config_to_json_text(const MpccConfig& config);

/// Opponent positions on the ego horizon grid (N+1 samples).
struct PredictedTrajectory {
  int id = -1;
  std::vector<Eigen::Vector2d> positions;
  double progress = 0.0;  // terminal theta, m
  double sigma = 1.5;     // m
  bool fallback = false;  // produced by the baseline after a solver failure
};

struct ObstacleSet {
  std::vector<PredictedTrajectory> trajectories;
};

enum class SolverStatus { Converged, MaxIters, SlackActive };

const char* to_string(SolverStatus status);

struct MpccSolution {
  std::vector<VehicleState> states;  // N+1
  std::vector<ControlInput> inputs;  // N
  std::vector<double> thetas;        // N+1, unwrapped from theta0
  std::vector<double> v_thetas;      // N
  double cost = 0.0;
  double terminal_progress = 0.0;
  SolverStatus status = SolverStatus::MaxIters;
  double max_slack = 0.0;  // m
  bool converged = false;
  int iterations = 0;
};

/// Raised when the QP cannot be solved; carries the last accepted iterate.
class SolverFailure : public std::runtime_error {
 public:
  SolverFailure(const std::string& what, MpccSolution last)
      : std::runtime_error(what), last_iterate(std::move(last)) {}
  MpccSolution last_iterate;
};

double stage_cost(double e_c, double e_l, double v_theta, const ControlInput& u,
                  const ControlInput& du, const MpccConfig& config);

double collision_margin(const Eigen::Vector2d& ego, const Eigen::Vector2d& opp, int k,
                        const MpccConfig& config);

/// Obstacles whose every sample lies beyond this distance of the initial
/// position cannot be reached within the horizon and are ignored.
double obstacle_reach(const MpccConfig& config, const VehicleParams& params);

/// Solves the contouring problem by sequential quadratic programming.
/// `warm_start` is the previous cycle's solution; it is shifted by one
/// stage and its first input becomes the rate reference for stage 0.
MpccSolution solve(const VehicleState& x0, double theta0, const Track& track,
                   const ObstacleSet& obstacles, const MpccConfig& config,
                   const VehicleParams& params,
                   const MpccSolution* warm_start = nullptr);

/// Nonlinear objective (cost plus slack penalty) of an input sequence, using
/// the same rollout and drafting contexts as `solve` for this warm start.
double mpcc_objective(const VehicleState& x0, double theta0, const Track& track,
                      const ObstacleSet& obstacles, const MpccConfig& config,
                      const VehicleParams& params,
                      const std::vector<ControlInput>& inputs,
                      const std::vector<double>& v_thetas,
                      const MpccSolution* warm_start = nullptr);

/// Initial iterate used by `solve`: the shifted warm start, or a
/// constant-speed rollout along the reference, clipped to the bounds.
void initial_guess(const VehicleState& x0, double theta0, const Track& track,
                   const MpccConfig& config, const VehicleParams& params,
                   const MpccSolution* warm_start, std::vector<ControlInput>& inputs,
                   std::vector<double>& v_thetas);

}  // namespace racing
