#pragma once

#include <Eigen/Dense>

#include <limits>
#include <span>
#include <stdexcept>
#include <string>

namespace racing {

/// Raised when a state or input cannot be evaluated (non-finite, or v_x <= 0
/// after the low-speed guard).
class InvalidStateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an integration step produces a non-finite state.
class IntegrationDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for malformed or incomplete configuration files.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using StateVector = Eigen::Matrix<double, 6, 1>;
using InputVector = Eigen::Matrix<double, 2, 1>;

/// Planar rigid-body state in the global frame.
struct VehicleState {
  double X = 0.0;    // m
  double Y = 0.0;    // m
  double psi = 0.0;  // rad
  double vx = 0.0;   // m/s, body frame
  double vy = 0.0;   // m/s, body frame
  double r = 0.0;    // rad/s

  StateVector to_vector() const;
  static VehicleState from_vector(const StateVector& v);
  bool finite() const;
  double speed() const;
};

/// Steering angle and combined throttle/brake command (negative D brakes).
struct ControlInput {
  double delta = 0.0;  // rad
  double D = 0.0;      // [-1, 1]

  InputVector to_vector() const { return {delta, D}; }
  static ControlInput from_vector(const InputVector& v) { return {v(0), v(1)}; }
};

/// Parametric wake model used to reduce drag behind a leading car.
struct DraftParams {
  double k_draft = 0.5;   // peak fractional drag reduction
  double L_draft = 20.0;  // m, decay length along the wake
  double w_draft = 3.0;   // m, lateral half-width of the wake
  double range = 60.0;    // m, leaders beyond this gap are ignored
};

struct VehicleParams {
  double m = 0.0;
  double I_z = 0.0;
  double l_F = 0.0;
  double l_R = 0.0;
  double B_F = 0.0, C_F = 0.0, D_F = 0.0;
  double B_R = 0.0, C_R = 0.0, D_R = 0.0;
  double C_m = 0.0;
  double C_r = 0.0;
  double C_d = 0.0;
  double v_max = 0.0;
  double footprint_radius = 0.0;
  DraftParams draft;

  /// Throws ConfigError naming the first violated invariant.
  void validate() const;
};

/// Speed cap implied by the 300 km/h series limit.
inline constexpr double kSeriesSpeedCap = 83.3;
/// Low-speed guard applied to v_x before evaluating slip angles.
inline constexpr double kMinSlipSpeed = 0.5;

struct TireForces {
  double F_Fy = 0.0;
  double F_Ry = 0.0;
  double F_Rx = 0.0;
  double alpha_F = 0.0;
  double alpha_R = 0.0;
};

/// Wake geometry relative to the nearest car ahead.
struct DraftContext {
  double leader_gap = std::numeric_limits<double>::infinity();  // m
  double lateral_offset = 0.0;                                  // m

  static DraftContext none() { return {}; }
};

/// Simplified Pacejka lateral forces and the rear longitudinal drive force.
/// `cd_eff` replaces params.C_d so that drafting can lower drag.
TireForces tire_forces(const VehicleState& state, const ControlInput& input,
                       const VehicleParams& params, double cd_eff);

/// Lateral force of one axle for a given slip angle.
double pacejka_lateral(double alpha, double B, double C, double D);

/// Body-frame gap/offset of the nearest car ahead of `ego` among `others`.
DraftContext draft_context(const VehicleState& ego,
                           std::span<const VehicleState> others,
                           const DraftParams& draft);

/// Drag coefficient after applying the wake reduction for `draft`.
double effective_drag(const DraftContext& draft, const VehicleParams& params);
double effective_drag(const VehicleState& ego,
                      std::span<const VehicleState> leaders,
                      const VehicleParams& params);

/// Continuous-time dynamic bicycle model. Returns d/dt of the state vector.
/// Lateral tire forces act on the body against the slip, so positive
/// steering turns left.
StateVector dynamics(const VehicleState& state, const ControlInput& input,
                     const VehicleParams& params, const DraftContext& draft);

/// One classical RK4 step with the input held; v_x is clamped to
/// [kMinSlipSpeed, v_max] afterwards.
VehicleState integrate(const VehicleState& state, const ControlInput& input,
                       const VehicleParams& params, const DraftContext& draft,
                       double dt);

/// Discrete affine model x+ ~= A x + B u + c around (state, input).
struct LinearModel {
  Eigen::Matrix<double, 6, 6> A;
  Eigen::Matrix<double, 6, 2> B;
  StateVector c;
};

/// Central finite differences of `integrate`.
LinearModel linearize(const VehicleState& state, const ControlInput& input,
                      const VehicleParams& params, const DraftContext& draft,
                      double dt);

/// Reads all VehicleParams fields by name; any missing field is an error.
VehicleParams load_vehicle_params(const std::string& path);
VehicleParams vehicle_params_from_json_text(const std::string& text);
std::string vehicle_params_to_json_text(const VehicleParams& params);

}  // namespace racing
