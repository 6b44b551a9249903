#include "racing/vehicle_model.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <utility>

namespace racing {

StateVector VehicleState::to_vector() const {
  StateVector v;
  v << X, Y, psi, vx, vy, r;
  return v;
}

VehicleState VehicleState::from_vector(const StateVector& v) {
  return {v(0), v(1), v(2), v(3), v(4), v(5)};
}

bool VehicleState::finite() const {
  return std::isfinite(X) && std::isfinite(Y) && std::isfinite(psi) &&
         std::isfinite(vx) && std::isfinite(vy) && std::isfinite(r);
}

double VehicleState::speed() const { return std::hypot(vx, vy); }

void VehicleParams::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("vehicle params: ") + what);
  };
  require(m > 0.0, "m must be > 0");
  require(I_z > 0.0, "I_z must be > 0");
  require(l_F > 0.0, "l_F must be > 0");
  require(l_R > 0.0, "l_R must be > 0");
  require(D_F > 0.0, "D_F must be > 0");
  require(D_R > 0.0, "D_R must be > 0");
  require(C_m > 0.0, "C_m must be > 0");
  require(C_r >= 0.0, "C_r must be >= 0");
  require(C_d >= 0.0, "C_d must be >= 0");
  require(v_max > kMinSlipSpeed && v_max <= kSeriesSpeedCap,
          "v_max must lie in (0.5, 83.3] m/s");
  require(footprint_radius > 0.0, "footprint_radius must be > 0");
  require(draft.k_draft >= 0.0 && draft.k_draft < 1.0,
          "k_draft must lie in [0, 1)");
  require(draft.L_draft > 0.0, "L_draft must be > 0");
  require(draft.w_draft > 0.0, "w_draft must be > 0");
}

double pacejka_lateral(double alpha, double B, double C, double D) {
  return D * std::sin(C * std::atan(B * alpha));
}

TireForces tire_forces(const VehicleState& state, const ControlInput& input,
                       const VehicleParams& p, double cd_eff) {
  if (!state.finite() || !std::isfinite(input.delta) ||
      !std::isfinite(input.D) || !std::isfinite(cd_eff)) {
    throw InvalidStateError("tire_forces: non-finite state or input");
  }
  const double vx = std::max(state.vx, kMinSlipSpeed);
  if (!(vx > 0.0)) throw InvalidStateError("tire_forces: v_x <= 0");

  TireForces f;
  f.alpha_F = std::atan((state.vy + p.l_F * state.r) / vx) - input.delta;
  f.alpha_R = std::atan((state.vy - p.l_R * state.r) / vx);
  f.F_Fy = pacejka_lateral(f.alpha_F, p.B_F, p.C_F, p.D_F);
  f.F_Ry = pacejka_lateral(f.alpha_R, p.B_R, p.C_R, p.D_R);
  f.F_Rx = p.C_m * input.D - p.C_r - cd_eff * state.vx * state.vx;
  return f;
}

DraftContext draft_context(const VehicleState& ego,
                           std::span<const VehicleState> others,
                           const DraftParams& draft) {
  DraftContext ctx;
  const double c = std::cos(ego.psi);
  const double s = std::sin(ego.psi);
  for (const auto& o : others) {
    const double dx = o.X - ego.X;
    const double dy = o.Y - ego.Y;
    const double lon = dx * c + dy * s;
    const double lat = -dx * s + dy * c;
    if (lon <= 0.0 || lon > draft.range) continue;
    if (lon < ctx.leader_gap) {
      ctx.leader_gap = lon;
      ctx.lateral_offset = lat;
    }
  }
  return ctx;
}

double effective_drag(const DraftContext& draft, const VehicleParams& p) {
  const auto& d = p.draft;
  if (!(draft.leader_gap <= d.range)) return p.C_d;
  const double gap = std::max(draft.leader_gap, 0.0);
  const double lateral = std::max(0.0, 1.0 - std::abs(draft.lateral_offset) / d.w_draft);
  return p.C_d * (1.0 - d.k_draft * std::exp(-gap / d.L_draft) * lateral);
}

double effective_drag(const VehicleState& ego,
                      std::span<const VehicleState> leaders,
                      const VehicleParams& params) {
  return effective_drag(draft_context(ego, leaders, params.draft), params);
}

StateVector dynamics(const VehicleState& s, const ControlInput& u,
                     const VehicleParams& p, const DraftContext& draft) {
  const TireForces f = tire_forces(s, u, p, effective_drag(draft, p));
  // With the slip angles defined as in tire_forces, the force on the body
  // opposes the slip. Taken literally the lateral dynamics are unstable.
  const double F_Fy = -f.F_Fy;
  const double F_Ry = -f.F_Ry;
  const double sd = std::sin(u.delta);
  const double cd = std::cos(u.delta);
  const double cp = std::cos(s.psi);
  const double sp = std::sin(s.psi);

  StateVector dx;
  dx(0) = s.vx * cp - s.vy * sp;
  dx(1) = s.vx * sp + s.vy * cp;
  dx(2) = s.r;
  dx(3) = (f.F_Rx - F_Fy * sd + p.m * s.vy * s.r) / p.m;
  dx(4) = (F_Ry + F_Fy * cd - p.m * s.vx * s.r) / p.m;
  dx(5) = (F_Fy * p.l_F * cd - F_Ry * p.l_R) / p.I_z;
  return dx;
}

VehicleState integrate(const VehicleState& state, const ControlInput& input,
                       const VehicleParams& params, const DraftContext& draft,
                       double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("integrate: dt must be > 0");
  const StateVector x = state.to_vector();
  auto f = [&](const StateVector& v) {
    return dynamics(VehicleState::from_vector(v), input, params, draft);
  };
  const StateVector k1 = f(x);
  const StateVector k2 = f(x + 0.5 * dt * k1);
  const StateVector k3 = f(x + 0.5 * dt * k2);
  const StateVector k4 = f(x + dt * k3);
  StateVector next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!next.allFinite()) throw IntegrationDiverged("integrate: non-finite state");
  next(3) = std::clamp(next(3), kMinSlipSpeed, params.v_max);
  return VehicleState::from_vector(next);
}

namespace {

double fd_step(double value) { return 1e-6 * std::max(1.0, std::abs(value)); }

}  // namespace

LinearModel linearize(const VehicleState& state, const ControlInput& input,
                      const VehicleParams& params, const DraftContext& draft,
                      double dt) {
  LinearModel lm;
  const StateVector x0 = state.to_vector();
  const InputVector u0 = input.to_vector();
  auto step = [&](const StateVector& x, const InputVector& u) {
    return integrate(VehicleState::from_vector(x), ControlInput::from_vector(u),
                     params, draft, dt)
        .to_vector();
  };
  for (int j = 0; j < 6; ++j) {
    const double h = fd_step(x0(j));
    StateVector xp = x0, xm = x0;
    xp(j) += h;
    xm(j) -= h;
    lm.A.col(j) = (step(xp, u0) - step(xm, u0)) / (2.0 * h);
  }
  for (int j = 0; j < 2; ++j) {
    const double h = fd_step(u0(j));
    InputVector up = u0, um = u0;
    up(j) += h;
    um(j) -= h;
    lm.B.col(j) = (step(x0, up) - step(x0, um)) / (2.0 * h);
  }
  lm.c = step(x0, u0) - lm.A * x0 - lm.B * u0;
  return lm;
}

namespace {

using nlohmann::json;

constexpr std::array<std::pair<const char*, double VehicleParams::*>, 15> kFields{{
    {"m", &VehicleParams::m},
    {"I_z", &VehicleParams::I_z},
    {"l_F", &VehicleParams::l_F},
    {"l_R", &VehicleParams::l_R},
    {"B_F", &VehicleParams::B_F},
    {"C_F", &VehicleParams::C_F},
    {"D_F", &VehicleParams::D_F},
    {"B_R", &VehicleParams::B_R},
    {"C_R", &VehicleParams::C_R},
    {"D_R", &VehicleParams::D_R},
    {"C_m", &VehicleParams::C_m},
    {"C_r", &VehicleParams::C_r},
    {"C_d", &VehicleParams::C_d},
    {"v_max", &VehicleParams::v_max},
    {"footprint_radius", &VehicleParams::footprint_radius},
}};

constexpr std::array<std::pair<const char*, double DraftParams::*>, 3> kDraftFields{{
    {"k_draft", &DraftParams::k_draft},
    {"L_draft", &DraftParams::L_draft},
    {"w_draft", &DraftParams::w_draft},
}};

double number_field(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) throw ConfigError(std::string("vehicle params: missing field '") + name + "'");
  if (!it->is_number()) throw ConfigError(std::string("vehicle params: field '") + name + "' is not a number");
  return it->get<double>();
}

}  // namespace

VehicleParams vehicle_params_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("vehicle params: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("vehicle params: expected a JSON object");

  VehicleParams p;
  for (const auto& [name, member] : kFields) p.*member = number_field(j, name);
  for (const auto& [name, member] : kDraftFields) p.draft.*member = number_field(j, name);

  for (const auto& item : j.items()) {
    const auto& key = item.key();
    bool known = std::any_of(kFields.begin(), kFields.end(),
                             [&](const auto& f) { return key == f.first; }) ||
                 std::any_of(kDraftFields.begin(), kDraftFields.end(),
                             [&](const auto& f) { return key == f.first; });
    if (!known) throw ConfigError("vehicle params: unknown field '" + key + "'");
  }
  p.validate();
  return p;
}

VehicleParams load_vehicle_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("vehicle params: cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return vehicle_params_from_json_text(buf.str());
}

std::string vehicle_params_to_json_text(const VehicleParams& p) {
  json j = json::object();
  for (const auto& [name, member] : kFields) j[name] = p.*member;
  for (const auto& [name, member] : kDraftFields) j[name] = p.draft.*member;
  return j.dump(2);
}

}  // namespace racing
