#include "racing/sim.hpp"

#include "config_json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

namespace racing {

namespace {

using detail::json;

constexpr double kTimeEps = 1e-9;
constexpr const char* kTickHeader = "t,vehicle,X,Y,psi,vx,vy,r,theta,mode,status,min_dist,delta,D";
constexpr double kLaneGain = 0.02;     // rad/m
constexpr double kHeadingGain = 0.5;   // rad/rad

std::string resolve(const std::string& base_dir, const std::string& file) {
  if (file.empty()) return file;
  std::filesystem::path p(file);
  if (p.is_absolute()) return file;
  return (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

template <class T>
T field(const json& j, const char* name, const std::string& where) {
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + name + ": missing or wrong type");
  }
}

template <class T>
T optional_field(const json& j, const char* name, T fallback, const std::string& where) {
  if (!j.contains(name)) return fallback;
  return field<T>(j, name, where);
}

Role parse_role(const std::string& s, const std::string& where) {
  if (s == "ego") return Role::Ego;
  if (s == "opponent") return Role::Opponent;
  throw ConfigError(where + ".role: expected ego or opponent, got '" + s + "'");
}

ControllerKind parse_controller(const std::string& s, const std::string& where) {
  if (s == "full-stack") return ControllerKind::FullStack;
  if (s == "plain-mpcc") return ControllerKind::PlainMpcc;
  if (s == "constant-accel") return ControllerKind::ConstantAccel;
  throw ConfigError(where + ".controller: expected full-stack, plain-mpcc or constant-accel, got '" + s + "'");
}

ModeTag parse_mode(const std::string& s, const std::string& where) {
  if (s == "PositionKeeping") return ModeTag::PositionKeeping;
  if (s == "Overtaking") return ModeTag::Overtaking;
  throw ConfigError(where + ".mode: expected PositionKeeping or Overtaking, got '" + s + "'");
}

PredictorKind parse_predictor(const std::string& s) {
  if (s == "stackelberg") return PredictorKind::Stackelberg;
  if (s == "ekf") return PredictorKind::Ekf;
  throw ConfigError("scenario.predictor: expected stackelberg or ekf, got '" + s + "'");
}

bool parse_switch(const json& j, const char* name) {
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "on") return true;
    if (s == "off") return false;
  }
  throw ConfigError(std::string("scenario.") + name + ": expected on or off");
}

PlannerConfig planner_config_from_json(const json& j) {
  detail::reject_unknown(j, {"threshold", "range", "keep_qc_scale", "overtake_gamma_scale", "hysteresis_cycles"},
                         "scenario.planner_config");
  PlannerConfig c;
  const std::string w = "scenario.planner_config";
  c.threshold = optional_field(j, "threshold", c.threshold, w);
  c.range = optional_field(j, "range", c.range, w);
  c.keep_qc_scale = optional_field(j, "keep_qc_scale", c.keep_qc_scale, w);
  c.overtake_gamma_scale = optional_field(j, "overtake_gamma_scale", c.overtake_gamma_scale, w);
  c.hysteresis_cycles = optional_field(j, "hysteresis_cycles", c.hysteresis_cycles, w);
  c.validate();
  return c;
}

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_time(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

PredictedTrajectory trajectory_of(const MpccSolution& plan, int id, double sigma) {
  PredictedTrajectory tr;
  tr.id = id;
  tr.sigma = sigma;
  tr.progress = plan.terminal_progress;
  for (const auto& s : plan.states) tr.positions.emplace_back(s.X, s.Y);
  return tr;
}

}  // namespace

const char* to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::FullStack: return "full-stack";
    case ControllerKind::PlainMpcc: return "plain-mpcc";
    case ControllerKind::ConstantAccel: return "constant-accel";
  }
  return "?";
}

const char* to_string(PredictorKind kind) {
  return kind == PredictorKind::Stackelberg ? "stackelberg" : "ekf";
}

void Scenario::validate() const {
  if (track_file.empty()) throw ConfigError("scenario.track: required");
  if (!(half_width > 0.0)) throw ConfigError("scenario.half_width: must be > 0");
  if (vehicles.empty()) throw ConfigError("scenario.vehicles: at least one vehicle required");
  int egos = 0;
  std::set<double> starts;
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    const auto& v = vehicles[i];
    const std::string where = "scenario.vehicles[" + std::to_string(i) + "]";
    if (v.role == Role::Ego) ++egos;
    if (v.controller == ControllerKind::FullStack && v.role != Role::Ego) {
      throw ConfigError(where + ".controller: full-stack is reserved for the ego");
    }
    if (!(v.start_speed >= 0.0)) throw ConfigError(where + ".start_speed: must be >= 0");
    if (!std::isfinite(v.start_progress)) throw ConfigError(where + ".start_progress: must be finite");
    if (!starts.insert(v.start_progress).second) {
      throw ConfigError(where + ".start_progress: start progresses must be distinct");
    }
    if (v.params_file.empty()) throw ConfigError(where + ".params: required");
    if (v.speed_limit && !(*v.speed_limit > 0.0)) throw ConfigError(where + ".speed_limit: must be > 0");
  }
  if (egos != 1) throw ConfigError("scenario.vehicles: exactly one ego required");
  if (!(noise_position >= 0.0) || !(noise_speed >= 0.0)) {
    throw ConfigError("scenario.perception_noise: standard deviations must be >= 0");
  }
  if (!duration && !laps) throw ConfigError("scenario: duration or laps required");
  if (duration && !(*duration >= 0.0)) throw ConfigError("scenario.duration: must be >= 0");
  if (laps && *laps < 1) throw ConfigError("scenario.laps: must be >= 1");
  if (!(physics_dt > 0.0)) throw ConfigError("scenario.physics_dt: must be > 0");
  if (!(control_period > 0.0)) throw ConfigError("scenario.control_period: must be > 0");
  const double ratio = control_period / physics_dt;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 || std::round(ratio) < 1.0) {
    throw ConfigError("scenario.physics_dt: must divide control_period");
  }
  mpcc.validate();
  planner_config.validate();
}

int Scenario::ego_index() const {
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    if (vehicles[i].role == Role::Ego) return static_cast<int>(i);
  }
  throw ConfigError("scenario.vehicles: exactly one ego required");
}

Scenario scenario_from_json_text(const std::string& text, const std::string& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("scenario: expected a JSON object");
  detail::reject_unknown(j, {"track", "half_width", "vehicles", "predictor", "planner", "perception_noise",
                             "duration", "laps", "control_period", "physics_dt", "seed", "mpcc",
                             "planner_config"},
                         "scenario");
  Scenario s;
  s.track_file = resolve(base_dir, field<std::string>(j, "track", "scenario"));
  s.half_width = optional_field(j, "half_width", s.half_width, "scenario");
  if (!j.contains("vehicles") || !j.at("vehicles").is_array()) {
    throw ConfigError("scenario.vehicles: expected an array");
  }
  for (std::size_t i = 0; i < j.at("vehicles").size(); ++i) {
    const json& v = j.at("vehicles")[i];
    const std::string where = "scenario.vehicles[" + std::to_string(i) + "]";
    detail::reject_unknown(v, {"role", "start_progress", "start_speed", "controller", "params", "lateral_offset",
                               "accel", "speed_limit", "mode"},
                           where);
    VehicleSpec spec;
    spec.role = parse_role(field<std::string>(v, "role", where), where);
    spec.start_progress = field<double>(v, "start_progress", where);
    spec.start_speed = field<double>(v, "start_speed", where);
    spec.controller = parse_controller(
        optional_field<std::string>(v, "controller", spec.role == Role::Ego ? "full-stack" : "plain-mpcc", where),
        where);
    spec.params_file = resolve(base_dir, field<std::string>(v, "params", where));
    spec.lateral_offset = optional_field(v, "lateral_offset", 0.0, where);
    spec.accel = optional_field(v, "accel", 0.0, where);
    if (v.contains("speed_limit") && !v.at("speed_limit").is_null()) {
      spec.speed_limit = field<double>(v, "speed_limit", where);
    }
    if (v.contains("mode")) spec.mode = parse_mode(field<std::string>(v, "mode", where), where);
    s.vehicles.push_back(spec);
  }
  if (j.contains("predictor")) s.predictor = parse_predictor(field<std::string>(j, "predictor", "scenario"));
  if (j.contains("planner")) s.planner = parse_switch(j.at("planner"), "planner");
  if (j.contains("perception_noise")) {
    const json& n = j.at("perception_noise");
    detail::reject_unknown(n, {"position", "speed"}, "scenario.perception_noise");
    s.noise_position = optional_field(n, "position", 0.0, "scenario.perception_noise");
    s.noise_speed = optional_field(n, "speed", 0.0, "scenario.perception_noise");
  }
  if (j.contains("duration")) s.duration = field<double>(j, "duration", "scenario");
  if (j.contains("laps")) s.laps = field<int>(j, "laps", "scenario");
  s.control_period = optional_field(j, "control_period", s.control_period, "scenario");
  s.physics_dt = optional_field(j, "physics_dt", s.physics_dt, "scenario");
  s.seed = optional_field<std::uint64_t>(j, "seed", 0, "scenario");
  if (j.contains("mpcc")) s.mpcc = detail::mpcc_config_from_json(j.at("mpcc"));
  if (j.contains("planner_config")) s.planner_config = planner_config_from_json(j.at("planner_config"));
  s.validate();
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("scenario: cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return scenario_from_json_text(buf.str(), std::filesystem::path(path).parent_path().string());
}

std::string scenario_to_json_text(const Scenario& s) {
  nlohmann::ordered_json j;
  j["track"] = s.track_file;
  j["half_width"] = s.half_width;
  j["vehicles"] = nlohmann::ordered_json::array();
  for (const auto& v : s.vehicles) {
    nlohmann::ordered_json e;
    e["role"] = v.role == Role::Ego ? "ego" : "opponent";
    e["start_progress"] = v.start_progress;
    e["start_speed"] = v.start_speed;
    e["controller"] = to_string(v.controller);
    e["params"] = v.params_file;
    e["lateral_offset"] = v.lateral_offset;
    e["accel"] = v.accel;
    if (v.speed_limit) e["speed_limit"] = *v.speed_limit;
    e["mode"] = to_string(v.mode);
    j["vehicles"].push_back(e);
  }
  j["predictor"] = to_string(s.predictor);
  j["planner"] = s.planner ? "on" : "off";
  j["perception_noise"] = {{"position", s.noise_position}, {"speed", s.noise_speed}};
  if (s.duration) j["duration"] = *s.duration;
  if (s.laps) j["laps"] = *s.laps;
  j["control_period"] = s.control_period;
  j["physics_dt"] = s.physics_dt;
  j["seed"] = s.seed;
  j["mpcc"] = nlohmann::ordered_json::parse(detail::mpcc_config_to_json(s.mpcc).dump());
  j["planner_config"] = {{"threshold", s.planner_config.threshold},
                         {"range", s.planner_config.range},
                         {"keep_qc_scale", s.planner_config.keep_qc_scale},
                         {"overtake_gamma_scale", s.planner_config.overtake_gamma_scale},
                         {"hysteresis_cycles", s.planner_config.hysteresis_cycles}};
  return j.dump(2);
}

std::optional<CollisionPair> detect_collision(const std::vector<VehicleState>& states,
                                              const std::vector<double>& radii) {
  for (std::size_t i = 0; i < states.size(); ++i) {
    for (std::size_t j = i + 1; j < states.size(); ++j) {
      const double d = std::hypot(states[i].X - states[j].X, states[i].Y - states[j].Y);
      if (d < radii[i] + radii[j]) return CollisionPair{static_cast<int>(i), static_cast<int>(j)};
    }
  }
  return std::nullopt;
}

std::vector<OpponentObservation> sense(WorldState& world, int ego, double position_std,
                                       double speed_std, double period) {
  std::vector<OpponentObservation> out;
  std::normal_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < world.vehicles.size(); ++i) {
    if (static_cast<int>(i) == ego) continue;
    const VehicleState& s = world.vehicles[i].state;
    OpponentObservation o;
    o.id = static_cast<int>(i);
    // draws happen even at zero noise so the stream does not depend on it
    const double nx = unit(world.perception_rng), ny = unit(world.perception_rng);
    const double nv = unit(world.perception_rng);
    o.position = {s.X + position_std * nx, s.Y + position_std * ny};
    o.heading = s.psi;
    o.speed = std::max(0.0, s.speed() + speed_std * nv);
    auto prev = world.last_observed_speed.find(o.id);
    o.acceleration = prev == world.last_observed_speed.end() ? 0.0 : (o.speed - prev->second) / period;
    world.last_observed_speed[o.id] = o.speed;
    o.timestamp = world.time;
    out.push_back(o);
  }
  return out;
}

std::vector<double> RaceLog::lap_times(int vehicle) const {
  std::vector<double> out;
  for (const auto& l : laps) {
    if (l.vehicle == vehicle) out.push_back(l.lap_time);
  }
  return out;
}

int RaceLog::overtakes_by(int vehicle) const {
  int n = 0;
  for (const auto& o : overtakes) n += o.overtaker == vehicle;
  return n;
}

Simulator::Simulator(Scenario scenario)
    : scenario_(std::move(scenario)),
      track_(load_track(scenario_.track_file, scenario_.half_width)),
      planner_(scenario_.planner_config) {
  scenario_.validate();
  ego_ = scenario_.ego_index();
  steps_per_control_ = std::lround(scenario_.control_period / scenario_.physics_dt);
  std::seed_seq seq{static_cast<std::uint32_t>(scenario_.seed), static_cast<std::uint32_t>(scenario_.seed >> 32),
                    0x5e45u};
  world_.perception_rng.seed(seq);
  std::map<std::string, VehicleParams> cache;
  for (const auto& spec : scenario_.vehicles) {
    auto it = cache.find(spec.params_file);
    if (it == cache.end()) it = cache.emplace(spec.params_file, load_vehicle_params(spec.params_file)).first;
    VehicleRuntime v;
    v.params = it->second;
    if (spec.speed_limit) v.params.v_max = std::min(v.params.v_max, *spec.speed_limit);
    const double theta = track_.wrap(spec.start_progress);
    const RefPose ref = track_.ref_pose(theta);
    v.state = {ref.x - spec.lateral_offset * std::sin(ref.phi), ref.y + spec.lateral_offset * std::cos(ref.phi),
               ref.phi, spec.start_speed, 0.0, 0.0};
    v.theta = track_.project(v.state.X, v.state.Y, theta);
    v.distance = spec.start_progress;
    world_.vehicles.push_back(v);
  }
  const int n = static_cast<int>(world_.vehicles.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double d = world_.vehicles[i].distance - world_.vehicles[j].distance;
      const int sign = d > 0 ? 1 : -1;
      orders_[{i, j}] = {sign, sign, 0.0};
    }
  }
  log_.scenario_json = scenario_to_json_text(scenario_);
}

bool Simulator::done() const {
  if (log_.dnf) return true;
  if (scenario_.duration && world_.time >= *scenario_.duration - kTimeEps) return true;
  if (scenario_.laps && world_.vehicles[ego_].laps >= *scenario_.laps) return true;
  return false;
}

void Simulator::control_ego(int i) {
  VehicleRuntime& v = world_.vehicles[i];
  const auto observations = sense(world_, i, scenario_.noise_position, scenario_.noise_speed,
                                  scenario_.control_period);
  const auto in_range = filter_in_range(v.state, observations, track_);
  std::vector<PredictedTrajectory> predictions;
  if (scenario_.predictor == PredictorKind::Stackelberg) {
    predictions = predict_stackelberg(in_range, track_, scenario_.mpcc, v.params, &prediction_memory_);
  } else {
    predictions = predict_ekf(in_range, track_, scenario_.mpcc);
  }
  const MpccSolution* warm = v.plan ? &*v.plan : nullptr;
  if (scenario_.planner) {
    PlannerDecision d = planner_.plan(v.state, v.theta, predictions, track_, scenario_.mpcc, v.params, warm);
    v.mode = to_string(d.mode);
    v.plan = std::move(d.solution);
  } else {
    v.plan = solve(v.state, v.theta, track_, ObstacleSet{predictions}, scenario_.mpcc, v.params, warm);
    v.mode = "Base";
  }
}

void Simulator::control_plain(int i, const std::vector<int>& order) {
  VehicleRuntime& v = world_.vehicles[i];
  ObstacleSet obstacles;
  const double range = scenario_.planner_config.range;
  for (int j : order) {
    if (j == i) break;
    const VehicleRuntime& other = world_.vehicles[j];
    const double ahead = track_.signed_distance(other.theta, v.theta);
    if (ahead <= 0.0 || ahead > range) continue;
    if (other.plan) {
      obstacles.trajectories.push_back(trajectory_of(*other.plan, j, scenario_.mpcc.sigma));
    } else {
      // a scripted car has no plan; it is extrapolated from its true state
      const OpponentObservation o{j, {other.state.X, other.state.Y}, other.state.psi, other.state.vx,
                                  scenario_.vehicles[j].accel, world_.time};
      obstacles.trajectories.push_back(
          predict_ekf_baseline(o, scenario_.mpcc.N, scenario_.mpcc.dt, scenario_.mpcc.sigma));
    }
  }
  const MpccSolution* warm = v.plan ? &*v.plan : nullptr;
  const MpccConfig cfg = mode_config(scenario_.vehicles[i].mode, scenario_.mpcc, scenario_.planner_config);
  v.plan = solve(v.state, v.theta, track_, obstacles, cfg, v.params, warm);
  v.mode = to_string(scenario_.vehicles[i].mode);
}

void Simulator::control_constant_accel(int i) {
  VehicleRuntime& v = world_.vehicles[i];
  const auto& spec = scenario_.vehicles[i];
  const VehicleParams& p = v.params;
  std::vector<VehicleState> others;
  for (std::size_t j = 0; j < world_.vehicles.size(); ++j) {
    if (static_cast<int>(j) != i) others.push_back(world_.vehicles[j].state);
  }
  const double cd = effective_drag(v.state, others, p);
  const double vx = v.state.vx;
  const double D = (p.m * spec.accel + p.C_r + cd * vx * vx) / p.C_m;
  const RefPose ref = track_.ref_pose(v.theta);
  // holds the starting lateral offset
  const double lateral = -std::sin(ref.phi) * (v.state.X - ref.x) + std::cos(ref.phi) * (v.state.Y - ref.y);
  const double heading_error = std::remainder(v.state.psi - ref.phi, 2.0 * std::numbers::pi);
  const double delta = std::atan(ref.curvature * (p.l_F + p.l_R)) -
                       kLaneGain * (lateral - spec.lateral_offset) - kHeadingGain * heading_error;
  const MpccConfig& c = scenario_.mpcc;
  v.input = {std::clamp(delta, c.u_min.delta, c.u_max.delta), std::clamp(D, c.u_min.D, c.u_max.D)};
  v.mode = "-";
  v.status = "-";
  v.plan.reset();
}

void Simulator::control() {
  const int n = static_cast<int>(world_.vehicles.size());
  // leader first by distance covered, so every car sees fresh plans of the cars ahead
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return world_.vehicles[a].distance > world_.vehicles[b].distance;
  });
  std::vector<int> sequence = {ego_};
  for (int i : order) {
    if (i != ego_) sequence.push_back(i);
  }
  for (int i : sequence) {
    VehicleRuntime& v = world_.vehicles[i];
    const ControllerKind kind = scenario_.vehicles[i].controller;
    try {
      if (kind == ControllerKind::ConstantAccel) {
        control_constant_accel(i);
        continue;
      }
      if (kind == ControllerKind::FullStack) {
        control_ego(i);
      } else {
        control_plain(i, order);
      }
      v.input = v.plan->inputs.front();
      v.status = to_string(v.plan->status);
    } catch (const std::runtime_error& e) {
      // hold the last input; the next solve starts cold
      v.plan.reset();
      v.status = "Failed";
      log_.failures.push_back({world_.time, i, e.what()});
    }
  }
}

void Simulator::physics_step() {
  const int n = static_cast<int>(world_.vehicles.size());
  std::vector<VehicleState> states;
  for (const auto& v : world_.vehicles) states.push_back(v.state);
  const double dt = scenario_.physics_dt;
  const double t0 = world_.time;
  ++tick_;
  world_.time = static_cast<double>(tick_) * dt;
  for (int i = 0; i < n; ++i) {
    VehicleRuntime& v = world_.vehicles[i];
    std::vector<VehicleState> others;
    for (int j = 0; j < n; ++j) {
      if (j != i) others.push_back(states[j]);
    }
    const DraftContext draft = draft_context(states[i], others, v.params.draft);
    try {
      v.state = integrate(states[i], v.input, v.params, draft, dt);
    } catch (const std::runtime_error& e) {
      log_.failures.push_back({world_.time, i, e.what()});
      continue;
    }
    const double before = v.distance;
    try {
      const double theta = track_.project(v.state.X, v.state.Y, v.theta);
      v.distance += track_.signed_distance(theta, v.theta);
      v.theta = theta;
    } catch (const OffTrackError& e) {
      log_.failures.push_back({world_.time, i, e.what()});
    }
    const double L = track_.total_length();
    const double start = scenario_.vehicles[i].start_progress;
    while (v.distance >= start + static_cast<double>(v.laps + 1) * L) {
      const double target = start + static_cast<double>(v.laps + 1) * L;
      const double frac = v.distance > before ? (target - before) / (v.distance - before) : 1.0;
      const double crossing = t0 + std::clamp(frac, 0.0, 1.0) * dt;
      ++v.laps;
      log_.laps.push_back({crossing, i, v.laps, crossing - v.lap_start});
      v.lap_start = crossing;
    }
  }

  std::vector<VehicleState> now;
  std::vector<double> radii;
  for (const auto& v : world_.vehicles) {
    now.push_back(v.state);
    radii.push_back(v.params.footprint_radius);
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const bool touching = static_cast<bool>(detect_collision({now[i], now[j]}, {radii[i], radii[j]}));
      bool& was = touching_[{i, j}];
      if (touching && !was) {
        log_.collisions.push_back({world_.time, i, j});
        if (i == ego_ || j == ego_) log_.dnf = true;
      }
      was = touching;
    }
  }
  update_overtakes();
  record_tick();
}

void Simulator::update_overtakes() {
  for (auto& [pair, o] : orders_) {
    const double d = world_.vehicles[pair.first].distance - world_.vehicles[pair.second].distance;
    const int sign = d > 0 ? 1 : (d < 0 ? -1 : o.current);
    if (sign != o.current) {
      o.current = sign;
      o.since = world_.time;
    }
    if (o.current != o.confirmed && world_.time - o.since >= 1.0 - kTimeEps) {
      o.confirmed = o.current;
      const int leader = o.current > 0 ? pair.first : pair.second;
      const int other = o.current > 0 ? pair.second : pair.first;
      log_.overtakes.push_back({o.since, leader, other});
    }
  }
}

void Simulator::record_tick() {
  const int n = static_cast<int>(world_.vehicles.size());
  for (int i = 0; i < n; ++i) {
    const VehicleRuntime& v = world_.vehicles[i];
    double min_dist = std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const auto& o = world_.vehicles[j].state;
      min_dist = std::min(min_dist, std::hypot(v.state.X - o.X, v.state.Y - o.Y));
    }
    log_.ticks.push_back({world_.time, i, v.state, v.theta, v.mode, v.status, min_dist, v.input});
  }
}

bool Simulator::step() {
  if (finished_) return false;
  if (tick_ == 0 && log_.ticks.empty()) record_tick();
  if (done()) {
    finished_ = true;
    log_.end_time = world_.time;
    return false;
  }
  control();
  for (long k = 0; k < steps_per_control_; ++k) {
    physics_step();
    if (log_.dnf) break;
    if (scenario_.laps && world_.vehicles[ego_].laps >= *scenario_.laps) break;
    if (scenario_.duration && world_.time >= *scenario_.duration - kTimeEps) break;
  }
  if (done()) {
    finished_ = true;
    log_.end_time = world_.time;
    return false;
  }
  return true;
}

RaceLog Simulator::run() {
  while (step()) {
  }
  return log_;
}

RaceLog run_scenario(const Scenario& scenario) {
  Simulator sim(scenario);
  return sim.run();
}

std::string tick_csv_text(const RaceLog& log) {
  std::string out = std::string(kTickHeader) + "\n";
  for (const auto& t : log.ticks) {
    out += fmt_time(t.t) + "," + std::to_string(t.vehicle) + "," + fmt(t.state.X) + "," + fmt(t.state.Y) + "," +
           fmt(t.state.psi) + "," + fmt(t.state.vx) + "," + fmt(t.state.vy) + "," + fmt(t.state.r) + "," +
           fmt(t.theta) + "," + t.mode + "," + t.status + "," + fmt(t.min_dist) + "," + fmt(t.input.delta) +
           "," + fmt(t.input.D) + "\n";
  }
  return out;
}

std::string events_json_text(const RaceLog& log) {
  nlohmann::ordered_json j;
  j["dnf"] = log.dnf;
  j["end_time"] = log.end_time;
  j["collisions"] = nlohmann::ordered_json::array();
  for (const auto& c : log.collisions) j["collisions"].push_back({{"t", c.t}, {"a", c.a}, {"b", c.b}});
  j["overtakes"] = nlohmann::ordered_json::array();
  for (const auto& o : log.overtakes) {
    j["overtakes"].push_back({{"t", o.t}, {"overtaker", o.overtaker}, {"overtaken", o.overtaken}});
  }
  j["laps"] = nlohmann::ordered_json::array();
  for (const auto& l : log.laps) {
    j["laps"].push_back({{"t", l.t}, {"vehicle", l.vehicle}, {"lap", l.lap}, {"lap_time", l.lap_time}});
  }
  j["controller_failures"] = nlohmann::ordered_json::array();
  for (const auto& f : log.failures) {
    j["controller_failures"].push_back({{"t", f.t}, {"vehicle", f.vehicle}, {"what", f.what}});
  }
  j["scenario"] = log.scenario_json.empty() ? nlohmann::ordered_json::object()
                                            : nlohmann::ordered_json::parse(log.scenario_json);
  return j.dump(2) + "\n";
}

std::vector<TickRecord> read_tick_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("tick log: cannot open '" + path + "'");
  std::string line;
  std::getline(in, line);
  if (line != kTickHeader) {
    throw ConfigError("tick log: unexpected header in '" + path + "'");
  }
  std::vector<TickRecord> out;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 14) throw ConfigError("tick log: row " + std::to_string(row) + " has " + std::to_string(f.size()) + " fields");
    try {
      TickRecord t;
      t.t = std::stod(f[0]);
      t.vehicle = std::stoi(f[1]);
      t.state = {std::stod(f[2]), std::stod(f[3]), std::stod(f[4]), std::stod(f[5]), std::stod(f[6]), std::stod(f[7])};
      t.theta = std::stod(f[8]);
      t.mode = f[9];
      t.status = f[10];
      t.min_dist = std::stod(f[11]);
      t.input = {std::stod(f[12]), std::stod(f[13])};
      out.push_back(t);
    } catch (const std::logic_error&) {
      throw ConfigError("tick log: row " + std::to_string(row) + " is not numeric");
    }
  }
  return out;
}

void write_tick_csv(const RaceLog& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << tick_csv_text(log);
}

void write_events_json(const RaceLog& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << events_json_text(log);
}

}  // namespace racing
