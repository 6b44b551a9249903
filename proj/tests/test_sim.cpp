#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "racing/sim.hpp"
#include "support/oracles.hpp"

#include <cmath>
#include <numeric>

using namespace racing;

namespace {

VehicleSpec car(Role role, double start, double speed, ControllerKind controller, double accel = 0.0,
                double lateral = 0.0) {
  VehicleSpec v;
  v.role = role;
  v.start_progress = start;
  v.start_speed = speed;
  v.controller = controller;
  v.params_file = oracle::data_path("vehicle_default.json");
  v.accel = accel;
  v.lateral_offset = lateral;
  return v;
}

Scenario base_scenario(std::vector<VehicleSpec> vehicles, double duration) {
  Scenario s;
  s.track_file = oracle::data_path("oval_centerline.csv");
  s.vehicles = std::move(vehicles);
  s.duration = duration;
  s.seed = 7;
  return s;
}

WorldState world_with(const std::vector<VehicleState>& states, std::uint64_t seed) {
  WorldState w;
  w.perception_rng.seed(seed);
  for (const auto& s : states) {
    VehicleRuntime v;
    v.state = s;
    w.vehicles.push_back(v);
  }
  return w;
}

double kinetic_energy(const VehicleState& x, const VehicleParams& p) {
  return 0.5 * p.m * (x.vx * x.vx + x.vy * x.vy) + 0.5 * p.I_z * x.r * x.r;
}

const std::string kScenarioText = R"({
  "track": "oval_centerline.csv",
  "vehicles": [
    {"role": "opponent", "start_progress": 40.0, "start_speed": 27.78, "params": "vehicle_default.json"},
    {"role": "ego", "start_progress": 10.0, "start_speed": 30.56, "controller": "full-stack",
     "params": "vehicle_default.json"}
  ],
  "predictor": "ekf",
  "planner": "off",
  "perception_noise": {"position": 0.5, "speed": 0.5},
  "duration": 2.0,
  "seed": 3,
  "mpcc": {"q_c": 2.0}
})";

}  // namespace

TEST_CASE("perception") {
  const std::vector<VehicleState> states = {{0, 0, 0, 30, 0, 0}, {10, 2, 0.1, 25, 0, 0}, {40, -1, 0, 28, 0, 0}};

  SUBCASE("noiseless observations equal ground truth") {
    WorldState w = world_with(states, 1);
    const auto obs = sense(w, 0, 0.0, 0.0, 0.05);
    REQUIRE(obs.size() == 2);
    CHECK(obs[0].id == 1);
    CHECK(obs[0].position == Eigen::Vector2d(10, 2));
    CHECK(obs[0].heading == 0.1);
    CHECK(obs[0].speed == 25.0);
    CHECK(obs[0].acceleration == 0.0);
    CHECK(obs[1].position == Eigen::Vector2d(40, -1));
  }

  SUBCASE("a fixed seed repeats the noise") {
    WorldState a = world_with(states, 9), b = world_with(states, 9);
    for (int i = 0; i < 5; ++i) {
      const auto oa = sense(a, 0, 0.5, 0.5, 0.05);
      const auto ob = sense(b, 0, 0.5, 0.5, 0.05);
      for (std::size_t j = 0; j < oa.size(); ++j) {
        CHECK(oa[j].position == ob[j].position);
        CHECK(oa[j].speed == ob[j].speed);
      }
    }
  }

  SUBCASE("position noise has the configured spread") {
    WorldState w = world_with({states[0], states[1]}, 2024);
    std::vector<double> dx;
    for (int i = 0; i < 1000; ++i) dx.push_back(sense(w, 0, 0.5, 0.0, 0.05)[0].position.x() - 10.0);
    const double mean = std::accumulate(dx.begin(), dx.end(), 0.0) / dx.size();
    double var = 0.0;
    for (double d : dx) var += (d - mean) * (d - mean);
    const double sd = std::sqrt(var / (dx.size() - 1));
    CHECK(sd >= 0.45);
    CHECK(sd <= 0.55);
  }

  SUBCASE("acceleration is the difference of noisy speeds") {
    WorldState w = world_with(states, 5);
    const auto first = sense(w, 0, 0.0, 0.3, 0.05);
    w.vehicles[1].state.vx = 26.0;
    const auto second = sense(w, 0, 0.0, 0.3, 0.05);
    CHECK(first[0].acceleration == 0.0);
    CHECK(second[0].acceleration == doctest::Approx((second[0].speed - first[0].speed) / 0.05));
  }

  SUBCASE("speeds never go negative") {
    WorldState w = world_with({states[0], {5, 0, 0, 0.0, 0, 0}}, 11);
    for (int i = 0; i < 200; ++i) CHECK(sense(w, 0, 0.0, 2.0, 0.05)[0].speed >= 0.0);
  }
}

TEST_CASE("collision test") {
  const VehicleState a{0, 0, 0, 1, 0, 0};
  CHECK_FALSE(detect_collision({a, {10, 0, 0, 1, 0, 0}}, {1.5, 1.5}));
  const auto hit = detect_collision({a, a}, {1.5, 1.5});
  REQUIRE(hit);
  CHECK(hit->a == 0);
  CHECK(hit->b == 1);
  CHECK_FALSE(detect_collision({a, {3.0, 0, 0, 1, 0, 0}}, {1.5, 1.5}));
  CHECK(detect_collision({a, {2.999, 0, 0, 1, 0, 0}}, {1.5, 1.5}));
  const auto second = detect_collision({a, {20, 0, 0, 1, 0, 0}, {20, 1, 0, 1, 0, 0}}, {1.5, 1.5, 1.5});
  REQUIRE(second);
  CHECK(second->a == 1);
  CHECK(second->b == 2);
}

TEST_CASE("scenario files") {
  const std::string dir = RACING_DATA_DIR;
  const Scenario s = scenario_from_json_text(kScenarioText, dir);
  CHECK(s.vehicles.size() == 2);
  CHECK(s.ego_index() == 1);
  CHECK(s.vehicles[0].controller == ControllerKind::PlainMpcc);
  CHECK(s.predictor == PredictorKind::Ekf);
  CHECK_FALSE(s.planner);
  CHECK(s.noise_position == 0.5);
  CHECK(s.mpcc.q_c == 2.0);
  CHECK(s.track_file == oracle::data_path("oval_centerline.csv"));

  const Scenario again = scenario_from_json_text(scenario_to_json_text(s), dir);
  CHECK(scenario_to_json_text(again) == scenario_to_json_text(s));

  auto rejects = [&](const std::string& from, const std::string& to, const std::string& field) {
    std::string text = kScenarioText;
    const auto at = text.find(from);
    REQUIRE(at != std::string::npos);
    text.replace(at, from.size(), to);
    try {
      scenario_from_json_text(text, dir);
      FAIL("accepted: " << to);
    } catch (const ConfigError& e) {
      CHECK_MESSAGE(std::string(e.what()).find(field) != std::string::npos, e.what());
    }
  };
  rejects("\"seed\": 3", "\"seed\": 3, \"sede\": 4", "sede");
  rejects("\"start_speed\": 27.78,", "\"start_speed\": 27.78, \"colour\": 1,", "colour");
  rejects("\"role\": \"opponent\"", "\"role\": \"ego\"", "ego");
  rejects("\"start_progress\": 40.0", "\"start_progress\": 10.0", "start_progress");
  rejects("\"duration\": 2.0,", "\"duration\": 2.0, \"physics_dt\": 0.03,", "physics_dt");
  rejects("\"duration\": 2.0,", "", "duration");
  rejects("\"predictor\": \"ekf\"", "\"predictor\": \"oracle\"", "predictor");
  rejects("\"planner\": \"off\"", "\"planner\": \"maybe\"", "planner");
  rejects("\"q_c\": 2.0", "\"q_c\": 2.0, \"q_z\": 1", "q_z");
  rejects("\"start_speed\": 27.78,", "\"start_speed\": 27.78, \"mode\": \"Racing\",", "mode");

  std::string overtaking = kScenarioText;
  overtaking.replace(overtaking.find("\"start_speed\": 27.78,"), 21, "\"start_speed\": 27.78, \"mode\": \"Overtaking\",");
  const Scenario o = scenario_from_json_text(overtaking, dir);
  CHECK(o.vehicles[0].mode == ModeTag::Overtaking);
  CHECK(o.vehicles[1].mode == ModeTag::PositionKeeping);
  CHECK(scenario_to_json_text(scenario_from_json_text(scenario_to_json_text(o), dir)) == scenario_to_json_text(o));
  CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.json"), ConfigError);
}

TEST_CASE("a zero-length run logs only the initial state") {
  const Scenario s = base_scenario({car(Role::Ego, 100.0, 30.0, ControllerKind::ConstantAccel),
                                    car(Role::Opponent, 150.0, 30.0, ControllerKind::ConstantAccel)},
                                   0.0);
  const RaceLog log = run_scenario(s);
  REQUIRE(log.ticks.size() == 2);
  CHECK(log.ticks[0].t == 0.0);
  CHECK(log.ticks[0].state.vx == 30.0);
  CHECK(log.ticks[1].min_dist == doctest::Approx(50.0).epsilon(1e-6));
  CHECK(log.collisions.empty());
  CHECK(log.end_time == 0.0);
  const std::string csv = tick_csv_text(log);
  CHECK(csv.rfind("t,vehicle,X,Y,psi,vx,vy,r,theta,mode,status,min_dist,delta,D\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

TEST_CASE("constant acceleration from 100 km/h") {
  const double v0 = 100.0 / 3.6;
  const double a = 2.0;
  const Scenario s = base_scenario({car(Role::Ego, 50.0, v0, ControllerKind::ConstantAccel, a)}, 1.0);
  const RaceLog log = run_scenario(s);
  REQUIRE_FALSE(log.ticks.empty());
  const auto& last = log.ticks.back();
  CHECK(last.t == doctest::Approx(1.0));
  // on a straight the controller cancels drag and rolling resistance, held
  // over each control period
  CHECK(last.state.vx == doctest::Approx(v0 + a * 1.0).epsilon(1e-3));
  CHECK(last.theta == doctest::Approx(50.0 + v0 + 0.5 * a).epsilon(1e-3));
}

TEST_CASE("coasting never gains energy on a straight") {
  const VehicleParams p = load_vehicle_params(oracle::data_path("vehicle_default.json"));
  const double v0 = 40.0;
  // cancels resistance at the start speed only, so throttle stays at or below zero
  const double a = -(p.C_r + p.C_d * v0 * v0) / p.m;
  const Scenario s = base_scenario({car(Role::Ego, 20.0, v0, ControllerKind::ConstantAccel, a)}, 5.0);
  const RaceLog log = run_scenario(s);
  for (std::size_t i = 1; i < log.ticks.size(); ++i) {
    CHECK(log.ticks[i].input.D <= 1e-12);
    CHECK(kinetic_energy(log.ticks[i].state, p) <= kinetic_energy(log.ticks[i - 1].state, p) * (1.0 + 1e-12));
  }
}

TEST_CASE("speed limits and v_max") {
  VehicleSpec fast = car(Role::Ego, 10.0, 30.0, ControllerKind::ConstantAccel, 6.0);
  fast.speed_limit = 40.0;
  const RaceLog log = run_scenario(base_scenario({fast}, 6.0));
  double top = 0.0;
  for (const auto& t : log.ticks) top = std::max(top, t.state.vx);
  CHECK(top <= 40.0 + 1e-9);
  CHECK(top == doctest::Approx(40.0));
}

TEST_CASE("collision events match the ticks and end the run") {
  const Scenario s = base_scenario({car(Role::Ego, 10.0, 40.0, ControllerKind::ConstantAccel),
                                    car(Role::Opponent, 30.0, 30.0, ControllerKind::ConstantAccel)},
                                   10.0);
  const RaceLog log = run_scenario(s);
  REQUIRE(log.collisions.size() == 1);
  CHECK(log.dnf);
  const auto& c = log.collisions.front();
  CHECK(c.a == 0);
  CHECK(c.b == 1);
  // closing at 10 m/s from 20 m apart, contact at 3 m
  CHECK(c.t == doctest::Approx(1.7).epsilon(0.02));
  CHECK(log.end_time == c.t);
  bool seen = false;
  for (const auto& t : log.ticks) {
    if (t.t == c.t) {
      CHECK(t.min_dist < 3.0);
      seen = true;
    } else {
      CHECK(t.min_dist >= 3.0);
    }
  }
  CHECK(seen);
  CHECK(log.ticks.back().t == c.t);
}

TEST_CASE("overtakes and laps") {
  SUBCASE("a faster car passing alongside") {
    const Scenario s = base_scenario({car(Role::Ego, 10.0, 40.0, ControllerKind::ConstantAccel, 0.0, 4.0),
                                      car(Role::Opponent, 30.0, 30.0, ControllerKind::ConstantAccel)},
                                     5.0);
    const RaceLog log = run_scenario(s);
    CHECK(log.collisions.empty());
    REQUIRE(log.overtakes.size() == 1);
    CHECK(log.overtakes[0].overtaker == 0);
    CHECK(log.overtakes[0].overtaken == 1);
    CHECK(log.overtakes[0].t == doctest::Approx(2.0).epsilon(0.02));
    CHECK(log.overtakes_by(0) == 1);
    CHECK(log.overtakes_by(1) == 0);
  }

  SUBCASE("an order change shorter than a second is not an overtake") {
    const Scenario s = base_scenario({car(Role::Ego, 10.0, 40.0, ControllerKind::ConstantAccel, 0.0, 4.0),
                                      car(Role::Opponent, 30.0, 30.0, ControllerKind::ConstantAccel)},
                                     2.5);
    CHECK(run_scenario(s).overtakes.empty());
  }

  SUBCASE("lap time from the car's own start") {
    const Track oval = load_track(oracle::data_path("oval_centerline.csv"), 7.5);
    const double L = oval.total_length();
    const double v = 40.0;
    Scenario s = base_scenario({car(Role::Ego, L - 20.0, v, ControllerKind::ConstantAccel,
                                    0.0)},
                               1.0);
    s.duration.reset();
    s.laps = 1;
    const RaceLog log = run_scenario(s);
    REQUIRE(log.laps.size() == 1);
    CHECK(log.laps[0].vehicle == 0);
    CHECK(log.laps[0].lap == 1);
    // the turns cost a little speed, so the lap is pinned by the progress crossing
    CHECK(log.laps[0].lap_time == doctest::Approx(L / v).epsilon(0.05));
    CHECK(log.laps[0].lap_time == doctest::Approx(log.laps[0].t));
    const TickRecord* before = nullptr;
    const TickRecord* after = nullptr;
    for (const auto& t : log.ticks) {
      if (t.t <= log.laps[0].t) before = &t;
      if (t.t > log.laps[0].t && !after) after = &t;
    }
    REQUIRE(before != nullptr);
    REQUIRE(after != nullptr);
    CHECK(before->theta < L - 20.0);
    CHECK(after->theta >= L - 20.0);
    CHECK(log.end_time >= log.laps[0].t);
    CHECK(log.lap_times(0) == std::vector<double>{log.laps[0].lap_time});
  }
}

TEST_CASE("plain contouring cars share the track without contact") {
  const Scenario s = base_scenario({car(Role::Opponent, 400.0, 50.0, ControllerKind::PlainMpcc),
                                    car(Role::Ego, 200.0, 50.0, ControllerKind::PlainMpcc),
                                    car(Role::Opponent, 0.0, 50.0, ControllerKind::PlainMpcc)},
                                   60.0);
  const RaceLog log = run_scenario(s);
  const VehicleParams p = load_vehicle_params(oracle::data_path("vehicle_default.json"));
  CHECK(log.collisions.empty());
  CHECK(log.failures.empty());
  CHECK_FALSE(log.dnf);
  for (const auto& t : log.ticks) CHECK(t.state.vx <= p.v_max + 1e-9);
  for (int v = 0; v < 3; ++v) CHECK(log.lap_times(v).size() == 1);
  for (std::size_t i = 3; i < log.ticks.size(); ++i) CHECK(log.ticks[i].t >= log.ticks[i - 3].t);
}

TEST_CASE("a contouring car follows a scripted car instead of running into it") {
  const Scenario s = base_scenario({car(Role::Ego, 60.0, 25.0, ControllerKind::ConstantAccel),
                                    car(Role::Opponent, 0.0, 45.0, ControllerKind::PlainMpcc)},
                                   8.0);
  const RaceLog log = run_scenario(s);
  CHECK(log.collisions.empty());
  CHECK(log.failures.empty());
  double closest = INFINITY;
  for (const auto& t : log.ticks) closest = std::min(closest, t.min_dist);
  CHECK(closest >= 3.0);
  CHECK(closest < 10.0);
}

TEST_CASE("identical seeds give identical logs") {
  const Scenario s = scenario_from_json_text(kScenarioText, RACING_DATA_DIR);
  const RaceLog a = run_scenario(s);
  const RaceLog b = run_scenario(s);
  CHECK(tick_csv_text(a) == tick_csv_text(b));
  CHECK(events_json_text(a) == events_json_text(b));

  Scenario other = s;
  other.seed = 4;
  CHECK(tick_csv_text(run_scenario(other)) != tick_csv_text(a));

  // the echoed scenario carries the weights
  CHECK(events_json_text(a).find("\"q_c\": 2.0") != std::string::npos);
}
