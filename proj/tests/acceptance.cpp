// Acceptance suite: one PASS/FAIL line per criterion.

#include "racing/sim.hpp"
#include "racing/sysid.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace racing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

const VehicleParams& params() {
  static const VehicleParams p = load_vehicle_params(oracle::data_path("vehicle_default.json"));
  return p;
}

const Track& oval() {
  static const Track t = load_track(oracle::data_path("oval_centerline.csv"), 7.5);
  return t;
}

Scenario scenario(const std::string& name) { return load_scenario(oracle::data_path("scenarios/" + name)); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome model_fidelity() {
  const VehicleParams& p = params();
  const double dt = 0.05;
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> pos(-500, 500), ang(-3.1, 3.1), vx(10, 78), vy(-2, 2), yaw(-0.5, 0.5),
      steer(-0.3, 0.3), thr(-1, 1);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const VehicleState x{pos(rng), pos(rng), ang(rng), vx(rng), vy(rng), yaw(rng)};
    const ControlInput u{steer(rng), thr(rng)};
    const auto lin = linearize(x, u, p, DraftContext::none(), dt);
    const auto fd = oracle::fd_jacobians(x, u, p, dt, 1e-7);
    worst = std::max(worst, (lin.A - fd.A).norm() / fd.A.norm());
    worst = std::max(worst, (lin.B - fd.B).norm() / fd.B.norm());
  }

  const VehicleState x0{0, 0, 0, 40.0, 0, 0};
  const ControlInput u{0.012, 0.5};
  const StateVector ref = oracle::euler_richardson(x0, u, p, 1.0, 1e-5);
  auto error = [&](double h) {
    VehicleState x = x0;
    const int n = static_cast<int>(std::lround(1.0 / h));
    for (int i = 0; i < n; ++i) x = integrate(x, u, p, DraftContext::none(), h);
    return (x.to_vector() - ref).cwiseAbs().maxCoeff();
  };
  const double e1 = error(0.1), e2 = error(0.05), e3 = error(0.025);
  const double order = std::min(std::log2(e1 / e2), std::log2(e2 / e3));
  return {worst < 1e-4 && order >= 3.5,
          format("worst relative Jacobian error %.2e (< 1e-4), RK4 order %.2f (>= 3.5)", worst, order)};
}

Outcome physics_invariants() {
  const VehicleParams& p = params();
  bool bounded = true;
  for (double a = -1.5; a <= 1.5; a += 1e-4) {
    bounded = bounded && std::abs(pacejka_lateral(a, p.B_F, p.C_F, p.D_F)) <= p.D_F &&
              std::abs(pacejka_lateral(a, p.B_R, p.C_R, p.D_R)) <= p.D_R;
  }
  bool zero = true;
  for (double v : {1.0, 20.0, 80.0}) {
    const auto f = tire_forces({0, 0, 0, v, 0, 0}, {0.0, 0.5}, p, p.C_d);
    zero = zero && f.F_Fy == 0.0 && f.F_Ry == 0.0;
  }
  bool monotone = true;
  VehicleState x{0, 0, 0, p.v_max, 0, 0};
  for (int i = 0; i < 2000; ++i) {
    const VehicleState next = integrate(x, {0.0, 0.0}, p, DraftContext::none(), 0.01);
    monotone = monotone && next.vx <= x.vx;
    x = next;
  }
  return {bounded && zero && monotone,
          format("|F| <= D over the slip grid: %s, zero slip gives zero force: %s, coasting monotone: %s",
                 bounded ? "yes" : "no", zero ? "yes" : "no", monotone ? "yes" : "no")};
}

Outcome hyperband_correctness() {
  const auto plan = hyperband_schedule(81, 3);
  struct Row {
    int s, n;
    double r;
    std::vector<int> n_i, r_i;
  };
  const std::vector<Row> table = {
      {4, 81, 1.0, {81, 27, 9, 3, 1}, {1, 3, 9, 27, 81}},
      {3, 34, 3.0, {34, 11, 3, 1}, {3, 9, 27, 81}},
      {2, 15, 9.0, {15, 5, 1}, {9, 27, 81}},
      {1, 8, 27.0, {8, 2}, {27, 81}},
      {0, 5, 81.0, {5}, {81}},
  };
  bool schedule = plan.s_max == 4 && plan.budget == 405.0 && plan.brackets.size() == table.size();
  for (std::size_t b = 0; schedule && b < table.size(); ++b) {
    const auto& got = plan.brackets[b];
    schedule = got.s == table[b].s && got.n == table[b].n && got.r == table[b].r &&
               got.rungs.size() == table[b].n_i.size();
    for (std::size_t i = 0; schedule && i < got.rungs.size(); ++i) {
      schedule = got.rungs[i].n == table[b].n_i[i] && got.rungs[i].rounds == table[b].r_i[i];
    }
  }

  const VehicleParams& truth = params();
  const Dataset data = synthetic::sweep_dataset(truth);
  const auto result = hyperband(81, 3, synthetic::space_around(truth), data, truth, 2024);
  bool budget = true;
  for (long used : result.rounds_per_bracket) budget = budget && used <= plan.budget;
  const double loss = result.best.loss.value_or(kDivergedLoss);
  return {schedule && budget && loss < 1e-3,
          format("R=81 eta=3 table %s, per-bracket rounds <= %.0f: %s, synthetic round trip loss %.2e (< 1e-3)",
                 schedule ? "matches" : "differs", plan.budget, budget ? "yes" : "no", loss)};
}

Outcome mpcc_contract() {
  Simulator sim(scenario("single_lap.json"));
  int cycles = 0, converged = 0;
  double worst_ec = 0.0;
  const int ego = 0;
  while (sim.step()) {
    const auto& v = sim.world().vehicles[ego];
    ++cycles;
    converged += v.status == "Converged";
  }
  for (const auto& t : sim.log().ticks) {
    worst_ec = std::max(worst_ec, std::abs(contouring_errors(oval(), t.state.X, t.state.Y, t.theta).e_c));
  }
  const bool lapped = sim.log().lap_times(ego).size() == 1;
  const double share = cycles ? static_cast<double>(converged) / cycles : 0.0;

  // closed loop past a car parked on the centerline
  const MpccConfig c;
  PredictedTrajectory parked;
  const RefPose at = oval().ref_pose(500.0);
  parked.positions.assign(static_cast<std::size_t>(c.N) + 1, Eigen::Vector2d(at.x, at.y));
  parked.progress = 500.0;
  parked.sigma = c.sigma;
  const ObstacleSet obstacles{{parked}};
  double theta = 300.0;
  const RefPose start = oval().ref_pose(theta);
  VehicleState x{start.x, start.y, start.phi, 50.0, 0, 0};
  MpccSolution plan;
  bool warm = false;
  double closest = 1e9;
  for (int cycle = 0; cycle < 120; ++cycle) {
    plan = solve(x, theta, oval(), obstacles, c, params(), warm ? &plan : nullptr);
    warm = true;
    for (int j = 0; j < 5; ++j) {
      x = integrate(x, plan.inputs[0], params(), DraftContext::none(), 0.01);
      closest = std::min(closest, std::hypot(x.X - at.x, x.Y - at.y));
    }
    theta = oval().project(x.X, x.Y, theta);
  }
  const double bound = c.p_schedule.back() * c.sigma - 0.1;
  const bool passed = theta > 550.0;
  return {lapped && worst_ec < 1.5 && share >= 0.95 && passed && closest >= bound,
          format("lap %s, max |e_c| %.3f m (< 1.5), Converged %.1f%% of %d cycles (>= 95%%), "
                 "static obstacle %s with min distance %.2f m (>= %.2f)",
                 lapped ? "completed" : "not completed", worst_ec, 100.0 * share, cycles,
                 passed ? "passed" : "not passed", closest, bound)};
}

Outcome case_two() {
  std::string detail;
  bool pass = true;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Scenario game = scenario("case2_stackelberg.json");
    Scenario ekf = scenario("case2_ekf.json");
    game.seed = ekf.seed = seed;
    const RaceLog a = run_scenario(game);
    const RaceLog b = run_scenario(ekf);
    const bool ok = a.collisions.empty() && !a.dnf && !b.collisions.empty() && b.dnf;
    pass = pass && ok;
    detail += format("%sseed %d: game %zu collisions, ekf %s", seed > 1 ? "; " : "", static_cast<int>(seed),
                     a.collisions.size(),
                     b.dnf ? format("DNF at %.2f s", b.collisions.front().t).c_str() : "no DNF");
  }
  return {pass, detail};
}

Outcome case_one() {
  int wins = 0, with = 0, without = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Scenario on = scenario("case1_planner_on.json");
    Scenario off = scenario("case1_planner_off.json");
    on.seed = off.seed = seed;
    const RaceLog a = run_scenario(on);
    const RaceLog b = run_scenario(off);
    const int ego = on.ego_index();
    const auto ta = a.lap_times(ego), tb = b.lap_times(ego);
    const double lap_on = !a.dnf && !ta.empty() ? ta.front() : INFINITY;
    const double lap_off = !b.dnf && !tb.empty() ? tb.front() : INFINITY;
    wins += lap_on <= lap_off && std::isfinite(lap_on);
    with += a.overtakes_by(ego);
    without += b.overtakes_by(ego);
    detail += format("seed %d: %.3f vs %.3f s; ", static_cast<int>(seed), lap_on, lap_off);
  }
  detail += format("planner on <= off in %d/5 (>= 4); ego overtakes over 5 laps with planner %d (>= 1), without %d",
                   wins, with, without);
  return {wins >= 4 && with >= 1, detail};
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism() {
  Scenario s = scenario("case2_stackelberg.json");
  s.duration = 4.0;
  std::vector<std::string> files;
  for (int run = 0; run < 2; ++run) {
    const RaceLog log = run_scenario(s);
    const std::string stem = "/tmp/racing_acceptance_" + std::to_string(run);
    write_tick_csv(log, stem + ".csv");
    write_events_json(log, stem + ".json");
    files.push_back(read_bytes(stem + ".csv"));
    files.push_back(read_bytes(stem + ".json"));
  }
  const bool same = files[0] == files[2] && files[1] == files[3] && !files[0].empty();
  return {same, format("two 4-vehicle runs with seed %d: tick log %zu bytes, logs %s", static_cast<int>(s.seed),
                       files[0].size(), same ? "bit-identical" : "differ")};
}

Outcome mode_selection() {
  bool ok = select_mode(4.0, 3.0) == ModeTag::Overtaking && select_mode(2.0, 3.0) == ModeTag::PositionKeeping &&
            select_mode(std::nullopt, 3.0) == ModeTag::Overtaking;
  int flips = 0;
  for (ModeTag start : {ModeTag::Overtaking, ModeTag::PositionKeeping}) {
    ModeHysteresis h(PlannerConfig{}.hysteresis_cycles, start);
    ModeTag current = start;
    for (int cycle = 0; cycle < 1000; ++cycle) {
      const ModeTag next = h.update(select_mode(3.0 + (cycle % 2 == 0 ? 0.1 : -0.1), 3.0));
      flips += next != current;
      current = next;
    }
  }
  return {ok && flips == 0, format("gap 4 -> Overtaking, gap 2 -> PositionKeeping, no opponent -> Overtaking: %s; "
                                   "mode flips over a 3 +/- 0.1 m oscillation: %d",
                                   ok ? "yes" : "no", flips)};
}

}  // namespace

int main(int argc, char** argv) {
  // Criteria listed after --known-red still print FAIL but do not fail the
  // exit status; any other failure does.
  std::set<int> only, known_red;
  bool red = false;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--known-red") {
      red = true;
    } else {
      (red ? known_red : only).insert(std::atoi(arg.c_str()));
    }
  }
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, model_fidelity}, {2, physics_invariants}, {3, hyperband_correctness}, {4, mpcc_contract},
      {5, case_two},       {6, case_one},           {7, determinism},           {8, mode_selection},
  };
  int failed = 0;
  for (const auto& [id, run] : criteria) {
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass && !known_red.count(id);
    std::printf("criterion %d: %s (%.1f s) %s%s\n", id, o.pass ? "PASS" : "FAIL", seconds_since(t0), o.detail.c_str(),
                !o.pass && known_red.count(id) ? " [known red]" : "");
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
