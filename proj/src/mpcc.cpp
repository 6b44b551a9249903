#include "racing/mpcc.hpp"

#include "racing/horizon.hpp"
#include "racing/qp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace racing {

namespace {

constexpr int kNu = 3;  // delta, D, v_theta
constexpr int kNz = 7;  // X, Y, psi, vx, vy, r, theta
constexpr double kSlackActive = 1e-3;
// Proximal weight on the range-normalized step; damps the SQP iteration
// without moving its fixed points.
constexpr double kProx = 1e-2;
constexpr double kDampingMin = 0.1;
constexpr double kDampingMax = 1e4;
// Collision rows farther than this beyond the required radius are left out.
constexpr double kCollisionWindow = 30.0;
// Below this lateral offset from an obstacle the passing side is chosen by
// the room left on the track rather than by the current offset.
constexpr double kSideHysteresis = 0.25;
constexpr double kTrailingBrakeShare = 0.5;
constexpr int kLineSearchSteps = 6;

double clamp_interval(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

// Everything that stays fixed across SQP iterations of one solve.
struct Setup {
  const VehicleState& x0;
  double theta0;
  const Track& track;
  const MpccConfig& cfg;
  const VehicleParams& params;
  std::vector<const PredictedTrajectory*> obstacles;
  // per obstacle: ahead of the ego and avoidable by braking alone
  std::vector<bool> trailing;
  std::vector<DraftContext> drafts;  // per stage
  std::optional<ControlInput> u_prev;
};

struct Rollout {
  std::vector<VehicleState> states;
  std::vector<double> thetas;
  double merit = std::numeric_limits<double>::infinity();
  double max_slack = 0.0;
  bool ok = false;
};

struct Iterate {
  std::vector<ControlInput> inputs;
  std::vector<double> v_thetas;
};

ControlInput clamp_box(const ControlInput& u, const MpccConfig& c) {
  return {clamp_interval(u.delta, c.u_min.delta, c.u_max.delta),
          clamp_interval(u.D, c.u_min.D, c.u_max.D)};
}

// Projects onto the box and rate bounds stage by stage. The previous input is
// inside the box, so each interval is non-empty.
void sequential_clamp(Iterate& w, const MpccConfig& c, const VehicleParams& p,
                      const std::optional<ControlInput>& u_prev) {
  std::optional<ControlInput> prev = u_prev;
  for (std::size_t k = 0; k < w.inputs.size(); ++k) {
    ControlInput u = clamp_box(w.inputs[k], c);
    if (prev) {
      u.delta = clamp_interval(u.delta, std::max(c.u_min.delta, prev->delta + c.du_min.delta),
                               std::min(c.u_max.delta, prev->delta + c.du_max.delta));
      u.D = clamp_interval(u.D, std::max(c.u_min.D, prev->D + c.du_min.D),
                           std::min(c.u_max.D, prev->D + c.du_max.D));
    }
    w.inputs[k] = u;
    prev = u;
    w.v_thetas[k] = clamp_interval(w.v_thetas[k], 0.0, p.v_max);
  }
}

std::vector<VehicleState> obstacle_states(const Setup& s, std::size_t k) {
  std::vector<VehicleState> out;
  out.reserve(s.obstacles.size());
  for (const auto* o : s.obstacles) out.push_back({o->positions[k].x(), o->positions[k].y(), 0, 0, 0, 0});
  return out;
}

double tube_slack(const Setup& s, const VehicleState& x, double theta) {
  const RefPose ref = s.track.ref_pose(theta);
  return std::max(0.0, std::hypot(x.X - ref.x, x.Y - ref.y) - ref.half_width);
}

double collision_slack(const Setup& s, const VehicleState& x, std::size_t k) {
  double worst = 0.0;
  for (const auto* o : s.obstacles) {
    const double need = s.cfg.p_schedule[k] * o->sigma;
    const double dist = std::hypot(x.X - o->positions[k].x(), x.Y - o->positions[k].y());
    worst = std::max(worst, need - dist);
  }
  return worst;
}

// Excess rear lateral velocity over the slip limit, m/s.
double slip_excess(const Setup& s, const VehicleState& x) {
  return std::max(0.0, std::abs(x.vy - s.params.l_R * x.r) - s.cfg.max_rear_slip * x.vx);
}

Rollout evaluate(const Setup& s, const Iterate& w) {
  const MpccConfig& c = s.cfg;
  Rollout r;
  r.states.resize(static_cast<std::size_t>(c.N) + 1);
  r.thetas.resize(static_cast<std::size_t>(c.N) + 1);
  r.states[0] = s.x0;
  r.thetas[0] = s.theta0;
  double cost = 0.0;
  double penalty = 0.0;
  try {
    for (int k = 0; k < c.N; ++k) {
      const ControlInput& u = w.inputs[k];
      r.states[k + 1] = integrate(r.states[k], u, s.params, s.drafts[k], c.dt);
      r.thetas[k + 1] = r.thetas[k] + w.v_thetas[k] * c.dt;
      ControlInput du{};
      if (k > 0) {
        du = {u.delta - w.inputs[k - 1].delta, u.D - w.inputs[k - 1].D};
        const double dv = w.v_thetas[k] - w.v_thetas[k - 1];
        cost += c.r_dvtheta * dv * dv;
      } else if (s.u_prev) {
        du = {u.delta - s.u_prev->delta, u.D - s.u_prev->D};
      }
      const auto& x = r.states[k + 1];
      const auto e = s.track.contouring_errors(x.X, x.Y, r.thetas[k + 1]);
      cost += stage_cost(e.e_c, e.e_l, w.v_thetas[k], u, du, c);
      for (double slack : {tube_slack(s, x, r.thetas[k + 1]),
                           collision_slack(s, x, static_cast<std::size_t>(k) + 1)}) {
        if (slack > 0.0) {
          penalty += c.slack_weight * (slack + slack * slack);
          r.max_slack = std::max(r.max_slack, slack);
        }
      }
      const double slip = slip_excess(s, x);
      penalty += c.slack_weight * (slip + slip * slip);
    }
  } catch (const IntegrationDiverged&) {
    return r;
  } catch (const InvalidStateError&) {
    return r;
  }
  r.merit = cost + penalty;
  r.ok = std::isfinite(r.merit);
  return r;
}

// True when the obstacle is ahead along the track and matching its speed
// under moderate braking does not reach it. Such obstacles are followed
// rather than dodged.
bool brakes_behind(const VehicleState& x0, double theta0, const Track& track,
                   const PredictedTrajectory& traj, const MpccConfig& c, const VehicleParams& p) {
  const RefPose ref = track.ref_pose(theta0);
  const Eigen::Vector2d tangent(std::cos(ref.phi), std::sin(ref.phi));
  const double gap = tangent.dot(traj.positions[0] - Eigen::Vector2d(x0.X, x0.Y));
  if (gap <= 0.0) return false;
  const double ego_speed = x0.vx * std::cos(x0.psi - ref.phi) - x0.vy * std::sin(x0.psi - ref.phi);
  const double opp_speed = tangent.dot(traj.positions[1] - traj.positions[0]) / c.dt;
  const double closing = ego_speed - opp_speed;
  if (closing <= 0.0) return true;
  const double decel = kTrailingBrakeShare * p.C_m / p.m;
  return closing * closing / (2.0 * decel) <= gap;
}

Setup make_setup(const VehicleState& x0, double theta0, const Track& track,
                 const ObstacleSet& obstacles, const MpccConfig& config,
                 const VehicleParams& params, const MpccSolution* warm) {
  Setup s{x0, theta0, track, config, params, {}, {}, {}, std::nullopt};
  const double base_reach = config.N * config.dt * params.v_max;
  for (const auto& traj : obstacles.trajectories) {
    if (traj.positions.size() != static_cast<std::size_t>(config.N) + 1) {
      throw std::invalid_argument("mpcc: obstacle trajectory must have N+1 samples");
    }
    const double reach = base_reach + config.p_schedule[0] * traj.sigma;
    const bool near = std::any_of(traj.positions.begin(), traj.positions.end(), [&](const auto& q) {
      return std::hypot(q.x() - x0.X, q.y() - x0.Y) <= reach;
    });
    if (near) {
      s.obstacles.push_back(&traj);
      s.trailing.push_back(brakes_behind(x0, theta0, track, traj, config, params));
    }
  }
  if (warm && !warm->inputs.empty()) s.u_prev = clamp_box(warm->inputs.front(), config);
  s.drafts.assign(static_cast<std::size_t>(config.N), DraftContext::none());
  return s;
}

// Drafting contexts follow the initial iterate and stay fixed for the solve,
// so that every line-search trial sees the same model.
void fix_drafts(Setup& s, const Iterate& w) {
  if (s.obstacles.empty()) return;
  VehicleState x = s.x0;
  for (int k = 0; k < s.cfg.N; ++k) {
    const auto others = obstacle_states(s, static_cast<std::size_t>(k));
    s.drafts[k] = draft_context(x, others, s.params.draft);
    try {
      x = integrate(x, w.inputs[k], s.params, s.drafts[k], s.cfg.dt);
    } catch (const std::runtime_error&) {
      return;
    }
  }
}

struct QpLayout {
  int n_inputs = 0;
  int n_track = 0;
  std::vector<int> collision_slack;  // variable index per stage, -1 if none
  int n = 0;
};

QpProblem build_qp(const Setup& s, const Iterate& w, const Rollout& roll, double damping,
                   QpLayout& layout) {
  const MpccConfig& c = s.cfg;
  const int N = c.N;
  const int nu = kNu * N;

  const auto models = linearize_horizon(roll.states, w.inputs, s.drafts, s.params, c.dt,
                                        c.parallel_linearization ? Execution::Parallel
                                                                 : Execution::Serial);

  // Sensitivities of the augmented state to the input step, one 7 x nu
  // block per stage.
  std::vector<Eigen::MatrixXd> G(static_cast<std::size_t>(N) + 1,
                                 Eigen::MatrixXd::Zero(kNz, nu));
  for (int k = 0; k < N; ++k) {
    const auto& m = models[k];
    const int cols = kNu * k;
    Eigen::MatrixXd& next = G[k + 1];
    if (cols > 0) {
      next.topLeftCorner(6, cols).noalias() = m.A * G[k].topLeftCorner(6, cols);
      next.row(6).head(cols) = G[k].row(6).head(cols);
    }
    next.block(0, kNu * k, 6, 2) = m.B;
    next(6, kNu * k + 2) = c.dt;
  }

  // Collision rows, collected first to size the slack block.
  struct CollisionRow {
    int k;
    Eigen::Vector2d normal;
    double rhs;
  };
  std::vector<CollisionRow> crows;
  layout.collision_slack.assign(static_cast<std::size_t>(N) + 1, -1);
  int n_cs = 0;
  for (int k = 1; k <= N; ++k) {
    const auto& x = roll.states[k];
    bool any = false;
    for (std::size_t oi = 0; oi < s.obstacles.size(); ++oi) {
      const PredictedTrajectory* o = s.obstacles[oi];
      const double need = c.p_schedule[k] * o->sigma;
      Eigen::Vector2d diff(x.X - o->positions[k].x(), x.Y - o->positions[k].y());
      const double dist = diff.norm();
      if (dist > need + kCollisionWindow) continue;
      // Any unit normal through the obstacle gives a conservative half-space.
      // Outside the disc the relative direction is used. Inside it the same
      // holds for a car that braking can stay behind; otherwise the lateral
      // track direction is used so that passing stays available.
      Eigen::Vector2d normal;
      const bool trailing = s.trailing[oi];
      if ((dist >= need || trailing) && dist > 1e-6) {
        normal = diff / dist;
      } else {
        const RefPose ref = s.track.ref_pose(roll.thetas[k]);
        const Eigen::Vector2d left(-std::sin(ref.phi), std::cos(ref.phi));
        const double lateral = left.dot(diff);
        double side = lateral >= 0.0 ? 1.0 : -1.0;
        if (std::abs(lateral) < kSideHysteresis) {
          const double obstacle_left =
              left.dot(Eigen::Vector2d(o->positions[k].x() - ref.x, o->positions[k].y() - ref.y));
          side = obstacle_left > 0.0 ? -1.0 : 1.0;
        }
        normal = side * left;
      }
      crows.push_back({k, normal, need - normal.dot(diff)});
      any = true;
    }
    if (any) layout.collision_slack[k] = n_cs++;
  }

  layout.n_inputs = nu;
  layout.n_track = N;
  layout.n = nu + 2 * N + n_cs;
  for (auto& idx : layout.collision_slack)
    if (idx >= 0) idx += nu + 2 * N;
  const int n = layout.n;

  QpProblem qp;
  qp.H = Eigen::MatrixXd::Zero(n, n);
  qp.g = Eigen::VectorXd::Zero(n);

  const double range[kNu] = {c.u_max.delta - c.u_min.delta, c.u_max.D - c.u_min.D,
                             s.params.v_max};
  for (int k = 0; k < N; ++k) {
    for (int i = 0; i < kNu; ++i) qp.H(kNu * k + i, kNu * k + i) += 2.0 * kProx / (range[i] * range[i]);
  }

  // contouring and lag residuals
  Eigen::RowVectorXd Jc(nu), Jl(nu), Jd(nu);
  for (int k = 1; k <= N; ++k) {
    const auto& x = roll.states[k];
    const RefPose ref = s.track.ref_pose(roll.thetas[k]);
    const double sp = std::sin(ref.phi), cp = std::cos(ref.phi);
    const double dx = x.X - ref.x, dy = x.Y - ref.y;
    const double ec = sp * dx - cp * dy;
    const double el = -cp * dx - sp * dy;
    const auto& Gk = G[k];
    Jc = sp * Gk.row(0) - cp * Gk.row(1) - ref.curvature * el * Gk.row(6);
    Jl = -cp * Gk.row(0) - sp * Gk.row(1) + (1.0 + ref.curvature * ec) * Gk.row(6);
    qp.H.topLeftCorner(nu, nu).noalias() += 2.0 * c.q_c * Jc.transpose() * Jc;
    qp.H.topLeftCorner(nu, nu).noalias() += 2.0 * c.q_l * Jl.transpose() * Jl;
    qp.g.head(nu) += 2.0 * c.q_c * ec * Jc.transpose() + 2.0 * c.q_l * el * Jl.transpose();
  }

  // input magnitude, rate and progress terms
  for (int k = 0; k < N; ++k) {
    const InputVector u = w.inputs[k].to_vector();
    const int ik = kNu * k;
    qp.H.block(ik, ik, 2, 2) += 2.0 * c.R_u;
    qp.g.segment(ik, 2) += 2.0 * c.R_u * u;
    qp.g(ik + 2) -= c.gamma;
    if (k > 0) {
      const int ip = ik - kNu;
      const InputVector du = u - w.inputs[k - 1].to_vector();
      qp.H.block(ik, ik, 2, 2) += 2.0 * c.R_du;
      qp.H.block(ip, ip, 2, 2) += 2.0 * c.R_du;
      qp.H.block(ik, ip, 2, 2) -= 2.0 * c.R_du;
      qp.H.block(ip, ik, 2, 2) -= 2.0 * c.R_du;
      qp.g.segment(ik, 2) += 2.0 * c.R_du * du;
      qp.g.segment(ip, 2) -= 2.0 * c.R_du * du;
      const double dv = w.v_thetas[k] - w.v_thetas[k - 1];
      qp.H(ik + 2, ik + 2) += 2.0 * c.r_dvtheta;
      qp.H(ip + 2, ip + 2) += 2.0 * c.r_dvtheta;
      qp.H(ik + 2, ip + 2) -= 2.0 * c.r_dvtheta;
      qp.H(ip + 2, ik + 2) -= 2.0 * c.r_dvtheta;
      qp.g(ik + 2) += 2.0 * c.r_dvtheta * dv;
      qp.g(ip + 2) -= 2.0 * c.r_dvtheta * dv;
    } else if (s.u_prev) {
      const InputVector du = u - s.u_prev->to_vector();
      qp.H.block(0, 0, 2, 2) += 2.0 * c.R_du;
      qp.g.segment(0, 2) += 2.0 * c.R_du * du;
    }
  }
  for (int i = nu; i < n; ++i) {
    qp.H(i, i) += 2.0 * c.slack_weight;
    qp.g(i) += c.slack_weight;
  }

  for (int i = 0; i < nu; ++i) qp.H(i, i) *= 1.0 + damping;

  // Constraints C d >= b.
  const int rate_rows = 4 * (N - 1) + (s.u_prev ? 4 : 0);
  const int m = 2 * nu + rate_rows + 3 * N + static_cast<int>(crows.size()) + (n - nu);
  qp.C = Eigen::MatrixXd::Zero(m, n);
  qp.b = Eigen::VectorXd::Zero(m);
  int row = 0;
  const double lo[kNu] = {c.u_min.delta, c.u_min.D, 0.0};
  const double hi[kNu] = {c.u_max.delta, c.u_max.D, s.params.v_max};
  const double dlo[2] = {c.du_min.delta, c.du_min.D};
  const double dhi[2] = {c.du_max.delta, c.du_max.D};
  for (int k = 0; k < N; ++k) {
    const double cur[kNu] = {w.inputs[k].delta, w.inputs[k].D, w.v_thetas[k]};
    for (int i = 0; i < kNu; ++i) {
      const int col = kNu * k + i;
      qp.C(row, col) = 1.0;
      qp.b(row++) = lo[i] - cur[i];
      qp.C(row, col) = -1.0;
      qp.b(row++) = cur[i] - hi[i];
    }
    std::optional<InputVector> prev;
    if (k > 0) prev = w.inputs[k - 1].to_vector();
    else if (s.u_prev) prev = s.u_prev->to_vector();
    if (!prev) continue;
    for (int i = 0; i < 2; ++i) {
      const int col = kNu * k + i;
      const double rate = cur[i] - (*prev)(i);
      qp.C(row, col) = 1.0;
      if (k > 0) qp.C(row, col - kNu) = -1.0;
      qp.b(row++) = dlo[i] - rate;
      qp.C(row, col) = -1.0;
      if (k > 0) qp.C(row, col - kNu) = 1.0;
      qp.b(row++) = rate - dhi[i];
    }
  }
  for (int k = 1; k <= N; ++k) {
    const auto& x = roll.states[k];
    const RefPose ref = s.track.ref_pose(roll.thetas[k]);
    const double sp = std::sin(ref.phi), cp = std::cos(ref.phi);
    const double dx = x.X - ref.x, dy = x.Y - ref.y;
    const double ec = sp * dx - cp * dy;
    const double el = -cp * dx - sp * dy;
    const double d = std::hypot(ec, el);
    const int slack = nu + (k - 1);
    qp.C(row, slack) = 1.0;
    if (d > 1e-6) {
      const auto& Gk = G[k];
      Jc = sp * Gk.row(0) - cp * Gk.row(1) - ref.curvature * el * Gk.row(6);
      Jl = -cp * Gk.row(0) - sp * Gk.row(1) + (1.0 + ref.curvature * ec) * Gk.row(6);
      Jd = (ec * Jc + el * Jl) / d;
      qp.C.row(row).head(nu) = -Jd;
    }
    qp.b(row++) = d - ref.half_width;
  }
  // rear slip, both signs, sharing one slack per stage
  for (int k = 1; k <= N; ++k) {
    const auto& x = roll.states[k];
    const auto& Gk = G[k];
    const double lateral = x.vy - s.params.l_R * x.r;
    const Eigen::RowVectorXd Jlat = Gk.row(4) - s.params.l_R * Gk.row(5);
    const Eigen::RowVectorXd Jvx = c.max_rear_slip * Gk.row(3);
    const int slack = nu + N + (k - 1);
    qp.C.row(row).head(nu) = Jvx - Jlat;
    qp.C(row, slack) = 1.0;
    qp.b(row++) = lateral - c.max_rear_slip * x.vx;
    qp.C.row(row).head(nu) = Jvx + Jlat;
    qp.C(row, slack) = 1.0;
    qp.b(row++) = -lateral - c.max_rear_slip * x.vx;
  }
  for (const auto& cr : crows) {
    const auto& Gk = G[cr.k];
    qp.C.row(row).head(nu) = cr.normal.x() * Gk.row(0) + cr.normal.y() * Gk.row(1);
    qp.C(row, layout.collision_slack[cr.k]) = 1.0;
    qp.b(row++) = cr.rhs;
  }
  for (int i = nu; i < n; ++i) {
    qp.C(row, i) = 1.0;
    qp.b(row++) = 0.0;
  }
  return qp;
}

MpccSolution to_solution(const Iterate& w, const Rollout& r, bool converged,
                         int iterations) {
  MpccSolution sol;
  sol.states = r.states;
  sol.inputs = w.inputs;
  sol.thetas = r.thetas;
  sol.v_thetas = w.v_thetas;
  sol.cost = r.merit;
  sol.terminal_progress = r.thetas.back();
  sol.max_slack = r.max_slack;
  sol.converged = converged;
  sol.iterations = iterations;
  if (r.max_slack > kSlackActive) {
    sol.status = SolverStatus::SlackActive;
  } else {
    sol.status = converged ? SolverStatus::Converged : SolverStatus::MaxIters;
  }
  return sol;
}

Iterate make_initial(const VehicleState& x0, double theta0, const Track& track,
                     const MpccConfig& config, const VehicleParams& params,
                     const MpccSolution* warm, const std::optional<ControlInput>& u_prev) {
  Iterate w;
  const auto N = static_cast<std::size_t>(config.N);
  if (warm && warm->inputs.size() == N && warm->v_thetas.size() == N) {
    w.inputs.assign(warm->inputs.begin() + 1, warm->inputs.end());
    w.inputs.push_back(warm->inputs.back());
    w.v_thetas.assign(warm->v_thetas.begin() + 1, warm->v_thetas.end());
    w.v_thetas.push_back(warm->v_thetas.back());
  } else {
    const double v = clamp_interval(x0.vx, 0.0, params.v_max);
    const double wheelbase = params.l_F + params.l_R;
    const double hold = (params.C_r + params.C_d * v * v) / params.C_m;
    for (std::size_t k = 0; k < N; ++k) {
      const double kappa = track.ref_pose(theta0 + static_cast<double>(k) * v * config.dt).curvature;
      w.inputs.push_back({std::atan(kappa * wheelbase), hold});
      w.v_thetas.push_back(v);
    }
  }
  sequential_clamp(w, config, params, u_prev);
  return w;
}

}  // namespace

std::vector<double> MpccConfig::linear_p_schedule(int N, double p0, double pN) {
  std::vector<double> out(static_cast<std::size_t>(std::max(N, 0)) + 1);
  for (int k = 0; k <= N; ++k) out[k] = N > 0 ? p0 + (pN - p0) * k / N : p0;
  return out;
}

void MpccConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("mpcc config: ") + what);
  };
  require(N >= 1, "N must be >= 1");
  require(dt > 0.0, "dt must be > 0");
  require(q_c >= 0.0 && q_l >= 0.0 && gamma >= 0.0 && slack_weight >= 0.0,
          "q_c, q_l, gamma and slack_weight must be >= 0");
  require(r_dvtheta >= 0.0, "r_dvtheta must be >= 0");
  require(max_rear_slip > 0.0, "max_rear_slip must be > 0");
  require(R_u(0, 1) == 0.0 && R_u(1, 0) == 0.0 && R_u(0, 0) >= 0.0 && R_u(1, 1) >= 0.0,
          "R_u must be diagonal and non-negative");
  require(R_du(0, 1) == 0.0 && R_du(1, 0) == 0.0 && R_du(0, 0) >= 0.0 && R_du(1, 1) >= 0.0,
          "R_du must be diagonal and non-negative");
  require(u_min.delta < u_max.delta && u_min.D < u_max.D, "u_min must be below u_max");
  require(du_min.delta <= 0.0 && du_max.delta >= 0.0 && du_min.D <= 0.0 && du_max.D >= 0.0,
          "rate bounds must contain zero");
  require(sigma >= 0.0, "sigma must be >= 0");
  require(p_schedule.size() == static_cast<std::size_t>(N) + 1, "p_schedule needs N+1 entries");
  for (std::size_t k = 0; k < p_schedule.size(); ++k) {
    require(p_schedule[k] >= 0.0, "p_schedule entries must be >= 0");
    if (k > 0) require(p_schedule[k] <= p_schedule[k - 1], "p_schedule must be non-increasing");
  }
  require(max_sqp_iters >= 1, "max_sqp_iters must be >= 1");
  require(convergence_tol > 0.0, "convergence_tol must be > 0");
}

const char* to_string(SolverStatus status) {
  switch (status) {
    case SolverStatus::Converged: return "Converged";
    case SolverStatus::MaxIters: return "MaxIters";
    case SolverStatus::SlackActive: return "SlackActive";
  }
  return "?";
}

double stage_cost(double e_c, double e_l, double v_theta, const ControlInput& u,
                  const ControlInput& du, const MpccConfig& c) {
  const InputVector uv = u.to_vector();
  const InputVector dv = du.to_vector();
  return c.q_c * e_c * e_c + c.q_l * e_l * e_l - c.gamma * v_theta + uv.dot(c.R_u * uv) +
         dv.dot(c.R_du * dv);
}

double collision_margin(const Eigen::Vector2d& ego, const Eigen::Vector2d& opp, int k,
                        const MpccConfig& config) {
  if (k < 0 || k >= static_cast<int>(config.p_schedule.size())) {
    throw std::out_of_range("collision_margin: stage index outside the horizon");
  }
  return (ego - opp).norm() - config.p_schedule[k] * config.sigma;
}

double obstacle_reach(const MpccConfig& config, const VehicleParams& params) {
  return config.N * config.dt * params.v_max + config.p_schedule.front() * config.sigma;
}

void initial_guess(const VehicleState& x0, double theta0, const Track& track,
                   const MpccConfig& config, const VehicleParams& params,
                   const MpccSolution* warm_start, std::vector<ControlInput>& inputs,
                   std::vector<double>& v_thetas) {
  std::optional<ControlInput> u_prev;
  if (warm_start && !warm_start->inputs.empty()) u_prev = clamp_box(warm_start->inputs.front(), config);
  Iterate w = make_initial(x0, theta0, track, config, params, warm_start, u_prev);
  inputs = std::move(w.inputs);
  v_thetas = std::move(w.v_thetas);
}

double mpcc_objective(const VehicleState& x0, double theta0, const Track& track,
                      const ObstacleSet& obstacles, const MpccConfig& config,
                      const VehicleParams& params, const std::vector<ControlInput>& inputs,
                      const std::vector<double>& v_thetas, const MpccSolution* warm_start) {
  config.validate();
  Setup s = make_setup(x0, theta0, track, obstacles, config, params, warm_start);
  fix_drafts(s, make_initial(x0, theta0, track, config, params, warm_start, s.u_prev));
  if (inputs.size() != static_cast<std::size_t>(config.N) || v_thetas.size() != inputs.size()) {
    throw std::invalid_argument("mpcc_objective: expected N inputs");
  }
  return evaluate(s, {inputs, v_thetas}).merit;
}

MpccSolution solve(const VehicleState& x0, double theta0, const Track& track,
                   const ObstacleSet& obstacles, const MpccConfig& config,
                   const VehicleParams& params, const MpccSolution* warm_start) {
  if (!x0.finite() || !std::isfinite(theta0)) throw InvalidStateError("mpcc: non-finite initial state");
  config.validate();
  Setup s = make_setup(x0, theta0, track, obstacles, config, params, warm_start);
  Iterate w = make_initial(x0, theta0, track, config, params, warm_start, s.u_prev);
  fix_drafts(s, w);

  Rollout cur = evaluate(s, w);
  if (!cur.ok) {
    throw SolverFailure("mpcc: initial guess cannot be simulated", to_solution(w, cur, false, 0));
  }

  const double range[kNu] = {config.u_max.delta - config.u_min.delta,
                             config.u_max.D - config.u_min.D, params.v_max};
  DenseQpSolver qp_solver;
  double damping = 0.0;
  bool converged = false;
  int iter = 0;
  while (iter < config.max_sqp_iters) {
    ++iter;
    QpLayout layout;
    QpProblem qp;
    QpResult res;
    try {
      qp = build_qp(s, w, cur, damping, layout);
      res = qp_solver.solve(qp);
    } catch (const QpSingularError& e) {
      throw SolverFailure(std::string("mpcc: ") + e.what(), to_solution(w, cur, false, iter));
    } catch (const std::runtime_error& e) {
      throw SolverFailure(std::string("mpcc: ") + e.what(), to_solution(w, cur, false, iter));
    }
    if (res.status == QpStatus::Infeasible) {
      throw SolverFailure("mpcc: QP infeasible", to_solution(w, cur, false, iter));
    }
    if (res.status != QpStatus::Optimal) break;
    double step = 0.0;
    for (int k = 0; k < config.N; ++k)
      for (int i = 0; i < kNu; ++i) step = std::max(step, std::abs(res.x(kNu * k + i)) / range[i]);

    double alpha = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < kLineSearchSteps; ++ls, alpha *= 0.5) {
      Iterate trial = w;
      for (int k = 0; k < config.N; ++k) {
        trial.inputs[k].delta += alpha * res.x(kNu * k);
        trial.inputs[k].D += alpha * res.x(kNu * k + 1);
        trial.v_thetas[k] += alpha * res.x(kNu * k + 2);
      }
      sequential_clamp(trial, config, params, s.u_prev);
      Rollout r = evaluate(s, trial);
      if (r.ok && r.merit < cur.merit) {
        w = std::move(trial);
        cur = std::move(r);
        accepted = true;
        break;
      }
    }
    if (step < config.convergence_tol) {
      converged = true;
      break;
    }
    // Levenberg-Marquardt style damping: trust the model more after a full
    // step, less after a shortened or rejected one.
    if (accepted && alpha == 1.0) {
      damping = damping * 0.25 < kDampingMin ? 0.0 : damping * 0.25;
    } else {
      damping = std::min(std::max(damping, kDampingMin) * (accepted ? 4.0 : 16.0), kDampingMax);
    }
  }
  return to_solution(w, cur, converged, iter);
}

}  // namespace racing
