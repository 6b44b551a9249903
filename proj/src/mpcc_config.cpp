#include "config_json.hpp"

#include <algorithm>

namespace racing {

namespace detail {

void reject_unknown(const json& j, std::initializer_list<const char*> allowed,
                    const std::string& where) {
  for (const auto& item : j.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* a) { return item.key() == a; });
    if (!known) throw ConfigError(where + ": unknown field '" + item.key() + "'");
  }
}

namespace {

double number(const json& j, const char* key, double fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_number()) throw ConfigError(std::string("mpcc config: field '") + key + "' is not a number");
  return it->get<double>();
}

// [delta, D] pairs for bounds and diagonal weights.
Eigen::Vector2d pair(const json& j, const char* key, const Eigen::Vector2d& fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number() || !(*it)[1].is_number()) {
    throw ConfigError(std::string("mpcc config: field '") + key + "' must be [delta, D]");
  }
  return {(*it)[0].get<double>(), (*it)[1].get<double>()};
}

}  // namespace

MpccConfig mpcc_config_from_json(const json& j, MpccConfig c) {
  if (!j.is_object()) throw ConfigError("mpcc config: expected a JSON object");
  reject_unknown(j,
                 {"N", "dt", "q_c", "q_l", "gamma", "R_u", "R_du", "u_min", "u_max", "du_min",
                  "du_max", "sigma", "p_schedule", "slack_weight", "max_sqp_iters",
                  "convergence_tol", "r_dvtheta", "max_rear_slip"},
                 "mpcc config");
  const int old_n = c.N;
  if (j.contains("N")) {
    if (!j["N"].is_number_integer()) throw ConfigError("mpcc config: field 'N' must be an integer");
    c.N = j["N"].get<int>();
  }
  c.dt = number(j, "dt", c.dt);
  c.q_c = number(j, "q_c", c.q_c);
  c.q_l = number(j, "q_l", c.q_l);
  c.gamma = number(j, "gamma", c.gamma);
  c.R_u = pair(j, "R_u", c.R_u.diagonal()).asDiagonal();
  c.R_du = pair(j, "R_du", c.R_du.diagonal()).asDiagonal();
  c.u_min = ControlInput::from_vector(pair(j, "u_min", c.u_min.to_vector()));
  c.u_max = ControlInput::from_vector(pair(j, "u_max", c.u_max.to_vector()));
  c.du_min = ControlInput::from_vector(pair(j, "du_min", c.du_min.to_vector()));
  c.du_max = ControlInput::from_vector(pair(j, "du_max", c.du_max.to_vector()));
  c.sigma = number(j, "sigma", c.sigma);
  c.slack_weight = number(j, "slack_weight", c.slack_weight);
  c.convergence_tol = number(j, "convergence_tol", c.convergence_tol);
  c.r_dvtheta = number(j, "r_dvtheta", c.r_dvtheta);
  c.max_rear_slip = number(j, "max_rear_slip", c.max_rear_slip);
  if (j.contains("max_sqp_iters")) {
    if (!j["max_sqp_iters"].is_number_integer()) {
      throw ConfigError("mpcc config: field 'max_sqp_iters' must be an integer");
    }
    c.max_sqp_iters = j["max_sqp_iters"].get<int>();
  }
  if (j.contains("p_schedule")) {
    const auto& p = j["p_schedule"];
    if (p.is_array()) {
      c.p_schedule = p.get<std::vector<double>>();
    } else if (p.is_object()) {
      reject_unknown(p, {"p0", "pN"}, "mpcc config p_schedule");
      c.p_schedule = MpccConfig::linear_p_schedule(c.N, p.value("p0", 3.0), p.value("pN", 1.0));
    } else {
      throw ConfigError("mpcc config: 'p_schedule' must be an array or {p0, pN}");
    }
  } else if (c.N != old_n) {
    c.p_schedule = MpccConfig::linear_p_schedule(c.N);
  }
  c.validate();
  return c;
}

json mpcc_config_to_json(const MpccConfig& c) {
  auto pair_of = [](const Eigen::Vector2d& v) { return json::array({v(0), v(1)}); };
  json j;
  j["N"] = c.N;
  j["dt"] = c.dt;
  j["q_c"] = c.q_c;
  j["q_l"] = c.q_l;
  j["gamma"] = c.gamma;
  j["R_u"] = pair_of(c.R_u.diagonal());
  j["R_du"] = pair_of(c.R_du.diagonal());
  j["u_min"] = pair_of(c.u_min.to_vector());
  j["u_max"] = pair_of(c.u_max.to_vector());
  j["du_min"] = pair_of(c.du_min.to_vector());
  j["du_max"] = pair_of(c.du_max.to_vector());
  j["sigma"] = c.sigma;
  j["p_schedule"] = c.p_schedule;
  j["slack_weight"] = c.slack_weight;
  j["max_sqp_iters"] = c.max_sqp_iters;
  j["convergence_tol"] = c.convergence_tol;
  j["r_dvtheta"] = c.r_dvtheta;
  j["max_rear_slip"] = c.max_rear_slip;
  return j;
}

}  // namespace detail

MpccConfig mpcc_config_from_json_text(const std::string& text) {
  detail::json j;
  try {
    j = detail::json::parse(text);
  } catch (const detail::json::parse_error& e) {
    throw ConfigError(std::string("mpcc config: ") + e.what());
  }
  return detail::mpcc_config_from_json(j);
}

std::string mpcc_config_to_json_text(const MpccConfig& config) {
  return detail::mpcc_config_to_json(config).dump(2);
}

}  // namespace racing
