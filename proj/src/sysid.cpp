#include "racing/sysid.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace racing {

namespace {

using Member = double VehicleParams::*;

const std::map<std::string, Member>& parameter_members() {
  static const std::map<std::string, Member> members = {
      {"B_F", &VehicleParams::B_F}, {"C_F", &VehicleParams::C_F}, {"D_F", &VehicleParams::D_F},
      {"B_R", &VehicleParams::B_R}, {"C_R", &VehicleParams::C_R}, {"D_R", &VehicleParams::D_R},
      {"C_m", &VehicleParams::C_m}, {"C_r", &VehicleParams::C_r}, {"C_d", &VehicleParams::C_d},
  };
  return members;
}

double clamp_to(const ParamRange& p, double v) { return std::min(std::max(v, p.lower), p.upper); }

struct Window {
  std::size_t episode;
  std::size_t start;
};

std::vector<Window> windows_of(const Dataset& dataset, int horizon) {
  std::vector<Window> out;
  for (std::size_t e = 0; e < dataset.episodes.size(); ++e) {
    const auto& ep = dataset.episodes[e];
    const std::size_t n = std::min(ep.states.size(), ep.inputs.size() + 1);
    for (std::size_t i = 0; i + static_cast<std::size_t>(horizon) < n; ++i) out.push_back({e, i});
  }
  return out;
}

// Weighted RMS error of one window; negative when the rollout diverges.
double window_error(const Episode& ep, std::size_t start, const VehicleParams& p,
                    const LossOptions& o) {
  VehicleState x = ep.states[start];
  double sum = 0.0;
  try {
    for (int j = 0; j < o.horizon; ++j) {
      const std::size_t i = start + static_cast<std::size_t>(j);
      x = integrate(x, ep.inputs[i], p, DraftContext::none(), ep.dt);
      const VehicleState& ref = ep.states[i + 1];
      const double dx = x.X - ref.X, dy = x.Y - ref.Y;
      const double dvx = x.vx - ref.vx, dvy = x.vy - ref.vy, dr = x.r - ref.r;
      sum += o.w_position * (dx * dx + dy * dy) + o.w_vx * dvx * dvx + o.w_vy * dvy * dvy +
             o.w_yaw_rate * dr * dr;
    }
  } catch (const IntegrationDiverged&) {
    return -1.0;
  } catch (const InvalidStateError&) {
    return -1.0;
  }
  const double rms = std::sqrt(sum / o.horizon);
  return std::isfinite(rms) ? rms : -1.0;
}

}  // namespace

const std::vector<std::string>& identifiable_parameters() {
  static const std::vector<std::string> names = {"B_F", "C_F", "D_F", "B_R", "C_R",
                                                 "D_R", "C_m", "C_r", "C_d"};
  return names;
}

void ParamSpace::validate() const {
  if (ranges.empty()) throw ConfigError("param space: no parameters");
  std::set<std::string> seen;
  for (const auto& r : ranges) {
    if (!parameter_members().count(r.name)) throw ConfigError("param space: unknown parameter " + r.name);
    if (!seen.insert(r.name).second) throw ConfigError("param space: duplicate parameter " + r.name);
    if (!std::isfinite(r.lower) || !std::isfinite(r.upper) || r.lower > r.upper) {
      throw ConfigError("param space: " + r.name + " needs finite lower <= upper");
    }
    if (!(r.mutation_std >= 0.0)) throw ConfigError("param space: " + r.name + " mutation_std must be >= 0");
  }
}

ParamSpace param_space_from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("param space: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("param space: expected an object keyed by parameter name");
  ParamSpace space;
  // Keep the canonical parameter order regardless of the file order, so a
  // seed means the same thing for equivalent files.
  for (const auto& name : identifiable_parameters()) {
    if (!j.contains(name)) continue;
    const auto& e = j.at(name);
    for (const auto& [key, _] : e.items()) {
      if (key != "lower" && key != "upper" && key != "mutation_std") {
        throw ConfigError("param space: unknown field " + name + "." + key);
      }
    }
    try {
      space.ranges.push_back({name, e.at("lower").get<double>(), e.at("upper").get<double>(),
                              e.at("mutation_std").get<double>()});
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("param space: " + name + " needs numeric lower, upper and mutation_std");
    }
  }
  for (const auto& [key, _] : j.items()) {
    if (!parameter_members().count(key)) throw ConfigError("param space: unknown parameter " + key);
  }
  space.validate();
  return space;
}

ParamSpace load_param_space(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("param space: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return param_space_from_json_text(ss.str());
}

VehicleParams apply_configuration(const Configuration& config, const VehicleParams& base) {
  VehicleParams p = base;
  for (const auto& [name, value] : config.values) {
    auto it = parameter_members().find(name);
    if (it == parameter_members().end()) throw ConfigError("configuration: unknown parameter " + name);
    p.*(it->second) = value;
  }
  return p;
}

std::string configuration_to_json_text(const Configuration& config) {
  nlohmann::ordered_json j;
  for (const auto& name : identifiable_parameters()) {
    auto it = config.values.find(name);
    if (it != config.values.end()) j[name] = it->second;
  }
  if (config.loss) j["loss"] = *config.loss;
  return j.dump(2);
}

Dataset load_dataset_from_log(const std::string& path, std::optional<int> vehicle) {
  std::ifstream in(path);
  if (!in) throw ConfigError("dataset: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("dataset: empty log " + path);
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  auto column = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError("dataset: log lacks column " + name);
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t ct = column("t"), cv = column("vehicle"), cX = column("X"), cY = column("Y"),
                    cpsi = column("psi"), cvx = column("vx"), cvy = column("vy"), cr = column("r"),
                    cd = column("delta"), cD = column("D");

  std::map<int, std::vector<std::pair<double, std::pair<VehicleState, ControlInput>>>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < header.size()) {
      throw ConfigError("dataset: short row at line " + std::to_string(line_no));
    }
    try {
      const int id = std::stoi(cells[cv]);
      if (vehicle && id != *vehicle) continue;
      VehicleState x{std::stod(cells[cX]), std::stod(cells[cY]), std::stod(cells[cpsi]),
                     std::stod(cells[cvx]), std::stod(cells[cvy]), std::stod(cells[cr])};
      rows[id].push_back({std::stod(cells[ct]), {x, {std::stod(cells[cd]), std::stod(cells[cD])}}});
    } catch (const std::logic_error&) {
      throw ConfigError("dataset: malformed number at line " + std::to_string(line_no));
    }
  }

  Dataset d;
  for (auto& [id, samples] : rows) {
    if (samples.size() < 2) continue;
    Episode ep;
    ep.dt = samples[1].first - samples[0].first;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (i > 0 && std::abs(samples[i].first - samples[i - 1].first - ep.dt) > 1e-6) {
        throw ConfigError("dataset: vehicle " + std::to_string(id) + " has a non-uniform time step");
      }
      ep.states.push_back(samples[i].second.first);
      if (i + 1 < samples.size()) ep.inputs.push_back(samples[i].second.second);
    }
    if (!(ep.dt > 0.0)) throw ConfigError("dataset: non-increasing time stamps");
    d.episodes.push_back(std::move(ep));
  }
  if (d.episodes.empty()) throw ConfigError("dataset: no usable samples in " + path);
  return d;
}

double evaluation_loss(const Configuration& config, const Dataset& dataset,
                       const VehicleParams& base, const LossOptions& options) {
  if (options.horizon < 1) throw std::invalid_argument("evaluation_loss: horizon must be >= 1");
  const auto windows = windows_of(dataset, options.horizon);
  if (windows.empty()) throw std::invalid_argument("evaluation_loss: dataset has no complete window");
  const VehicleParams p = apply_configuration(config, base);

  std::vector<double> errors(windows.size());
  const auto n = static_cast<long>(windows.size());
  if (options.execution == Execution::Parallel) {
#pragma omp parallel for schedule(static)
    for (long w = 0; w < n; ++w) {
      errors[w] = window_error(dataset.episodes[windows[w].episode], windows[w].start, p, options);
    }
  } else {
    for (long w = 0; w < n; ++w) {
      errors[w] = window_error(dataset.episodes[windows[w].episode], windows[w].start, p, options);
    }
  }
  // summed in window order so both modes agree bit for bit
  double sum = 0.0;
  for (double e : errors) {
    if (e < 0.0) return kDivergedLoss;
    sum += e;
  }
  return sum / static_cast<double>(errors.size());
}

std::vector<Configuration> get_hyperparameter_configuration(int n, const ParamSpace& space,
                                                            std::mt19937_64& rng) {
  if (n < 1) throw std::invalid_argument("get_hyperparameter_configuration: n must be >= 1");
  std::vector<Configuration> out(static_cast<std::size_t>(n));
  for (auto& c : out) {
    for (const auto& r : space.ranges) {
      const double mid = 0.5 * (r.lower + r.upper);
      const double std = 0.25 * (r.upper - r.lower);
      if (std > 0.0) {
        std::normal_distribution<double> dist(mid, std);
        c.values[r.name] = clamp_to(r, dist(rng));
      } else {
        c.values[r.name] = mid;
      }
    }
  }
  return out;
}

Configuration mutate_then_return_eval_loss(const Configuration& start, int rounds,
                                           const Dataset& dataset, const ParamSpace& space,
                                           const VehicleParams& base, std::mt19937_64& rng,
                                           const LossOptions& options) {
  if (rounds < 1) throw std::invalid_argument("mutate_then_return_eval_loss: rounds must be >= 1");
  Configuration best = start;
  if (!best.loss) best.loss = evaluation_loss(best, dataset, base, options);
  for (int round = 0; round < rounds; ++round) {
    Configuration child = best;
    for (const auto& r : space.ranges) {
      if (r.mutation_std <= 0.0) continue;
      std::normal_distribution<double> noise(0.0, r.mutation_std);
      child.values[r.name] = clamp_to(r, child.values[r.name] + noise(rng));
    }
    child.loss = evaluation_loss(child, dataset, base, options);
    if (*child.loss < *best.loss) best = std::move(child);
  }
  return best;
}

std::vector<Configuration> select_top_k_configuration(const std::vector<Configuration>& configs,
                                                      const std::vector<double>& losses,
                                                      std::size_t k) {
  if (configs.size() != losses.size()) {
    throw std::invalid_argument("select_top_k_configuration: one loss per configuration");
  }
  std::vector<std::size_t> order(configs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return losses[a] < losses[b]; });
  order.resize(std::min(k, order.size()));
  std::vector<Configuration> out;
  for (std::size_t i : order) out.push_back(configs[i]);
  return out;
}

HyperbandSchedule hyperband_schedule(int R, int eta) {
  if (R < 1) throw std::invalid_argument("hyperband: R must be >= 1");
  if (eta < 2) throw std::invalid_argument("hyperband: eta must be >= 2");
  HyperbandSchedule plan;
  long power = 1;  // eta^s_max, kept integral to avoid floor(log) rounding
  while (power * eta <= R) {
    power *= eta;
    ++plan.s_max;
  }
  plan.budget = static_cast<double>(plan.s_max + 1) * R;
  for (int s = plan.s_max; s >= 0; --s) {
    long eta_s = 1;
    for (int i = 0; i < s; ++i) eta_s *= eta;
    BracketPlan b;
    b.s = s;
    // ceil((B/R) * eta^s / (s+1)) with B/R = s_max + 1
    b.n = static_cast<int>(((plan.s_max + 1) * eta_s + s) / (s + 1));
    b.r = static_cast<double>(R) / static_cast<double>(eta_s);
    long eta_i = 1;
    for (int i = 0; i <= s; ++i) {
      RungPlan rung;
      rung.n = static_cast<int>(b.n / eta_i);
      rung.rounds = std::max(1, static_cast<int>(std::floor(b.r * static_cast<double>(eta_i) + 1e-9)));
      b.rungs.push_back(rung);
      eta_i *= eta;
    }
    plan.brackets.push_back(b);
  }
  return plan;
}

std::mt19937_64 sub_generator(std::uint64_t seed, int bracket, int rung, int index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(bracket), static_cast<std::uint32_t>(rung),
                    static_cast<std::uint32_t>(index)};
  return std::mt19937_64(seq);
}

HyperbandResult hyperband(int R, int eta, const ParamSpace& space, const Dataset& dataset,
                          const VehicleParams& base, std::uint64_t seed,
                          const HyperbandOptions& options) {
  space.validate();
  const HyperbandSchedule plan = hyperband_schedule(R, eta);
  HyperbandResult result;
  bool have_best = false;
  for (const auto& bracket : plan.brackets) {
    // rung -1 seeds the initial draw of the bracket
    std::mt19937_64 draw = sub_generator(seed, bracket.s, -1, 0);
    std::vector<Configuration> T = get_hyperparameter_configuration(bracket.n, space, draw);
    long used = 0;
    for (int i = 0; i <= bracket.s; ++i) {
      const int rounds = bracket.rungs[static_cast<std::size_t>(i)].rounds;
      std::vector<Configuration> evaluated(T.size());
      const auto count = static_cast<long>(T.size());
      auto run = [&](long idx) {
        std::mt19937_64 rng = sub_generator(seed, bracket.s, i, static_cast<int>(idx));
        evaluated[idx] = mutate_then_return_eval_loss(T[idx], rounds, dataset, space, base, rng, options.loss);
      };
      if (options.execution == Execution::Parallel) {
#pragma omp parallel for schedule(dynamic)
        for (long idx = 0; idx < count; ++idx) run(idx);
      } else {
        for (long idx = 0; idx < count; ++idx) run(idx);
      }
      used += count * rounds;
      std::vector<double> losses;
      for (long idx = 0; idx < count; ++idx) {
        const auto& c = evaluated[idx];
        losses.push_back(*c.loss);
        if (!have_best || *c.loss < *result.best.loss) {
          result.best = c;
          have_best = true;
        }
        result.trace.push_back({bracket.s, i, static_cast<int>(idx), *c.loss, *result.best.loss});
      }
      const std::size_t keep = static_cast<std::size_t>(bracket.rungs[static_cast<std::size_t>(i)].n / eta);
      T = select_top_k_configuration(evaluated, losses, keep);
      if (T.empty()) break;
    }
    result.rounds_per_bracket.push_back(used);
    result.rounds_used += used;
  }
  return result;
}

}  // namespace racing
