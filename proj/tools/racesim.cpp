#include "racing/sim.hpp"
#include "racing/sysid.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

using namespace racing;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << text;
}

int simulate(const std::string& scenario_path, const std::string& out_dir, std::optional<std::uint64_t> seed) {
  Scenario s = load_scenario(scenario_path);
  if (seed) s.seed = *seed;
  const RaceLog log = run_scenario(s);
  std::filesystem::create_directories(out_dir);
  const auto ticks = (std::filesystem::path(out_dir) / "ticks.csv").string();
  const auto events = (std::filesystem::path(out_dir) / "events.json").string();
  write_tick_csv(log, ticks);
  write_events_json(log, events);
  std::printf("end %.2f s%s, %zu collision(s), %zu overtake(s), %zu lap(s), %zu controller failure(s)\n",
              log.end_time, log.dnf ? " (ego DNF)" : "", log.collisions.size(), log.overtakes.size(),
              log.laps.size(), log.failures.size());
  std::printf("wrote %s and %s\n", ticks.c_str(), events.c_str());
  return log.dnf ? 3 : 0;
}

int identify(const std::string& data, std::optional<int> vehicle, const std::string& space_path,
             const std::string& base_path, int budget, int eta, std::uint64_t seed, const std::string& out_dir) {
  const Dataset dataset = load_dataset_from_log(data, vehicle);
  const ParamSpace space = load_param_space(space_path);
  const VehicleParams base = load_vehicle_params(base_path);
  const HyperbandResult result = hyperband(budget, eta, space, dataset, base, seed);
  std::filesystem::create_directories(out_dir);
  const auto best = (std::filesystem::path(out_dir) / "best.json").string();
  const auto trace = (std::filesystem::path(out_dir) / "trace.csv").string();
  write_file(best, configuration_to_json_text(result.best) + "\n");
  std::string csv = "bracket,rung,index,loss,best\n";
  char line[160];
  for (const auto& t : result.trace) {
    std::snprintf(line, sizeof line, "%d,%d,%d,%.17g,%.17g\n", t.bracket, t.rung, t.index, t.loss, t.best);
    csv += line;
  }
  write_file(trace, csv);
  std::printf("best loss %.6g after %ld rounds\n", result.best.loss.value_or(kDivergedLoss), result.rounds_used);
  for (const auto& [name, value] : result.best.values) std::printf("  %-4s %.6g\n", name.c_str(), value);
  std::printf("wrote %s and %s\n", best.c_str(), trace.c_str());
  return 0;
}

int export_log(const std::string& log_path, const std::string& format, const std::string& out) {
  const auto ticks = read_tick_csv(log_path);
  std::string text;
  if (format == "csv") {
    RaceLog log;
    log.ticks = ticks;
    text = tick_csv_text(log);
  } else {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& t : ticks) {
      j.push_back({{"t", t.t},
                   {"vehicle", t.vehicle},
                   {"X", t.state.X},
                   {"Y", t.state.Y},
                   {"psi", t.state.psi},
                   {"vx", t.state.vx},
                   {"vy", t.state.vy},
                   {"r", t.state.r},
                   {"theta", t.theta},
                   {"mode", t.mode},
                   {"status", t.status},
                   {"min_dist", std::isfinite(t.min_dist) ? nlohmann::ordered_json(t.min_dist) : nlohmann::ordered_json(nullptr)},
                   {"delta", t.input.delta},
                   {"D", t.input.D}});
    }
    text = j.dump(1) + "\n";
  }
  if (out.empty()) {
    std::cout << text;
  } else {
    write_file(out, text);
  }
  return 0;
}

int lap_report(const std::string& path) {
  std::filesystem::path p(path);
  if (std::filesystem::is_directory(p)) p /= "events.json";
  const auto j = nlohmann::json::parse(read_file(p.string()));
  std::map<int, std::vector<std::pair<int, double>>> laps;
  for (const auto& l : j.at("laps")) laps[l.at("vehicle").get<int>()].emplace_back(l.at("lap"), l.at("lap_time"));
  int ego = -1;
  const auto& vehicles = j.at("scenario").at("vehicles");
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    if (vehicles[i].at("role") == "ego") ego = static_cast<int>(i);
  }
  std::map<int, int> overtakes;
  for (const auto& o : j.at("overtakes")) ++overtakes[o.at("overtaker").get<int>()];
  std::printf("vehicle  role      laps  best lap s  overtakes\n");
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    const int v = static_cast<int>(i);
    const auto& list = laps[v];
    double best = 0.0;
    for (const auto& [lap, time] : list) best = best == 0.0 ? time : std::min(best, time);
    const bool dnf = v == ego && j.at("dnf").get<bool>();
    char best_text[32];
    if (dnf) {
      std::snprintf(best_text, sizeof best_text, "DNF");
    } else if (list.empty()) {
      std::snprintf(best_text, sizeof best_text, "-");
    } else {
      std::snprintf(best_text, sizeof best_text, "%.3f", best);
    }
    std::printf("%7d  %-8s  %4zu  %10s  %9d\n", v, v == ego ? "ego" : "opponent", list.size(), best_text,
                overtakes[v]);
    for (const auto& [lap, time] : list) std::printf("         lap %d  %.3f s\n", lap, time);
  }
  for (const auto& c : j.at("collisions")) {
    std::printf("collision t=%.2f s between %d and %d\n", c.at("t").get<double>(), c.at("a").get<int>(),
                c.at("b").get<int>());
  }
  std::printf("end %.2f s\n", j.at("end_time").get<double>());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Head-to-head racing simulator"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "Run a scenario and write ticks.csv and events.json");
  std::string scenario, out_dir;
  std::optional<std::uint64_t> seed;
  sim->add_option("--scenario", scenario, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  sim->add_option("--out", out_dir, "Output directory")->required();
  sim->add_option("--seed", seed, "Override the scenario seed");

  auto* id = app.add_subcommand("identify", "Fit tire and drivetrain parameters to a tick log");
  std::string data, space, base;
  std::optional<int> vehicle;
  int budget = 81, eta = 3;
  std::uint64_t id_seed = 0;
  std::string id_out = ".";
  id->add_option("--data", data, "Tick CSV")->required()->check(CLI::ExistingFile);
  id->add_option("--vehicle", vehicle, "Vehicle index in the log (default: all)");
  id->add_option("--space", space, "Parameter space JSON")->required()->check(CLI::ExistingFile);
  id->add_option("--base", base, "Vehicle parameter JSON supplying fixed values")->required()->check(CLI::ExistingFile);
  id->add_option("--budget", budget, "Maximum rounds per configuration (R)")->check(CLI::PositiveNumber);
  id->add_option("--eta", eta, "Downsampling rate")->check(CLI::Range(2, 1000));
  id->add_option("--seed", id_seed, "Random seed");
  id->add_option("--out", id_out, "Output directory for best.json and trace.csv");

  auto* ex = app.add_subcommand("export", "Convert a tick CSV to csv or json");
  std::string log_path, format = "csv", ex_out;
  ex->add_option("--log", log_path, "Tick CSV")->required()->check(CLI::ExistingFile);
  ex->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  ex->add_option("--out", ex_out, "Output file (default: stdout)");

  auto* lr = app.add_subcommand("lap-report", "Summarize laps, overtakes and collisions");
  std::string events;
  lr->add_option("--log", events, "events.json or a simulate output directory")->required()->check(CLI::ExistingPath);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*sim) return simulate(scenario, out_dir, seed);
    if (*id) return identify(data, vehicle, space, base, budget, eta, id_seed, id_out);
    if (*ex) return export_log(log_path, format, ex_out);
    if (*lr) return lap_report(events);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
