#include "racing/horizon.hpp"
#include "racing/sysid.hpp"
#include "support/synthetic.hpp"

#include <benchmark/benchmark.h>

#include <cmath>

using namespace racing;

namespace {

const VehicleParams& params() {
  static const VehicleParams p = load_vehicle_params(std::string(RACING_DATA_DIR) + "/vehicle_default.json");
  return p;
}

Execution mode(const benchmark::State& state) {
  return state.range(0) == 0 ? Execution::Serial : Execution::Parallel;
}

void linearize(benchmark::State& state) {
  const int N = static_cast<int>(state.range(1));
  std::vector<VehicleState> states;
  std::vector<ControlInput> inputs;
  VehicleState x{0, 0, 0, 50, 0, 0};
  for (int k = 0; k < N; ++k) {
    const ControlInput u{0.01 * std::sin(0.3 * k), 0.5};
    states.push_back(x);
    inputs.push_back(u);
    x = integrate(x, u, params(), DraftContext::none(), 0.05);
  }
  states.push_back(x);
  const std::vector<DraftContext> drafts(N, DraftContext::none());
  for (auto _ : state) {
    benchmark::DoNotOptimize(linearize_horizon(states, inputs, drafts, params(), 0.05, mode(state)));
  }
}

void loss(benchmark::State& state) {
  static const Dataset data = synthetic::sweep_dataset(params(), 3, 600);
  Configuration c = synthetic::truth_configuration(params());
  c.values["D_F"] *= 1.05;
  LossOptions options;
  options.execution = mode(state);
  for (auto _ : state) benchmark::DoNotOptimize(evaluation_loss(c, data, params(), options));
}

void hyperband_rungs(benchmark::State& state) {
  static const Dataset data = synthetic::sweep_dataset(params(), 2, 200);
  static const ParamSpace space = synthetic::space_around(params());
  HyperbandOptions options;
  options.execution = mode(state);
  for (auto _ : state) benchmark::DoNotOptimize(hyperband(9, 3, space, data, params(), 1, options));
}

}  // namespace

BENCHMARK(linearize)->ArgsProduct({{0, 1}, {20, 40}})->ArgNames({"parallel", "N"});
BENCHMARK(loss)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(hyperband_rungs)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
