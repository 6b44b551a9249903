#include "racing/horizon.hpp"

#include <stdexcept>

namespace racing {

std::vector<LinearModel> linearize_horizon(const std::vector<VehicleState>& states,
                                           const std::vector<ControlInput>& inputs,
                                           const std::vector<DraftContext>& drafts,
                                           const VehicleParams& params, double dt,
                                           Execution execution) {
  const int n = static_cast<int>(inputs.size());
  if (states.size() < inputs.size() || drafts.size() < inputs.size()) {
    throw std::invalid_argument("linearize_horizon: size mismatch");
  }
  std::vector<LinearModel> out(static_cast<std::size_t>(n));
  if (execution == Execution::Serial) {
    for (int k = 0; k < n; ++k) out[k] = linearize(states[k], inputs[k], params, drafts[k], dt);
    return out;
  }
  // integrate may throw; exceptions must not escape the parallel region.
  bool failed = false;
#pragma omp parallel for schedule(static)
  for (int k = 0; k < n; ++k) {
    try {
      out[k] = linearize(states[k], inputs[k], params, drafts[k], dt);
    } catch (...) {
#pragma omp atomic write
      failed = true;
    }
  }
  if (failed) {
    // rerun serially so the caller sees the original exception
    for (int k = 0; k < n; ++k) out[k] = linearize(states[k], inputs[k], params, drafts[k], dt);
  }
  return out;
}

}  // namespace racing
