#pragma once

#include "racing/vehicle_model.hpp"

#include <vector>

namespace racing {

enum class Execution { Serial, Parallel };

/// Linearizes `integrate` at every stage of a horizon. Stages are
/// independent; the parallel variant splits them across OpenMP threads and
/// returns bit-identical models.
std::vector<LinearModel> linearize_horizon(const std::vector<VehicleState>& states,
                                           const std::vector<ControlInput>& inputs,
                                           const std::vector<DraftContext>& drafts,
                                           const VehicleParams& params, double dt,
                                           Execution execution = Execution::Serial);

}  // namespace racing
