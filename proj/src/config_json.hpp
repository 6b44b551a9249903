#pragma once

// nlohmann-based helpers shared by the config loaders. Internal to the
// library so the public headers stay free of the JSON dependency.

#include "racing/mpcc.hpp"

#include <nlohmann/json.hpp>

#include <initializer_list>
#include <string>

namespace racing::detail {

using nlohmann::json;

/// Throws ConfigError for any key of `j` not in `allowed`.
void reject_unknown(const json& j, std::initializer_list<const char*> allowed,
                    const std::string& where);

/// Fields absent from `j` keep their value in `base`.
MpccConfig mpcc_config_from_json(const json& j, MpccConfig base = {});
json mpcc_config_to_json(const MpccConfig& config);

}  // namespace racing::detail
