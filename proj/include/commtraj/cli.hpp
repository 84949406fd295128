#pragma once

#include <string>

#include "commtraj/config.hpp"

namespace commtraj {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitNumeric = 3,
  kExitPlanning = 4,
  kExitValidation = 5,
};

/// Exit code for the exception currently being handled.
int exit_code_for_current_exception();

/// Quantized rate map of a configuration (deterministic in cfg.seed).
QuantizedRateMap build_rate_map(const RunConfig& cfg);

/// Planning inputs for a configuration and its rate map.
PlanningContext make_context(const RunConfig& cfg, const QuantizedRateMap& map);

/// Serialized plan: depth, cost terms, waypoints, angles, durations, leg
/// levels, boundary states and SA diagnostics.
std::string plan_to_json(const PlanResult& plan);

/// Waypoints and boundary states of a serialized plan. Throws ConfigError
/// on malformed input.
WaypointPlan plan_from_json(const std::string& text);

/// Entry point of the `commtraj` executable.
int run_cli(int argc, char** argv);

}  // namespace commtraj
