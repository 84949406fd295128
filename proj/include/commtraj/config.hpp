#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "commtraj/channel.hpp"
#include "commtraj/dynamics.hpp"
#include "commtraj/mincontrol.hpp"
#include "commtraj/planner.hpp"
#include "commtraj/simulate.hpp"

namespace commtraj {

/// QAM ladder description; thresholds are derived from the target BER.
struct LadderSpec {
  std::vector<int> bits_per_symbol{2, 4, 6};
  double target_ber = 1e-3;
  double symbol_rate = 1.0;
  double period = 1.0;
  double tx_time = 0.5;

  RateLadder build() const;
};

/// Everything one CLI invocation needs. Component seeds are derived from the
/// master seed, so `seed` is the only randomness knob.
struct RunConfig {
  QuadrotorParams quadrotor;
  ChannelParams channel;
  LadderSpec ladder;
  PlanProblem problem;
  int levels = 6;               // Q
  double domain_radius = 0.0;   // m, quantizer support; 0 = farther of start, goal
  /// domain_radius, or the farther of start and goal from the access point.
  double effective_domain_radius() const;
  QuantizerConfig quantizer;
  MinControlOptions mincontrol;
  SAConfig sa;
  SimConfig sim;
  std::vector<double> sweep_lambdas{1.0, 0.98, 0.8, 0.5, 0.2};
  std::uint64_t seed = 0;
  std::string output_dir = ".";

  /// Propagates the master seed into the component configs.
  void apply_seed(std::uint64_t master);
  void validate() const;
};

/// The configuration with the reference defaults (start (75, 0), goal at
/// 80 m and 100 degrees, t_f = 100 s, Q = 6).
RunConfig default_config();

/// Parses JSON text (comments allowed) over the defaults. Throws ConfigError
/// naming the offending key for unknown keys, wrong types or invalid values.
RunConfig parse_config(const std::string& text);

/// Reads and parses a file; ConfigError carries the path when it is missing.
RunConfig load_config(const std::string& path);

/// JSON document of a config, accepted back by parse_config.
std::string dump_config(const RunConfig& cfg);

/// Commented template listing every key with its default.
std::string config_template();

}  // namespace commtraj
