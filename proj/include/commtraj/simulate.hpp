#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "commtraj/planner.hpp"

namespace commtraj {

struct SimConfig {
  int n_trials = 10000;
  std::uint64_t seed = 0;
  double dt_sample = 1.0;  // s, for exported series
  int workers = 1;

  void validate() const;
};

/// Bit counts are raw (T_tx * R summed over periods); divide by
/// `bits_unit` for the R_s T_tx / T normalization.
struct SimReport {
  double energy_ratio = 0.0;
  double transmission_ratio = 0.0;
  double bits_approx = 0.0;
  double bits_measured = 0.0;
  double bits_stderr = 0.0;
  double baseline_bits_measured = 0.0;
  double bits_unit = 1.0;
};

struct BitsEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
};

/// Monte-Carlo transmitted bits of a trajectory: positions at k T for
/// k = 0..floor(t_f / T), independent dB-Gaussian shadowing per period and
/// the unquantized ladder. Trial i draws from derive_seed(seed, i), and trial
/// totals are summed in index order, so the result does not depend on the
/// worker count. Distances inside the minimum standoff are clamped to it.
BitsEstimate measure_bits(const Trajectory& traj, const ChannelParams& channel,
                          const RateLadder& ladder, const SimConfig& cfg);

/// Simulates a plan against the baseline. Throws ConfigError when their
/// durations differ.
SimReport run_sim(const PlanResult& plan, const PlanResult& baseline,
                  const ChannelParams& channel, const RateLadder& ladder,
                  const SimConfig& cfg);

struct PathSample {
  double t = 0.0;
  Vec2 position = Vec2::Zero();
  double speed = 0.0;
};

/// Samples at 0, dt, 2 dt, ... plus t_f itself.
std::vector<PathSample> sample_path(const Trajectory& traj, double dt);

/// (t, |velocity|) series.
std::vector<std::pair<double, double>> speed_profile(const Trajectory& traj, double dt);

/// Local maxima whose prominence exceeds `rel_prominence` times the series
/// maximum. A flat zero series has none.
int count_local_maxima(const std::vector<double>& values, double rel_prominence = 0.01);

struct SweepRow {
  double lambda = 0.0;
  bool ok = false;
  std::string note;
  SimReport report;
  PlanResult plan;
};

/// Plans and simulates each lambda on copies of `base`; a failing lambda is
/// recorded in its row and the sweep continues.
std::vector<SweepRow> lambda_sweep(const PlanningContext& base,
                                   const std::vector<double>& lambdas,
                                   const SAConfig& sa, const SimConfig& sim);

/// table1.csv: lambda, energy_ratio, transmission_ratio, bits_approx,
/// bits_measured, bits_stderr, note. Bits are normalized.
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);

/// Locale-independent shortest round-trip formatting of a double.
std::string format_number(double v);

}  // namespace commtraj
