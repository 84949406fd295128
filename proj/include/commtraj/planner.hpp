#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "commtraj/channel.hpp"
#include "commtraj/mincontrol.hpp"

namespace commtraj {

enum class CommObjective {
  MaxData,  // w(D) = W_0 / D
  Quota,    // w(D) = exp(eta (N_0 - D))
};

/// Circular keep-out disk with barrier gains.
struct Obstacle {
  Vec2 center = Vec2::Zero();
  double radius = 1.0;
  double k1 = 1000.0;
  double k2 = 100.0;
};

struct PlanProblem {
  Vec2 start = Vec2::Zero();
  Vec2 goal = Vec2::Zero();
  double t_f = 100.0;
  double lambda = 1.0;
  CommObjective objective = CommObjective::MaxData;
  double quota_bits = 0.0;  // N_0, bits
  double eta = 1.0;
  std::vector<Obstacle> obstacles;

  void validate() const;
};

struct SAConfig {
  int iterations = 5000;
  int initial_samples = 50;
  double cooling = 0.995;
  double sigma_angle = 0.15;   // rad
  double sigma_weight = 0.10;  // relative
  bool polish = true;          // pattern search on the best point afterwards
  std::uint64_t seed = 0;
  int workers = 1;

  void validate() const;
};

/// Concatenation of minimum-norm segments covering [0, t_f].
class Trajectory {
 public:
  Trajectory() = default;
  explicit Trajectory(std::vector<SegmentControlLaw> legs);

  const std::vector<SegmentControlLaw>& legs() const { return legs_; }
  double duration() const { return legs_.empty() ? 0.0 : legs_.back().t_end; }
  PlanarState state(double t) const;
  Vec2 control(double t) const;
  double energy() const;

 private:
  const SegmentControlLaw& leg_at(double t) const;
  std::vector<SegmentControlLaw> legs_;
};

/// Which crossing points a depth-j plan visits: one border radius per
/// interior waypoint and one quantized level per leg.
struct CrossingLayout {
  int depth = 0;
  int inbound = 0;               // entry crossings before the innermost leg
  std::vector<double> radii;     // interior waypoints, in visiting order
  std::vector<int> leg_levels;   // legs, in visiting order (1-based levels)

  int waypoint_count() const { return static_cast<int>(radii.size()); }
  int leg_count() const { return static_cast<int>(leg_levels.size()); }
};

/// Layout for depth j. The path crosses inward from the start's level down to
/// level j+1 and back out to the goal's level; a border already inside of
/// the start (goal) contributes no entry (exit) point. Throws PlanningError
/// when j+1 is shallower than either endpoint or deeper than the map.
CrossingLayout crossing_layout(const QuantizedRateMap& map, const Vec2& start,
                               const Vec2& goal, int depth);

struct WaypointPlan {
  int depth = 0;
  std::vector<Vec2> points;        // c_0 = s, ..., c_L = g
  std::vector<double> angles;      // beta per interior point, [0, 2 pi)
  std::vector<double> radii;       // per interior point
  std::vector<double> durations;   // tau_n, n = 0..L-1, summing to t_f
  std::vector<int> leg_levels;
  std::vector<PlanarState> boundary;  // optimized states at each c_n

  int leg_count() const { return static_cast<int>(durations.size()); }
};

/// Places interior points at radii[n] * (cos beta_n, sin beta_n) around the
/// access point.
WaypointPlan make_waypoints(const CrossingLayout& layout, const Vec2& start,
                            const Vec2& goal, const Vec2& ap,
                            const std::vector<double>& angles,
                            const std::vector<double>& durations);

/// Durations from positive weights: tau_n = tau_min + (t_f - L tau_min) w_n /
/// sum(w), with the last duration absorbing rounding so the sum is t_f.
std::vector<double> durations_from_weights(const std::vector<double>& weights,
                                           double t_f, double tau_min);

struct Baseline {
  SegmentControlLaw law;
  double energy = 0.0;  // E_0
};

/// Minimum-energy rest-to-rest transfer s -> g over t_f (the straight-line
/// reference trajectory). Throws ParameterError when s == g.
Baseline met_baseline(const Vec2& s, const Vec2& g, double t_f,
                      const SegmentSolver& solver);

/// (T_tx / T) sum_n tau_n R^Q_{level(n)}, in bits.
double approx_bits(const std::vector<double>& durations,
                   const std::vector<int>& leg_levels,
                   const QuantizedRateMap& map, const RateLadder& ladder);

/// W_0 = T_tx R_J (floor(t_f / T) + 1).
double max_bits(double t_f, const RateLadder& ladder);

struct AlphaSolution {
  std::vector<PlanarState> boundary;
  double energy = 0.0;
};

/// Minimizes total segment energy over the free velocity/tilt/tilt-rate
/// states at interior waypoints (endpoints held at rest) by solving the
/// block-tridiagonal normal equations per axis. Throws ConditioningError on
/// degenerate legs or a singular system.
AlphaSolution solve_alpha(const WaypointPlan& plan, const SegmentSolver& solver);

/// Energy of the concatenated law for the given boundary states.
double boundary_energy(const WaypointPlan& plan,
                       const std::vector<PlanarState>& boundary,
                       const SegmentSolver& solver);

/// Closest point of segment [a, b] to q.
Vec2 closest_point_on_segment(const Vec2& a, const Vec2& b, const Vec2& q);

/// Barrier K1 exp(-K2 (|q - a*| - r) / r) summed over polyline segments and
/// obstacles; a* is the closest point of each segment.
double obstacle_penalty(const std::vector<Vec2>& points,
                        const std::vector<Obstacle>& obstacles);

/// Minimum distance from the polyline to an obstacle centre.
double polyline_clearance(const std::vector<Vec2>& points, const Vec2& center);

/// Shared, immutable inputs of one planning problem.
struct PlanningContext {
  PlanningContext(PlanProblem problem, SegmentSolver solver, ChannelParams channel,
                  RateLadder ladder, QuantizedRateMap map);

  PlanProblem problem;
  SegmentSolver solver;
  ChannelParams channel;
  RateLadder ladder;
  QuantizedRateMap map;
  Baseline baseline;
  double w0 = 0.0;
  /// Reject waypoint sets whose legs leave the ring approx_bits charges
  /// them for.
  bool enforce_regions = true;
};

struct CostBreakdown {
  double total = 0.0;
  double energy = 0.0;
  double bits = 0.0;
  double comm_term = 0.0;
  double penalty = 0.0;
};

/// True when every straight leg c_n -> c_{n+1} lies within the ring of the
/// level it is charged in approx_bits.
bool legs_stay_in_regions(const WaypointPlan& plan, const QuantizedRateMap& map);

/// (lambda / E_0) energy + (1 - lambda) w(bits) + obstacle penalty.
/// Conditioning failures and, when enforced, legs leaving their ring yield
/// +inf. On success `plan.boundary` is filled.
CostBreakdown plan_cost(WaypointPlan& plan, const PlanningContext& ctx);

struct SADiagnostics {
  int iterations = 0;
  int accepted = 0;
  double initial_temperature = 0.0;
  int polish_evaluations = 0;
  std::vector<double> best_trace;  // best cost every 100 iterations, then final

  double acceptance_rate() const {
    return iterations > 0 ? static_cast<double>(accepted) / iterations : 0.0;
  }
};

struct AnnealResult {
  WaypointPlan plan;
  CostBreakdown cost;
  SADiagnostics diagnostics;
};

/// Simulated annealing over crossing angles and duration weights at a fixed
/// depth. Deterministic for a given seed.
AnnealResult anneal(const PlanningContext& ctx, int depth, const SAConfig& cfg,
                    std::uint64_t seed);

struct DepthOutcome {
  int depth = 0;
  bool feasible = false;
  std::string reason;
  AnnealResult result;
};

struct PlanResult {
  int depth = 0;
  WaypointPlan waypoints;
  Trajectory trajectory;
  double energy = 0.0;
  double baseline_energy = 0.0;
  double bits_approx = 0.0;
  double cost = 0.0;
  CostBreakdown breakdown;
  SADiagnostics diagnostics;
  std::vector<DepthOutcome> depths;

  double energy_ratio() const { return energy / baseline_energy; }
};

/// Builds the per-leg laws for waypoints whose boundary states are set.
Trajectory build_trajectory(const WaypointPlan& plan, const SegmentSolver& solver);

/// Anneals every depth 0..Q-1 (in parallel when cfg.workers > 1) and keeps
/// the cheapest; exact ties go to the shallower depth. Throws PlanningError
/// listing per-depth reasons when no depth yields a finite cost. At
/// lambda = 1 without obstacles a feasible baseline is returned without
/// searching deeper.
PlanResult plan(const PlanningContext& ctx, const SAConfig& cfg);

/// The baseline packaged as a plan (depth 0, cost relative to lambda = 1).
PlanResult baseline_plan(const PlanningContext& ctx);

}  // namespace commtraj
