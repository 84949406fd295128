#include "commtraj/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <Eigen/Cholesky>

#include "commtraj/errors.hpp"

namespace commtraj {
namespace {

using Mat3 = Eigen::Matrix3d;
using Mat43 = Eigen::Matrix<double, 4, 3>;

constexpr double kInf = std::numeric_limits<double>::infinity();

// Selects the free (velocity, tilt, tilt-rate) part of an axis state.
Mat43 free_part() {
  Mat43 E = Mat43::Zero();
  E.bottomRows<3>().setIdentity();
  return E;
}

double axis_coord(const Vec2& p, Axis a) { return a == Axis::X ? p.x() : p.y(); }

}  // namespace

void PlanProblem::validate() const {
  if (!start.allFinite() || !goal.allFinite()) {
    throw ParameterError("plan: start and goal must be finite");
  }
  if (!(t_f > 0.0) || !std::isfinite(t_f)) {
    throw ParameterError("plan: t_f must be positive");
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw ParameterError("plan: lambda must lie in [0, 1]");
  }
  if (objective == CommObjective::Quota && (!(eta > 0.0) || !(quota_bits >= 0.0))) {
    throw ParameterError("plan: quota mode needs eta > 0 and N_0 >= 0");
  }
  for (const Obstacle& o : obstacles) {
    if (!(o.radius > 0.0) || !(o.k1 > 0.0) || !(o.k2 > 0.0) || !o.center.allFinite()) {
      throw ParameterError("plan: obstacles need r_o, K1, K2 > 0");
    }
  }
}

void SAConfig::validate() const {
  if (iterations < 0) throw ParameterError("sa: iterations must be >= 0");
  if (initial_samples < 1) throw ParameterError("sa: initial_samples must be >= 1");
  if (!(cooling > 0.0 && cooling <= 1.0)) {
    throw ParameterError("sa: cooling must lie in (0, 1]");
  }
  if (!(sigma_angle > 0.0) || !(sigma_weight > 0.0)) {
    throw ParameterError("sa: proposal widths must be positive");
  }
  if (workers < 1) throw ParameterError("sa: workers must be >= 1");
}

// ---------------------------------------------------------------------------

Trajectory::Trajectory(std::vector<SegmentControlLaw> legs) : legs_(std::move(legs)) {
  if (legs_.empty()) throw ParameterError("trajectory: no segments");
}

const SegmentControlLaw& Trajectory::leg_at(double t) const {
  if (legs_.empty()) throw ParameterError("trajectory: no segments");
  auto it = std::lower_bound(legs_.begin(), legs_.end(), t,
                             [](const SegmentControlLaw& l, double v) { return l.t_end < v; });
  if (it == legs_.end()) return legs_.back();
  return *it;
}

PlanarState Trajectory::state(double t) const { return propagate_state(leg_at(t), t); }

Vec2 Trajectory::control(double t) const {
  const auto& leg = leg_at(t);
  return leg.control(std::clamp(t, leg.t_start, leg.t_end));
}

double Trajectory::energy() const {
  double e = 0.0;
  for (const auto& l : legs_) e += segment_energy(l);
  return e;
}

// ---------------------------------------------------------------------------

CrossingLayout crossing_layout(const QuantizedRateMap& map, const Vec2& start,
                               const Vec2& goal, int depth) {
  const int Q = map.size();
  if (depth < 0 || depth > Q - 1) {
    std::ostringstream msg;
    msg << "depth " << depth << " outside [0, " << Q - 1 << "]";
    throw PlanningError(msg.str());
  }
  const int a_s = map.level_at(start);
  const int a_g = map.level_at(goal);
  const int inner = depth + 1;
  if (inner < a_s || inner < a_g) {
    std::ostringstream msg;
    msg << "depth " << depth << ": start/goal already lie in level "
        << std::max(a_s, a_g) << " > " << inner;
    throw PlanningError(msg.str());
  }
  CrossingLayout out;
  out.depth = depth;
  for (int k = a_s; k <= depth; ++k) {
    out.leg_levels.push_back(k);
    out.radii.push_back(region_radius(map, k));
  }
  out.inbound = static_cast<int>(out.radii.size());
  out.leg_levels.push_back(inner);
  for (int k = depth; k >= a_g; --k) {
    out.radii.push_back(region_radius(map, k));
    out.leg_levels.push_back(k);
  }
  return out;
}

WaypointPlan make_waypoints(const CrossingLayout& layout, const Vec2& start,
                            const Vec2& goal, const Vec2& ap,
                            const std::vector<double>& angles,
                            const std::vector<double>& durations) {
  if (static_cast<int>(angles.size()) != layout.waypoint_count() ||
      static_cast<int>(durations.size()) != layout.leg_count()) {
    throw ParameterError("make_waypoints: size mismatch with layout");
  }
  WaypointPlan plan;
  plan.depth = layout.depth;
  plan.angles = angles;
  plan.radii = layout.radii;
  plan.durations = durations;
  plan.leg_levels = layout.leg_levels;
  plan.points.reserve(angles.size() + 2);
  plan.points.push_back(start);
  for (size_t n = 0; n < angles.size(); ++n) {
    plan.points.push_back(ap + layout.radii[n] * Vec2(std::cos(angles[n]), std::sin(angles[n])));
  }
  plan.points.push_back(goal);
  return plan;
}

std::vector<double> durations_from_weights(const std::vector<double>& weights,
                                           double t_f, double tau_min) {
  const size_t L = weights.size();
  if (L == 0) throw ParameterError("durations: no legs");
  const double spare = t_f - static_cast<double>(L) * tau_min;
  if (spare < 0.0) {
    std::ostringstream msg;
    msg << L << " legs of at least " << tau_min << " s do not fit in t_f = " << t_f;
    throw PlanningError(msg.str());
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw ParameterError("durations: weights must be positive");
    total += w;
  }
  std::vector<double> tau(L);
  double used = 0.0;
  for (size_t n = 0; n + 1 < L; ++n) {
    tau[n] = tau_min + spare * (weights[n] / total);
    used += tau[n];
  }
  tau[L - 1] = t_f - used;
  return tau;
}

Baseline met_baseline(const Vec2& s, const Vec2& g, double t_f,
                      const SegmentSolver& solver) {
  if ((s - g).norm() == 0.0) {
    throw ParameterError("met_baseline: start equals goal, E_0 would be 0");
  }
  if (!(t_f > 0.0)) throw ParameterError("met_baseline: t_f must be positive");
  Baseline b;
  b.law = solver.solve({PlanarState::at_rest(s), PlanarState::at_rest(g), t_f}, 0.0);
  b.energy = segment_energy(b.law);
  return b;
}

double approx_bits(const std::vector<double>& durations,
                   const std::vector<int>& leg_levels,
                   const QuantizedRateMap& map, const RateLadder& ladder) {
  if (durations.size() != leg_levels.size()) {
    throw ParameterError("approx_bits: one level per leg required");
  }
  double weighted = 0.0;
  for (size_t n = 0; n < durations.size(); ++n) {
    weighted += durations[n] * map.rate(leg_levels[n]);
  }
  return ladder.tx_time / ladder.period * weighted;
}

double max_bits(double t_f, const RateLadder& ladder) {
  return ladder.tx_time * ladder.max_rate() * (std::floor(t_f / ladder.period) + 1.0);
}

// ---------------------------------------------------------------------------

double boundary_energy(const WaypointPlan& plan,
                       const std::vector<PlanarState>& boundary,
                       const SegmentSolver& solver) {
  const int L = plan.leg_count();
  if (static_cast<int>(boundary.size()) != L + 1) {
    throw ParameterError("boundary_energy: need one state per waypoint");
  }
  double e = 0.0;
  for (Axis a : {Axis::X, Axis::Y}) {
    const AxisModel& m = solver.model().axis(a);
    for (int n = 0; n < L; ++n) {
      const double tau = plan.durations[static_cast<size_t>(n)];
      const Vec4 r = boundary[n + 1].axis(a) - expm_planar(m.A, tau) * boundary[n].axis(a);
      e += r.dot(solver.gramian(a, tau)->solve(r));
    }
  }
  return e;
}

AlphaSolution solve_alpha(const WaypointPlan& plan, const SegmentSolver& solver) {
  const int L = plan.leg_count();
  if (L < 1 || static_cast<int>(plan.points.size()) != L + 1) {
    throw ParameterError("solve_alpha: need L legs and L + 1 points");
  }
  AlphaSolution out;
  out.boundary.reserve(static_cast<size_t>(L + 1));
  for (const Vec2& p : plan.points) out.boundary.push_back(PlanarState::at_rest(p));

  const int N = L - 1;  // interior waypoints
  if (N > 0) {
    const Mat43 E = free_part();
    const Vec4 e1 = Vec4::UnitX();
    for (Axis a : {Axis::X, Axis::Y}) {
      const AxisModel& m = solver.model().axis(a);
      std::vector<Mat4> Phi(static_cast<size_t>(L)), K(static_cast<size_t>(L));
      for (int n = 0; n < L; ++n) {
        const double tau = plan.durations[static_cast<size_t>(n)];
        Phi[n] = expm_planar(m.A, tau);
        K[n] = solver.gramian(a, tau)->inverse();
      }
      auto c = [&](int n) { return axis_coord(plan.points[static_cast<size_t>(n)], a); };

      // Row i corresponds to waypoint n = i + 1.
      std::vector<Mat3> diag(static_cast<size_t>(N)), lower(static_cast<size_t>(N));
      std::vector<Eigen::Vector3d> rhs(static_cast<size_t>(N));
      for (int i = 0; i < N; ++i) {
        const int n = i + 1;
        diag[i] = E.transpose() * K[n - 1] * E +
                  E.transpose() * Phi[n].transpose() * K[n] * Phi[n] * E;
        rhs[i] = -E.transpose() * K[n - 1] * (e1 * c(n) - Phi[n - 1] * e1 * c(n - 1)) +
                 E.transpose() * Phi[n].transpose() * K[n] * (e1 * c(n + 1) - Phi[n] * e1 * c(n));
        if (i > 0) lower[i] = -E.transpose() * K[n - 1] * Phi[n - 1] * E;
      }

      // Jacobi scaling keeps the block elimination well balanced.
      std::vector<Eigen::Vector3d> scale(static_cast<size_t>(N));
      for (int i = 0; i < N; ++i) {
        const Eigen::Vector3d d = diag[i].diagonal();
        if (!(d.minCoeff() > 0.0)) {
          throw ConditioningError("solve_alpha: non-positive normal-matrix diagonal");
        }
        scale[i] = d.cwiseSqrt().cwiseInverse();
      }
      for (int i = 0; i < N; ++i) {
        diag[i] = scale[i].asDiagonal() * diag[i] * scale[i].asDiagonal();
        rhs[i] = scale[i].asDiagonal() * rhs[i];
        if (i > 0) lower[i] = scale[i].asDiagonal() * lower[i] * scale[i - 1].asDiagonal();
      }

      // Block Thomas elimination; the system is symmetric positive definite,
      // so every Schur complement must admit a Cholesky factor.
      std::vector<Eigen::LLT<Mat3>> schur(static_cast<size_t>(N));
      std::vector<Eigen::Vector3d> y(static_cast<size_t>(N));
      for (int i = 0; i < N; ++i) {
        Mat3 S = diag[i];
        Eigen::Vector3d v = rhs[i];
        if (i > 0) {
          const Mat3 G = schur[i - 1].solve(lower[i].transpose()).transpose();
          S -= G * lower[i].transpose();
          v -= G * y[i - 1];
        }
        schur[i].compute(S);
        if (schur[i].info() != Eigen::Success) {
          throw ConditioningError("solve_alpha: singular normal matrix");
        }
        y[i] = v;
      }
      std::vector<Eigen::Vector3d> alpha(static_cast<size_t>(N));
      for (int i = N - 1; i >= 0; --i) {
        Eigen::Vector3d v = y[i];
        if (i + 1 < N) v -= lower[i + 1].transpose() * alpha[i + 1];
        alpha[i] = schur[i].solve(v);
      }
      for (int i = 0; i < N; ++i) {
        const Eigen::Vector3d a_i = scale[i].asDiagonal() * alpha[i];
        if (!a_i.allFinite()) throw ConditioningError("solve_alpha: non-finite solution");
        out.boundary[static_cast<size_t>(i + 1)].axis(a).tail<3>() = a_i;
      }
    }
  }
  out.energy = boundary_energy(plan, out.boundary, solver);
  return out;
}

Trajectory build_trajectory(const WaypointPlan& plan, const SegmentSolver& solver) {
  const int L = plan.leg_count();
  if (static_cast<int>(plan.boundary.size()) != L + 1) {
    throw ParameterError("build_trajectory: boundary states not set");
  }
  std::vector<SegmentControlLaw> legs;
  legs.reserve(static_cast<size_t>(L));
  double t = 0.0;
  for (int n = 0; n < L; ++n) {
    const double tau = plan.durations[static_cast<size_t>(n)];
    legs.push_back(solver.solve({plan.boundary[n], plan.boundary[n + 1], tau}, t));
    t += tau;
  }
  return Trajectory(std::move(legs));
}

// ---------------------------------------------------------------------------

Vec2 closest_point_on_segment(const Vec2& a, const Vec2& b, const Vec2& q) {
  // theta weights a; theta = 0 gives b.
  const Vec2 d = a - b;
  const double len2 = d.squaredNorm();
  if (len2 == 0.0) return b;
  const double theta = std::clamp(d.dot(q - b) / len2, 0.0, 1.0);
  return theta * a + (1.0 - theta) * b;
}

double obstacle_penalty(const std::vector<Vec2>& points,
                        const std::vector<Obstacle>& obstacles) {
  double total = 0.0;
  for (const Obstacle& o : obstacles) {
    for (size_t n = 0; n + 1 < points.size(); ++n) {
      const Vec2 a = closest_point_on_segment(points[n], points[n + 1], o.center);
      const double gap = ((o.center - a).norm() - o.radius) / o.radius;
      total += o.k1 * std::exp(-o.k2 * gap);
    }
  }
  return total;
}

double polyline_clearance(const std::vector<Vec2>& points, const Vec2& center) {
  if (points.empty()) throw ParameterError("polyline_clearance: no points");
  if (points.size() == 1) return (points.front() - center).norm();
  double best = kInf;
  for (size_t n = 0; n + 1 < points.size(); ++n) {
    best = std::min(best, (center - closest_point_on_segment(points[n], points[n + 1], center)).norm());
  }
  return best;
}

// ---------------------------------------------------------------------------

PlanningContext::PlanningContext(PlanProblem problem_, SegmentSolver solver_,
                                 ChannelParams channel_, RateLadder ladder_,
                                 QuantizedRateMap map_)
    : problem(std::move(problem_)), solver(std::move(solver_)),
      channel(std::move(channel_)), ladder(std::move(ladder_)), map(std::move(map_)) {
  problem.validate();
  channel.validate();
  ladder.validate();
  if (map.size() < 2) throw ParameterError("plan: rate map needs at least two levels");
  baseline = met_baseline(problem.start, problem.goal, problem.t_f, solver);
  w0 = max_bits(problem.t_f, ladder);
}

namespace {

// Ring [inner, outer] of a level, in metres from the access point.
std::pair<double, double> level_ring(const QuantizedRateMap& map, int level) {
  const double inner = level < map.size() ? region_radius(map, level) : 0.0;
  const double outer = level > 1 ? region_radius(map, level - 1) : kInf;
  return {inner, outer};
}

}  // namespace

bool legs_stay_in_regions(const WaypointPlan& plan, const QuantizedRateMap& map) {
  const double tol = 1e-9 * map.domain_radius;
  for (int n = 0; n < plan.leg_count(); ++n) {
    const auto [inner, outer] = level_ring(map, plan.leg_levels[static_cast<size_t>(n)]);
    const Vec2& a = plan.points[static_cast<size_t>(n)];
    const Vec2& b = plan.points[static_cast<size_t>(n + 1)];
    // Distance to the access point is convex along a segment: the maximum is
    // at an endpoint, the minimum at the closest point.
    const double d_min = (closest_point_on_segment(a, b, map.ap_position) - map.ap_position).norm();
    const double d_max = std::max((a - map.ap_position).norm(), (b - map.ap_position).norm());
    if (d_min < inner - tol || d_max > outer + tol) return false;
  }
  return true;
}

CostBreakdown plan_cost(WaypointPlan& plan, const PlanningContext& ctx) {
  CostBreakdown c;
  if (ctx.enforce_regions && !legs_stay_in_regions(plan, ctx.map)) {
    c.total = kInf;
    c.energy = kInf;
    return c;
  }
  try {
    AlphaSolution sol = solve_alpha(plan, ctx.solver);
    plan.boundary = std::move(sol.boundary);
    c.energy = sol.energy;
  } catch (const ConditioningError&) {
    c.total = kInf;
    c.energy = kInf;
    return c;
  }
  const PlanProblem& p = ctx.problem;
  c.bits = approx_bits(plan.durations, plan.leg_levels, ctx.map, ctx.ladder);
  c.penalty = obstacle_penalty(plan.points, p.obstacles);
  if (p.lambda < 1.0) {
    if (p.objective == CommObjective::MaxData) {
      c.comm_term = c.bits > 0.0 ? ctx.w0 / c.bits : kInf;
    } else {
      c.comm_term = std::exp(p.eta * (p.quota_bits - c.bits));
    }
  }
  c.total = p.lambda * c.energy / ctx.baseline.energy + c.penalty;
  if (p.lambda < 1.0) c.total += (1.0 - p.lambda) * c.comm_term;
  return c;
}

PlanResult baseline_plan(const PlanningContext& ctx) {
  const PlanProblem& p = ctx.problem;
  WaypointPlan w;
  w.points = {p.start, p.goal};
  w.durations = {p.t_f};
  // The straight line may cross borders; charge it the outermost endpoint level.
  w.leg_levels = {std::min(ctx.map.level_at(p.start), ctx.map.level_at(p.goal))};
  PlanningContext free_ctx = ctx;
  free_ctx.enforce_regions = false;
  PlanResult r;
  r.breakdown = plan_cost(w, free_ctx);
  r.depth = 0;
  r.waypoints = w;
  r.trajectory = build_trajectory(w, ctx.solver);
  r.energy = r.trajectory.energy();
  r.baseline_energy = ctx.baseline.energy;
  r.bits_approx = r.breakdown.bits;
  r.cost = r.breakdown.total;
  return r;
}

}  // namespace commtraj
