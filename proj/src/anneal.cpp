// Outer search over crossing angles and leg durations, and the depth sweep.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "commtraj/errors.hpp"
#include "commtraj/parallel.hpp"
#include "commtraj/planner.hpp"
#include "commtraj/random.hpp"

namespace commtraj {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Candidate {
  std::vector<double> angles;
  std::vector<double> weights;
  WaypointPlan plan;
  CostBreakdown cost;
};

double wrap_angle(double b) {
  b = std::fmod(b, kTwoPi);
  return b < 0.0 ? b + kTwoPi : b;
}

double interquartile_range(std::vector<double> v) {
  if (v.size() < 4) return 0.0;
  std::sort(v.begin(), v.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<size_t>(std::floor(pos));
    const size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  return quantile(0.75) - quantile(0.25);
}

bool accept(double current, double proposed, double temperature, Rng& rng) {
  if (!std::isfinite(proposed)) return false;
  if (!std::isfinite(current) || proposed <= current) return true;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  return unit(rng) < std::exp(-(proposed - current) / temperature);
}

}  // namespace

AnnealResult anneal(const PlanningContext& ctx, int depth, const SAConfig& cfg,
                    std::uint64_t seed) {
  cfg.validate();
  const PlanProblem& p = ctx.problem;
  const CrossingLayout layout = crossing_layout(ctx.map, p.start, p.goal, depth);
  const int P = layout.waypoint_count();
  const int L = layout.leg_count();
  const double tau_min = ctx.solver.options().tau_min;
  const Vec2 ap = ctx.map.ap_position;

  auto evaluate = [&](Candidate& c) {
    c.plan = make_waypoints(layout, p.start, p.goal, ap, c.angles,
                            durations_from_weights(c.weights, p.t_f, tau_min));
    c.cost = plan_cost(c.plan, ctx);
  };

  // Crossing angles spread evenly along the short way from start to goal.
  Candidate guess;
  const Vec2 ds = p.start - ap, dg = p.goal - ap;
  const double a_s = std::atan2(ds.y(), ds.x());
  const double sweep = std::remainder(std::atan2(dg.y(), dg.x()) - a_s, kTwoPi);
  for (int n = 0; n < P; ++n) {
    guess.angles.push_back(wrap_angle(a_s + sweep * (n + 1) / (P + 1)));
  }
  guess.weights.assign(static_cast<size_t>(L), 1.0);
  evaluate(guess);

  AnnealResult out;
  if (P == 0) {
    out.plan = guess.plan;
    out.cost = guess.cost;
    return out;
  }

  Rng rng(seed);
  std::uniform_real_distribution<double> angle_dist(0.0, kTwoPi);
  std::uniform_real_distribution<double> weight_dist(0.05, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  Candidate current = guess;
  std::vector<double> finite_costs;
  for (int k = 0; k < cfg.initial_samples; ++k) {
    Candidate c;
    for (int n = 0; n < P; ++n) c.angles.push_back(angle_dist(rng));
    for (int n = 0; n < L; ++n) c.weights.push_back(weight_dist(rng));
    evaluate(c);
    if (std::isfinite(c.cost.total)) finite_costs.push_back(c.cost.total);
    if (c.cost.total < current.cost.total) current = std::move(c);
  }
  double temperature = interquartile_range(finite_costs);
  if (!(temperature > 0.0) || !std::isfinite(temperature)) temperature = 1.0;

  Candidate best = current;
  SADiagnostics& diag = out.diagnostics;
  diag.initial_temperature = temperature;
  std::uniform_int_distribution<int> coordinate(0, P + L - 1);
  for (int it = 0; it < cfg.iterations; ++it) {
    Candidate cand;
    cand.angles = current.angles;
    cand.weights = current.weights;
    const int k = coordinate(rng);
    if (k < P) {
      cand.angles[k] = wrap_angle(cand.angles[k] + cfg.sigma_angle * normal(rng));
    } else {
      cand.weights[k - P] *= std::exp(cfg.sigma_weight * normal(rng));
    }
    evaluate(cand);
    ++diag.iterations;
    if (accept(current.cost.total, cand.cost.total, temperature, rng)) {
      ++diag.accepted;
      current = std::move(cand);
      if (current.cost.total < best.cost.total) best = current;
    }
    temperature *= cfg.cooling;
    if (it % 100 == 0) diag.best_trace.push_back(best.cost.total);
  }
  diag.best_trace.push_back(best.cost.total);

  // Zero-temperature pattern search on the best point.
  if (cfg.polish && std::isfinite(best.cost.total)) {
    double step = 1.0;
    for (int pass = 0; pass < 2000 && step > 1e-6; ++pass) {
      bool improved = false;
      for (int k = 0; k < P + L; ++k) {
        for (double dir : {-1.0, 1.0}) {
          Candidate cand;
          cand.angles = best.angles;
          cand.weights = best.weights;
          if (k < P) {
            cand.angles[k] = wrap_angle(cand.angles[k] + dir * step * cfg.sigma_angle);
          } else {
            cand.weights[k - P] *= std::exp(dir * step * cfg.sigma_weight);
          }
          evaluate(cand);
          ++diag.polish_evaluations;
          if (cand.cost.total < best.cost.total - 1e-12 * std::abs(best.cost.total)) {
            best = std::move(cand);
            improved = true;
          }
        }
      }
      if (!improved) step *= 0.5;
    }
    diag.best_trace.push_back(best.cost.total);
  }

  out.plan = std::move(best.plan);
  out.cost = best.cost;
  return out;
}

PlanResult plan(const PlanningContext& ctx, const SAConfig& cfg) {
  cfg.validate();
  const int Q = ctx.map.size();
  std::vector<DepthOutcome> outcomes(static_cast<size_t>(Q));
  auto run_depth = [&](size_t j) {
    DepthOutcome& o = outcomes[j];
    o.depth = static_cast<int>(j);
    try {
      o.result = anneal(ctx, o.depth, cfg, derive_seed(cfg.seed, j));
      o.feasible = std::isfinite(o.result.cost.total);
      if (!o.feasible) o.reason = "no candidate with finite cost";
    } catch (const PlanningError& e) {
      o.reason = e.what();
    }
  };

  // Every plan costs at least E_0 / E_0 = 1 at lambda = 1 without obstacles,
  // so a feasible baseline wins and deeper depths need no search.
  size_t first = 0;
  if (ctx.problem.lambda == 1.0 && ctx.problem.obstacles.empty()) {
    run_depth(0);
    first = 1;
    if (outcomes[0].feasible) {
      for (size_t j = 1; j < outcomes.size(); ++j) {
        outcomes[j].depth = static_cast<int>(j);
        outcomes[j].reason = "not searched: the baseline is optimal at lambda = 1";
      }
      first = outcomes.size();
    }
  }
  if (first < outcomes.size()) {
    parallel_for(outcomes.size() - first, cfg.workers, [&](size_t i) { run_depth(first + i); });
  }

  const DepthOutcome* chosen = nullptr;
  for (const auto& o : outcomes) {
    if (!o.feasible) continue;
    if (!chosen || o.result.cost.total < chosen->result.cost.total) chosen = &o;
  }
  if (!chosen) {
    std::ostringstream msg;
    msg << "no feasible depth:";
    for (const auto& o : outcomes) msg << "\n  j=" << o.depth << ": " << o.reason;
    throw PlanningError(msg.str());
  }

  PlanResult r;
  r.depth = chosen->depth;
  r.waypoints = chosen->result.plan;
  r.breakdown = chosen->result.cost;
  r.diagnostics = chosen->result.diagnostics;
  r.trajectory = build_trajectory(r.waypoints, ctx.solver);
  r.energy = r.trajectory.energy();
  r.baseline_energy = ctx.baseline.energy;
  r.bits_approx = r.breakdown.bits;
  r.cost = r.breakdown.total;
  r.depths = std::move(outcomes);
  return r;
}

}  // namespace commtraj
