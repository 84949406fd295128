// Optimal radial quantization of the expected-rate curve.
//
// Breakpoints are handled internally as increasing distances
// x_1 < ... < x_{Q-1} measured from the access point; the public map stores
// them outermost first (d_j = x_{Q-j}).

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>

#include "commtraj/channel.hpp"
#include "commtraj/errors.hpp"
#include "commtraj/random.hpp"

namespace commtraj {
namespace {

// E[R] along a ray with cumulative integrals of E[R] and E[R]^2 on a fixed
// Simpson grid. Partial cells are integrated with their own Simpson rule.
class RadialProfile {
 public:
  RadialProfile(const ChannelParams& params, const RateLadder& ladder,
                double radius, int cells)
      : params_(params), ladder_(ladder), radius_(radius), cells_(cells),
        h_(radius / cells), cum1_(cells + 1, 0.0), cum2_(cells + 1, 0.0) {
    for (int i = 0; i < cells_; ++i) {
      const auto [a1, a2] = cell(i * h_, (i + 1) * h_);
      cum1_[i + 1] = cum1_[i] + a1;
      cum2_[i + 1] = cum2_[i] + a2;
    }
  }

  double value(double nu) const {
    return expected_rate_at_distance(std::max(nu, params_.min_standoff),
                                     params_, ladder_);
  }
  double radius() const { return radius_; }

  // (int_a^b e, int_a^b e^2). Whole cells come from the cumulative table and
  // the partial end pieces get their own Simpson rule, so every weight stays
  // positive and int e^2 * len >= (int e)^2 holds on any ring.
  std::pair<double, double> integral(double a, double b) const {
    a = std::clamp(a, 0.0, radius_);
    b = std::clamp(b, 0.0, radius_);
    if (!(b > a)) return {0.0, 0.0};
    const int ia = std::min(static_cast<int>(a / h_), cells_ - 1);
    const int ib = std::min(static_cast<int>(b / h_), cells_ - 1);
    if (ia == ib) return cell(a, b);
    const auto head = cell(a, (ia + 1) * h_);
    const double left_b = ib * h_;
    const auto tail = b > left_b ? cell(left_b, b) : std::pair<double, double>{0.0, 0.0};
    return {head.first + (cum1_[ib] - cum1_[ia + 1]) + tail.first,
            head.second + (cum2_[ib] - cum2_[ia + 1]) + tail.second};
  }

 private:
  std::pair<double, double> cell(double a, double b) const {
    const double ea = value(a), em = value(0.5 * (a + b)), eb = value(b);
    const double w = (b - a) / 6.0;
    return {w * (ea + 4 * em + eb), w * (ea * ea + 4 * em * em + eb * eb)};
  }

  const ChannelParams& params_;
  const RateLadder& ladder_;
  double radius_;
  int cells_;
  double h_;
  std::vector<double> cum1_, cum2_;
};

struct Partition {
  std::vector<double> x;  // increasing breakpoints
  double error = std::numeric_limits<double>::infinity();
};

class Objective {
 public:
  Objective(const RadialProfile& profile, double top)
      : profile_(profile), top_(top) {}

  // Squared error of level L on [a, b] given the two integrals.
  static double fixed_cost(double L, double len, double i1, double i2) {
    return L * L * len - 2 * L * i1 + i2;
  }
  static double free_cost(double len, double i1, double i2) {
    return len > 0.0 ? i2 - i1 * i1 / len : 0.0;
  }

  double operator()(const std::vector<double>& x) const {
    const size_t n = x.size();
    double prev = 0.0;
    double total = 0.0;
    for (size_t k = 0; k <= n; ++k) {
      const double b = k < n ? x[k] : profile_.radius();
      const auto [i1, i2] = profile_.integral(prev, b);
      const double len = b - prev;
      if (k == 0) {
        total += fixed_cost(top_, len, i1, i2);
      } else if (k == n) {
        total += fixed_cost(0.0, len, i1, i2);
      } else {
        total += free_cost(len, i1, i2);
      }
      prev = b;
    }
    return std::max(total, 0.0);
  }

  std::vector<double> levels(const std::vector<double>& x) const {
    // Innermost first.
    std::vector<double> out{top_};
    for (size_t k = 1; k < x.size(); ++k) {
      const double len = x[k] - x[k - 1];
      out.push_back(len > 0.0 ? profile_.integral(x[k - 1], x[k]).first / len
                              : profile_.value(x[k]));
    }
    out.push_back(0.0);
    return out;
  }

 private:
  const RadialProfile& profile_;
  double top_;
};

// Globally optimal partition restricted to a uniform node grid.
Partition grid_partition(const Objective& f, const RadialProfile& profile,
                         int breakpoints, int nodes, double top) {
  const double D = profile.radius();
  std::vector<double> nu(nodes + 1);
  std::vector<std::pair<double, double>> c(nodes + 1);
  for (int i = 0; i <= nodes; ++i) {
    nu[i] = D * i / nodes;
    c[i] = profile.integral(0.0, nu[i]);
  }
  auto seg = [&](int a, int b) {
    return std::tuple{nu[b] - nu[a], c[b].first - c[a].first,
                      c[b].second - c[a].second};
  };
  const double inf = std::numeric_limits<double>::infinity();
  // cost[k][i]: best cost of [0, nu_i] with breakpoint k (0-based) at node i.
  std::vector<std::vector<double>> cost(breakpoints,
                                        std::vector<double>(nodes + 1, inf));
  std::vector<std::vector<int>> from(breakpoints,
                                     std::vector<int>(nodes + 1, -1));
  for (int i = 1; i <= nodes; ++i) {
    const auto [len, i1, i2] = seg(0, i);
    cost[0][i] = Objective::fixed_cost(top, len, i1, i2);
  }
  for (int k = 1; k < breakpoints; ++k) {
    for (int i = k + 1; i <= nodes; ++i) {
      for (int j = k; j < i; ++j) {
        if (cost[k - 1][j] == inf) continue;
        const auto [len, i1, i2] = seg(j, i);
        const double v = cost[k - 1][j] + Objective::free_cost(len, i1, i2);
        if (v < cost[k][i]) {
          cost[k][i] = v;
          from[k][i] = j;
        }
      }
    }
  }
  Partition best;
  int last = -1;
  for (int i = breakpoints; i <= nodes; ++i) {
    if (cost[breakpoints - 1][i] == inf) continue;
    const auto [len, i1, i2] = seg(i, nodes);
    const double v = cost[breakpoints - 1][i] + Objective::fixed_cost(0.0, len, i1, i2);
    if (v < best.error) {
      best.error = v;
      last = i;
    }
  }
  best.x.assign(breakpoints, 0.0);
  for (int k = breakpoints - 1, i = last; k >= 0; i = from[k][i], --k) {
    best.x[k] = nu[i];
  }
  best.error = f(best.x);
  return best;
}

class Constraints {
 public:
  explicit Constraints(double D) : D_(D), gap_(1e-9 * D) {}
  bool feasible(const std::vector<double>& x) const {
    if (x.front() <= gap_ || x.back() > D_) return false;
    for (size_t k = 1; k < x.size(); ++k) {
      if (!(x[k] - x[k - 1] > gap_)) return false;
    }
    return true;
  }

 private:
  double D_;
  double gap_;
};

Partition anneal_partition(const Objective& f, const Constraints& cons,
                           Partition start, double D, int iterations,
                           double cooling, Rng& rng) {
  Partition current = start;
  Partition best = start;
  std::normal_distribution<double> step(0.0, 1.0);
  std::uniform_int_distribution<size_t> pick(0, start.x.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double temperature = 0.05 * std::max(start.error, 1e-12);
  double sigma = 0.02 * D;
  for (int it = 0; it < iterations; ++it) {
    Partition cand = current;
    cand.x[pick(rng)] += sigma * step(rng);
    if (cons.feasible(cand.x)) {
      cand.error = f(cand.x);
      const double delta = cand.error - current.error;
      if (delta <= 0.0 || unit(rng) < std::exp(-delta / temperature)) {
        current = cand;
        if (current.error < best.error) best = current;
      }
    }
    temperature *= cooling;
    sigma = std::max(sigma * std::sqrt(cooling), 1e-4 * D);
  }
  return best;
}

Partition polish(const Objective& f, const Constraints& cons, Partition p,
                 double D) {
  for (double s = 0.01 * D; s > 1e-11 * D;) {
    bool improved = false;
    for (size_t k = 0; k < p.x.size(); ++k) {
      for (double dir : {-1.0, 1.0}) {
        auto x = p.x;
        x[k] += dir * s;
        if (!cons.feasible(x)) continue;
        const double e = f(x);
        if (e < p.error) {
          p.x = std::move(x);
          p.error = e;
          improved = true;
        }
      }
    }
    if (!improved) s *= 0.5;
  }
  return p;
}

// Inserts one breakpoint in the middle of the widest piece; the error cannot
// increase because the new piece may keep its neighbour's level.
Partition refine(const Objective& f, const Partition& p, double D) {
  std::vector<double> edges{0.0};
  edges.insert(edges.end(), p.x.begin(), p.x.end());
  edges.push_back(D);
  size_t widest = 0;
  for (size_t k = 1; k + 1 < edges.size(); ++k) {
    if (edges[k + 1] - edges[k] > edges[widest + 1] - edges[widest]) widest = k;
  }
  Partition out;
  out.x = p.x;
  out.x.insert(out.x.begin() + static_cast<long>(widest),
               0.5 * (edges[widest] + edges[widest + 1]));
  std::sort(out.x.begin(), out.x.end());
  out.error = f(out.x);
  return out;
}

}  // namespace

QuantizedRateMap quantize_expected_rate(const ChannelParams& params,
                                        const RateLadder& ladder, int Q,
                                        double domain_radius,
                                        const QuantizerConfig& cfg) {
  params.validate();
  ladder.validate();
  if (Q < 2) throw ParameterError("quantize_expected_rate: Q must be >= 2");
  if (!(domain_radius > 0.0)) {
    throw ParameterError("quantize_expected_rate: domain radius must be positive");
  }
  if (cfg.grid_intervals < 2 || cfg.dp_intervals < Q) {
    throw ParameterError("quantize_expected_rate: grid too coarse for Q");
  }

  const double D = domain_radius;
  const double top = ladder.max_rate();
  const RadialProfile profile(params, ladder, D, cfg.grid_intervals);
  const Objective f(profile, top);
  const Constraints cons(D);

  // Solve the nested sequence q = 2..Q so the error is non-increasing in q:
  // each stage also starts from the previous optimum with one extra piece.
  std::optional<Partition> previous;
  Partition best;
  for (int q = 2; q <= Q; ++q) {
    Rng rng(derive_seed(cfg.seed, 0x5155414eULL, static_cast<std::uint64_t>(q)));
    Partition cand = grid_partition(f, profile, q - 1, cfg.dp_intervals, top);
    cand = anneal_partition(f, cons, cand, D, cfg.sa_iterations, cfg.cooling, rng);
    cand = polish(f, cons, cand, D);
    if (previous) {
      Partition warm = polish(f, cons, refine(f, *previous, D), D);
      if (warm.error < cand.error) cand = warm;
    }
    previous = cand;
    best = cand;
  }

  QuantizedRateMap map;
  map.domain_radius = D;
  map.ap_position = params.ap_position;
  map.error = best.error;
  const auto inner_first = f.levels(best.x);
  map.levels.assign(inner_first.rbegin(), inner_first.rend());
  map.radii.assign(best.x.rbegin(), best.x.rend());
  for (size_t j = 1; j < map.levels.size(); ++j) {
    if (std::abs(map.levels[j] - map.levels[j - 1]) <= 1e-9 * top) {
      map.duplicated_levels = true;
    }
  }
  // A ring thinner than one integration cell only absorbs quadrature error
  // at a jump of E[R]; it is not a plateau of its own.
  const double cell = D / cfg.grid_intervals;
  for (size_t k = 1; k < best.x.size(); ++k) {
    if (best.x[k] - best.x[k - 1] < cell) map.duplicated_levels = true;
  }
  return map;
}

}  // namespace commtraj
