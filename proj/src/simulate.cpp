#include "commtraj/simulate.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>

#include "commtraj/errors.hpp"
#include "commtraj/parallel.hpp"
#include "commtraj/random.hpp"

namespace commtraj {

void SimConfig::validate() const {
  if (n_trials < 1) throw ParameterError("sim: n_trials must be >= 1");
  if (!(dt_sample > 0.0)) throw ParameterError("sim: dt_sample must be positive");
  if (workers < 1) throw ParameterError("sim: workers must be >= 1");
}

BitsEstimate measure_bits(const Trajectory& traj, const ChannelParams& channel,
                          const RateLadder& ladder, const SimConfig& cfg) {
  cfg.validate();
  channel.validate();
  ladder.validate();
  const double t_f = traj.duration();
  const auto periods = static_cast<size_t>(std::floor(t_f / ladder.period)) + 1;
  std::vector<double> mean_db(periods);
  for (size_t k = 0; k < periods; ++k) {
    const double t = std::min(static_cast<double>(k) * ladder.period, t_f);
    const double d = std::max(channel.distance(traj.state(t).position()), channel.min_standoff);
    mean_db[k] = mean_snr_db(d, channel);
  }
  const double sigma = std::sqrt(channel.shadow_var_db);

  std::vector<double> totals(static_cast<size_t>(cfg.n_trials));
  parallel_for(totals.size(), cfg.workers, [&](size_t i) {
    Rng rng(derive_seed(cfg.seed, i));
    std::normal_distribution<double> shadow(0.0, 1.0);
    double bits = 0.0;
    for (double mu : mean_db) {
      const double db = mu + sigma * shadow(rng);
      bits += ladder.tx_time * ladder.rate_for_snr(std::pow(10.0, db / 10.0));
    }
    totals[i] = bits;
  });

  double sum = 0.0;
  for (double v : totals) sum += v;
  const double n = static_cast<double>(totals.size());
  const double mean = sum / n;
  double ss = 0.0;
  for (double v : totals) ss += (v - mean) * (v - mean);
  BitsEstimate out;
  out.mean = mean;
  out.standard_error = totals.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  return out;
}

SimReport run_sim(const PlanResult& plan, const PlanResult& baseline,
                  const ChannelParams& channel, const RateLadder& ladder,
                  const SimConfig& cfg) {
  const double t1 = plan.trajectory.duration();
  const double t0 = baseline.trajectory.duration();
  if (std::abs(t1 - t0) > 1e-9 * std::max(1.0, t0)) {
    throw ConfigError("run_sim: plan and baseline durations differ");
  }
  const BitsEstimate b = measure_bits(plan.trajectory, channel, ladder, cfg);
  const BitsEstimate b0 = measure_bits(baseline.trajectory, channel, ladder, cfg);
  SimReport r;
  r.energy_ratio = plan.energy / baseline.energy;
  r.bits_approx = plan.bits_approx;
  r.bits_measured = b.mean;
  r.bits_stderr = b.standard_error;
  r.baseline_bits_measured = b0.mean;
  if (b0.mean > 0.0) {
    r.transmission_ratio = b.mean / b0.mean;
  } else {
    r.transmission_ratio = b.mean > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
  }
  r.bits_unit = ladder.symbol_rate * ladder.tx_time / ladder.period;
  return r;
}

std::vector<PathSample> sample_path(const Trajectory& traj, double dt) {
  if (!(dt > 0.0)) throw ParameterError("sample_path: dt must be positive");
  const double t_f = traj.duration();
  const auto steps = static_cast<size_t>(std::floor(t_f / dt + 1e-9));
  std::vector<PathSample> out;
  out.reserve(steps + 2);
  for (size_t k = 0; k <= steps; ++k) {
    const double t = std::min(static_cast<double>(k) * dt, t_f);
    const PlanarState s = traj.state(t);
    out.push_back({t, s.position(), s.velocity().norm()});
  }
  if (out.back().t < t_f) {
    const PlanarState s = traj.state(t_f);
    out.push_back({t_f, s.position(), s.velocity().norm()});
  }
  return out;
}

std::vector<std::pair<double, double>> speed_profile(const Trajectory& traj, double dt) {
  std::vector<std::pair<double, double>> out;
  for (const auto& s : sample_path(traj, dt)) out.emplace_back(s.t, s.speed);
  return out;
}

int count_local_maxima(const std::vector<double>& v, double rel_prominence) {
  const size_t n = v.size();
  if (n < 3) return 0;
  double top = 0.0;
  for (double x : v) top = std::max(top, x);
  if (!(top > 0.0)) return 0;
  const double need = rel_prominence * top;
  int count = 0;
  for (size_t i = 1; i + 1 < n; ++i) {
    if (!(v[i] > v[i - 1])) continue;
    // Plateau: the peak extends while values stay equal.
    size_t j = i;
    while (j + 1 < n && v[j + 1] == v[i]) ++j;
    if (j + 1 >= n || !(v[j + 1] < v[i])) {
      i = j;
      continue;
    }
    double left = v[i], right = v[i];
    for (size_t k = i; k-- > 0 && v[k] <= v[i];) left = std::min(left, v[k]);
    for (size_t k = j + 1; k < n && v[k] <= v[i]; ++k) right = std::min(right, v[k]);
    if (v[i] - std::max(left, right) >= need) ++count;
    i = j;
  }
  return count;
}

std::vector<SweepRow> lambda_sweep(const PlanningContext& base,
                                   const std::vector<double>& lambdas,
                                   const SAConfig& sa, const SimConfig& sim) {
  if (lambdas.empty()) throw ConfigError("lambda_sweep: empty lambda list");
  std::vector<SweepRow> rows;
  for (double lambda : lambdas) {
    SweepRow row;
    row.lambda = lambda;
    try {
      PlanningContext ctx = base;
      ctx.problem.lambda = lambda;
      ctx.problem.validate();
      row.plan = plan(ctx, sa);
      const PlanResult met = baseline_plan(ctx);
      row.report = run_sim(row.plan, met, ctx.channel, ctx.ladder, sim);
      row.ok = true;
    } catch (const Error& e) {
      row.note = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "lambda,energy_ratio,transmission_ratio,bits_approx,bits_measured,bits_stderr,note\r\n";
  for (const auto& row : rows) {
    os << format_number(row.lambda) << ',';
    if (row.ok) {
      const SimReport& r = row.report;
      os << format_number(r.energy_ratio) << ',' << format_number(r.transmission_ratio) << ','
         << format_number(r.bits_approx / r.bits_unit) << ','
         << format_number(r.bits_measured / r.bits_unit) << ','
         << format_number(r.bits_stderr / r.bits_unit) << ',';
    } else {
      os << ",,,,,";
    }
    os << csv_field(row.note) << "\r\n";
  }
}

}  // namespace commtraj
