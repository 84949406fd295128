#include "commtraj/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "commtraj/errors.hpp"

namespace commtraj {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

json vec_json(const Vec2& v) { return json::array({v.x(), v.y()}); }
json vec_json(const Vec4& v) { return json::array({v(0), v(1), v(2), v(3)}); }

Vec4 vec4_from(const json& j) {
  if (!j.is_array() || j.size() != 4) throw ConfigError("plan: expected a 4-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw ConfigError("failed writing '" + path.string() + "'");
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string ratemap_json(const QuantizedRateMap& map, const RateLadder& ladder) {
  json j;
  j["levels"] = map.levels;
  j["radii"] = map.radii;
  j["error"] = map.error;
  j["domain_radius"] = map.domain_radius;
  j["duplicated_levels"] = map.duplicated_levels;
  j["ap_position"] = vec_json(map.ap_position);
  j["ladder_rates"] = ladder.rates;
  j["ladder_thresholds"] = ladder.thresholds;
  return j.dump(2) + "\n";
}

std::string ratecurve_csv(const QuantizedRateMap& map, const ChannelParams& ch,
                          const RateLadder& ladder) {
  std::string out = "radius,expected_rate,quantized_rate\r\n";
  const int steps = 500;
  for (int i = 0; i <= steps; ++i) {
    const double d = ch.min_standoff + (map.domain_radius - ch.min_standoff) * i / steps;
    out += format_number(d) + "," + format_number(expected_rate_at_distance(d, ch, ladder)) +
           "," + format_number(map.value_at_distance(d)) + "\r\n";
  }
  return out;
}

std::string path_csv(const Trajectory& traj, double dt) {
  std::string out = "t,x,y,speed\r\n";
  for (const auto& s : sample_path(traj, dt)) {
    out += format_number(s.t) + "," + format_number(s.position.x()) + "," +
           format_number(s.position.y()) + "," + format_number(s.speed) + "\r\n";
  }
  return out;
}

struct Options {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_given = false;
  double lambda = 0.0;
  bool lambda_given = false;
  int trials = 0;
  int workers = 0;
  int levels = 0;
  std::string lambdas;
  std::string plan_path;
  bool quiet = false;
};

RunConfig resolve_config(const Options& o) {
  RunConfig cfg = o.config_path.empty() ? default_config() : load_config(o.config_path);
  std::uint64_t seed = cfg.seed;
  if (o.seed_given) seed = o.seed;
  if (const char* env = std::getenv("COMMTRAJ_SEED"); env && *env) {
    try {
      size_t used = 0;
      seed = std::stoull(env, &used, 10);
      if (env[used] != '\0') throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ConfigError(std::string("COMMTRAJ_SEED is not an unsigned integer: ") + env);
    }
  }
  cfg.apply_seed(seed);
  if (o.lambda_given) cfg.problem.lambda = o.lambda;
  if (o.trials > 0) cfg.sim.n_trials = o.trials;
  if (o.workers > 0) {
    cfg.sa.workers = o.workers;
    cfg.sim.workers = o.workers;
  }
  if (o.levels != 0) cfg.levels = o.levels;
  if (!o.out_dir.empty()) cfg.output_dir = o.out_dir;
  cfg.validate();
  return cfg;
}

fs::path prepare_out(const RunConfig& cfg) {
  fs::path dir(cfg.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir.string() + "'");
  return dir;
}

int cmd_init(const Options& o) {
  const std::string text = config_template();
  if (o.out_dir.empty()) {
    std::cout << text;
  } else {
    fs::create_directories(o.out_dir);
    write_file(fs::path(o.out_dir) / "config.json", text);
  }
  return kExitOk;
}

int cmd_quantize(const Options& o) {
  const RunConfig cfg = resolve_config(o);
  const RateLadder ladder = cfg.ladder.build();
  const QuantizedRateMap map = build_rate_map(cfg);
  const fs::path dir = prepare_out(cfg);
  write_file(dir / "ratemap.json", ratemap_json(map, ladder));
  write_file(dir / "ratecurve.csv", ratecurve_csv(map, cfg.channel, ladder));
  if (!o.quiet) {
    std::cout << "Q=" << map.size() << " E_Q=" << format_number(map.error) << "\n";
  }
  return kExitOk;
}

int cmd_plan(const Options& o) {
  const RunConfig cfg = resolve_config(o);
  const QuantizedRateMap map = build_rate_map(cfg);
  const PlanningContext ctx = make_context(cfg, map);
  const PlanResult result = plan(ctx, cfg.sa);
  const fs::path dir = prepare_out(cfg);
  write_file(dir / "plan.json", plan_to_json(result));
  write_file(dir / "path.csv", path_csv(result.trajectory, cfg.sim.dt_sample));
  if (!o.quiet) {
    std::cout << "depth=" << result.depth << " cost=" << format_number(result.cost)
              << " energy_ratio=" << format_number(result.energy_ratio())
              << " bits_approx=" << format_number(result.bits_approx) << "\n";
  }
  return kExitOk;
}

std::vector<double> parse_lambdas(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  ss.imbue(std::locale::classic());
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    std::istringstream is(item);
    is.imbue(std::locale::classic());
    double v;
    if (!(is >> v) || !(is >> std::ws).eof()) throw ConfigError("bad lambda value '" + item + "'");
    out.push_back(v);
  }
  return out;
}

int cmd_sweep(const Options& o, bool lambdas_given) {
  RunConfig cfg = resolve_config(o);
  if (lambdas_given) cfg.sweep_lambdas = parse_lambdas(o.lambdas);
  if (cfg.sweep_lambdas.empty()) throw ConfigError("sweep: empty lambda list");
  for (double l : cfg.sweep_lambdas) {
    if (!(l >= 0.0 && l <= 1.0)) throw ConfigError("sweep: lambda outside [0, 1]");
  }
  const QuantizedRateMap map = build_rate_map(cfg);
  const PlanningContext ctx = make_context(cfg, map);
  const auto rows = lambda_sweep(ctx, cfg.sweep_lambdas, cfg.sa, cfg.sim);
  const fs::path dir = prepare_out(cfg);
  std::ostringstream csv;
  write_sweep_csv(csv, rows);
  write_file(dir / "table1.csv", csv.str());
  bool any = false;
  for (const auto& r : rows) any = any || r.ok;
  if (!o.quiet) std::cout << csv.str();
  return any ? kExitOk : kExitPlanning;
}

int cmd_validate(const Options& o) {
  const RunConfig cfg = resolve_config(o);
  const fs::path dir(cfg.output_dir);
  const fs::path plan_path = o.plan_path.empty() ? dir / "plan.json" : fs::path(o.plan_path);
  const WaypointPlan w = plan_from_json(read_file(plan_path));
  const SegmentSolver solver(build_linear_model(cfg.quadrotor), cfg.mincontrol);
  const Trajectory traj = build_trajectory(w, solver);
  const PlanarControl control = [&traj](double t) { return traj.control(t); };

  json report;
  int code = kExitOk;
  try {
    const NonlinearReport r = simulate_nonlinear_validated(
        cfg.quadrotor, control, FullState::hover_at(w.points.front()), 0.0, traj.duration());
    report["ok"] = true;
    report["max_deviation"] = r.max_deviation;
    report["path_length"] = r.path_length;
    report["relative_deviation"] = r.path_length > 0.0 ? r.max_deviation / r.path_length : 0.0;
    report["max_tilt"] = r.max_tilt;
    report["min_rotor_speed_sq"] = r.min_rotor_speed_sq;
    report["realizable"] = r.realizable;
  } catch (const ValidationError& e) {
    report["ok"] = false;
    report["error"] = e.what();
    report["violation_time"] = e.time();
    code = kExitValidation;
  }
  fs::create_directories(dir);
  write_file(dir / "validation.json", report.dump(2) + "\n");
  if (!o.quiet) std::cout << report.dump() << "\n";
  if (code != kExitOk) std::cerr << "validation failed: " << report["error"].get<std::string>() << "\n";
  return code;
}

}  // namespace

int exit_code_for_current_exception() {
  try {
    throw;
  } catch (const ConfigError&) {
    return kExitConfig;
  } catch (const ParameterError&) {
    return kExitConfig;
  } catch (const PlanningError&) {
    return kExitPlanning;
  } catch (const ValidationError&) {
    return kExitValidation;
  } catch (const Error&) {
    return kExitNumeric;
  } catch (...) {
    return kExitNumeric;
  }
}

QuantizedRateMap build_rate_map(const RunConfig& cfg) {
  return quantize_expected_rate(cfg.channel, cfg.ladder.build(), cfg.levels,
                                cfg.effective_domain_radius(), cfg.quantizer);
}

PlanningContext make_context(const RunConfig& cfg, const QuantizedRateMap& map) {
  return PlanningContext(cfg.problem,
                         SegmentSolver(build_linear_model(cfg.quadrotor), cfg.mincontrol),
                         cfg.channel, cfg.ladder.build(), map);
}

std::string plan_to_json(const PlanResult& r) {
  const WaypointPlan& w = r.waypoints;
  json j;
  j["depth"] = r.depth;
  j["cost"] = r.cost;
  j["energy"] = r.energy;
  j["baseline_energy"] = r.baseline_energy;
  j["energy_ratio"] = r.energy_ratio();
  j["bits_approx"] = r.bits_approx;
  j["comm_term"] = r.breakdown.comm_term;
  j["obstacle_penalty"] = r.breakdown.penalty;
  json points = json::array();
  for (const auto& p : w.points) points.push_back(vec_json(p));
  j["points"] = points;
  j["angles"] = w.angles;
  j["radii"] = w.radii;
  j["durations"] = w.durations;
  j["leg_levels"] = w.leg_levels;
  json boundary = json::array();
  for (const auto& s : w.boundary) boundary.push_back({{"x", vec_json(s.x)}, {"y", vec_json(s.y)}});
  j["boundary"] = boundary;
  json diag;
  diag["iterations"] = r.diagnostics.iterations;
  diag["accepted"] = r.diagnostics.accepted;
  diag["acceptance_rate"] = r.diagnostics.acceptance_rate();
  diag["initial_temperature"] = r.diagnostics.initial_temperature;
  diag["best_trace"] = r.diagnostics.best_trace;
  j["diagnostics"] = diag;
  json depths = json::array();
  for (const auto& d : r.depths) {
    json e;
    e["depth"] = d.depth;
    e["feasible"] = d.feasible;
    if (d.feasible) {
      e["cost"] = d.result.cost.total;
    } else {
      e["reason"] = d.reason;
    }
    depths.push_back(e);
  }
  j["depths"] = depths;
  return j.dump(2) + "\n";
}

WaypointPlan plan_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    WaypointPlan w;
    w.depth = j.at("depth").get<int>();
    for (const auto& p : j.at("points")) w.points.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    w.angles = j.at("angles").get<std::vector<double>>();
    w.radii = j.at("radii").get<std::vector<double>>();
    w.durations = j.at("durations").get<std::vector<double>>();
    w.leg_levels = j.at("leg_levels").get<std::vector<int>>();
    for (const auto& b : j.at("boundary")) {
      PlanarState s;
      s.x = vec4_from(b.at("x"));
      s.y = vec4_from(b.at("y"));
      w.boundary.push_back(s);
    }
    const size_t L = w.durations.size();
    if (L == 0 || w.points.size() != L + 1 || w.boundary.size() != L + 1 ||
        w.leg_levels.size() != L) {
      throw ConfigError("plan file: inconsistent waypoint/leg counts");
    }
    return w;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("plan file: ") + e.what());
  }
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Communication-aware trajectory planning for a quadrotor"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--config", o.config_path, "JSON configuration file");
  app.add_option("--out", o.out_dir, "output directory");
  auto* seed_opt = app.add_option("--seed", o.seed, "master seed (COMMTRAJ_SEED overrides)");
  auto* lambda_opt = app.add_option("--lambda", o.lambda, "energy weight in [0, 1]");
  app.add_option("--trials", o.trials, "Monte-Carlo trials")->check(CLI::PositiveNumber);
  app.add_option("--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--quiet", o.quiet, "suppress summaries on stdout");
  app.fallthrough();

  auto* init = app.add_subcommand("init", "print or write a commented config template");
  auto* quantize = app.add_subcommand("quantize", "quantize the expected-rate curve");
  quantize->add_option("--levels,-Q", o.levels, "number of levels Q");
  auto* plan_cmd = app.add_subcommand("plan", "plan one trajectory");
  auto* sweep = app.add_subcommand("sweep", "plan and simulate a list of lambdas");
  auto* lambdas_opt = sweep->add_option("--lambdas", o.lambdas, "comma-separated lambda list");
  auto* validate = app.add_subcommand("validate", "check a plan on the nonlinear model");
  validate->add_option("--plan", o.plan_path, "plan file (default OUT/plan.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }
  o.seed_given = seed_opt->count() > 0;
  o.lambda_given = lambda_opt->count() > 0;
  if (o.levels == 1 || o.levels < 0) {
    std::cerr << "error: Q must be >= 2\n";
    return kExitConfig;
  }

  try {
    if (init->parsed()) return cmd_init(o);
    if (quantize->parsed()) return cmd_quantize(o);
    if (plan_cmd->parsed()) return cmd_plan(o);
    if (sweep->parsed()) return cmd_sweep(o, lambdas_opt->count() > 0);
    if (validate->parsed()) return cmd_validate(o);
  } catch (const std::exception& e) {
    const int code = exit_code_for_current_exception();
    std::cerr << "error: " << e.what() << "\n";
    return code;
  }
  return kExitConfig;
}

}  // namespace commtraj
