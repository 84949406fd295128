#include "commtraj/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "commtraj/errors.hpp"
#include "commtraj/random.hpp"

namespace commtraj {
namespace {

using json = nlohmann::json;

struct Field {
  std::string key;
  json value;
  std::string comment;
};

struct Group {
  std::string name;  // empty for top-level keys
  std::vector<Field> fields;
};

json vec2_json(const Vec2& v) { return json::array({v.x(), v.y()}); }

json obstacles_json(const std::vector<Obstacle>& obs) {
  json out = json::array();
  for (const auto& o : obs) {
    out.push_back({{"center", vec2_json(o.center)}, {"radius", o.radius}, {"k1", o.k1}, {"k2", o.k2}});
  }
  return out;
}

std::vector<Group> describe(const RunConfig& c) {
  const auto& q = c.quadrotor;
  const auto& ch = c.channel;
  const auto& l = c.ladder;
  const auto& p = c.problem;
  return {
      {"",
       {{"seed", c.seed, "master seed; overridden by --seed and COMMTRAJ_SEED"},
        {"output_dir", c.output_dir, "artifact directory; overridden by --out"},
        {"levels", c.levels, "number of quantization levels Q (>= 2)"},
        {"domain_radius", c.domain_radius, "m, radial extent of the quantized rate map; 0 = farther of start and goal"},
        {"sweep_lambdas", c.sweep_lambdas, "lambda values for the sweep command"}}},
      {"quadrotor",
       {{"mass", q.mass, "kg"},
        {"gravity", q.gravity, "m/s^2"},
        {"arm_length", q.arm_length, "m, rotor arm"},
        {"inertia", q.inertia, "kg m^2, roll/pitch"},
        {"yaw_inertia", q.yaw_inertia, "kg m^2"},
        {"rotor_inertia", q.rotor_inertia, "kg m^2"},
        {"thrust_factor", q.thrust_factor, "thrust per squared rotor speed"},
        {"drag_factor", q.drag_factor, "drag torque per squared rotor speed"},
        {"az1", q.az1, "altitude feedback, velocity gain"},
        {"az2", q.az2, "altitude feedback, position gain"},
        {"apsi1", q.apsi1, "yaw feedback, rate gain"},
        {"apsi2", q.apsi2, "yaw feedback, angle gain"}}},
      {"channel",
       {{"path_loss_exponent", ch.path_loss_exponent, "alpha"},
        {"snr_ref_db", ch.snr_ref_db, "dB, 10 log10(P / sigma^2)"},
        {"shadow_var_db", ch.shadow_var_db, "dB^2, shadowing variance"},
        {"ap_position", vec2_json(ch.ap_position), "m, access point"},
        {"min_standoff", ch.min_standoff, "m, closest admissible distance to the access point"}}},
      {"ladder",
       {{"bits_per_symbol", l.bits_per_symbol, "QAM schemes, bits per symbol"},
        {"target_ber", l.target_ber, "bit error rate bound used for the thresholds"},
        {"symbol_rate", l.symbol_rate, "R_s"},
        {"period", l.period, "s, duplexing period T"},
        {"tx_time", l.tx_time, "s, transmission phase T_tx < T"}}},
      {"problem",
       {{"start", vec2_json(p.start), "m"},
        {"goal", vec2_json(p.goal), "m"},
        {"t_f", p.t_f, "s, mission time"},
        {"lambda", p.lambda, "energy weight in [0, 1]; overridden by --lambda"},
        {"objective", p.objective == CommObjective::MaxData ? "max_data" : "quota",
         "max_data or quota"},
        {"quota_bits", p.quota_bits, "N_0, quota mode only"},
        {"eta", p.eta, "quota penalty steepness"},
        {"obstacles", obstacles_json(p.obstacles),
         "list of {center: [x, y], radius, k1, k2}"}}},
      {"quantizer",
       {{"grid_intervals", c.quantizer.grid_intervals, "Simpson cells on [0, domain_radius]"},
        {"dp_intervals", c.quantizer.dp_intervals, "grid of the initial partition"},
        {"sa_iterations", c.quantizer.sa_iterations, "annealing steps per Q"},
        {"cooling", c.quantizer.cooling, "geometric cooling factor"}}},
      {"mincontrol",
       {{"tau_min", c.mincontrol.tau_min, "s, shortest leg"},
        {"condition_cap", c.mincontrol.condition_cap, "cap on the equilibrated Gramian condition number"}}},
      {"sa",
       {{"iterations", c.sa.iterations, "per depth"},
        {"initial_samples", c.sa.initial_samples, "random candidates setting the start temperature"},
        {"cooling", c.sa.cooling, "geometric cooling factor"},
        {"sigma_angle", c.sa.sigma_angle, "rad, angle proposal width"},
        {"sigma_weight", c.sa.sigma_weight, "relative duration-weight proposal width"},
        {"polish", c.sa.polish, "pattern search around the best point afterwards"},
        {"workers", c.sa.workers, "threads for the depth sweep; overridden by --workers"}}},
      {"sim",
       {{"n_trials", c.sim.n_trials, "Monte-Carlo trials; overridden by --trials"},
        {"dt_sample", c.sim.dt_sample, "s, step of exported path samples"},
        {"workers", c.sim.workers, "threads for the trials; overridden by --workers"}}},
  };
}

class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(label() + ": expected an object");
  }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    out = convert<T>(*it, key);
  }

  void get_vec2(const std::string& key, Vec2& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    out = to_vec2(*it, key);
  }

  const json* child(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown key '" + name(key) + "'");
    }
  }

  std::string name(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  Vec2 to_vec2(const json& v, const std::string& key) const {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      throw ConfigError(name(key) + ": expected [x, y]");
    }
    return {v[0].get<double>(), v[1].get<double>()};
  }

  template <class T>
  T convert(const json& v, const std::string& key) const {
    bool ok;
    if constexpr (std::is_same_v<T, bool>) {
      ok = v.is_boolean();
    } else if constexpr (std::is_integral_v<T>) {
      ok = v.is_number_integer() && (std::is_signed_v<T> || v.is_number_unsigned());
    } else if constexpr (std::is_floating_point_v<T>) {
      ok = v.is_number();
    } else if constexpr (std::is_same_v<T, std::string>) {
      ok = v.is_string();
    } else {
      ok = v.is_array();
    }
    if (ok) {
      try {
        return v.get<T>();
      } catch (const json::exception&) {
      }
    }
    throw ConfigError(name(key) + ": wrong type");
  }

 private:
  std::string label() const { return path_.empty() ? "config" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_obstacles(const json& arr, std::vector<Obstacle>& out) {
  if (!arr.is_array()) throw ConfigError("problem.obstacles: expected a list");
  out.clear();
  for (size_t i = 0; i < arr.size(); ++i) {
    Section s(arr[i], "problem.obstacles[" + std::to_string(i) + "]");
    Obstacle o;
    s.get_vec2("center", o.center);
    s.get("radius", o.radius);
    s.get("k1", o.k1);
    s.get("k2", o.k2);
    s.finish();
    out.push_back(o);
  }
}

RunConfig from_json(const json& root) {
  RunConfig c = default_config();
  Section top(root, "");
  top.get("seed", c.seed);
  top.get("output_dir", c.output_dir);
  top.get("levels", c.levels);
  top.get("domain_radius", c.domain_radius);
  top.get("sweep_lambdas", c.sweep_lambdas);

  if (const json* j = top.child("quadrotor")) {
    Section s(*j, "quadrotor");
    auto& q = c.quadrotor;
    s.get("mass", q.mass);
    s.get("gravity", q.gravity);
    s.get("arm_length", q.arm_length);
    s.get("inertia", q.inertia);
    s.get("yaw_inertia", q.yaw_inertia);
    s.get("rotor_inertia", q.rotor_inertia);
    s.get("thrust_factor", q.thrust_factor);
    s.get("drag_factor", q.drag_factor);
    s.get("az1", q.az1);
    s.get("az2", q.az2);
    s.get("apsi1", q.apsi1);
    s.get("apsi2", q.apsi2);
    s.finish();
  }
  if (const json* j = top.child("channel")) {
    Section s(*j, "channel");
    auto& ch = c.channel;
    s.get("path_loss_exponent", ch.path_loss_exponent);
    s.get("snr_ref_db", ch.snr_ref_db);
    s.get("shadow_var_db", ch.shadow_var_db);
    s.get_vec2("ap_position", ch.ap_position);
    s.get("min_standoff", ch.min_standoff);
    s.finish();
  }
  if (const json* j = top.child("ladder")) {
    Section s(*j, "ladder");
    auto& l = c.ladder;
    s.get("bits_per_symbol", l.bits_per_symbol);
    s.get("target_ber", l.target_ber);
    s.get("symbol_rate", l.symbol_rate);
    s.get("period", l.period);
    s.get("tx_time", l.tx_time);
    s.finish();
  }
  if (const json* j = top.child("problem")) {
    Section s(*j, "problem");
    auto& p = c.problem;
    s.get_vec2("start", p.start);
    s.get_vec2("goal", p.goal);
    s.get("t_f", p.t_f);
    s.get("lambda", p.lambda);
    std::string objective = p.objective == CommObjective::MaxData ? "max_data" : "quota";
    s.get("objective", objective);
    if (objective == "max_data") {
      p.objective = CommObjective::MaxData;
    } else if (objective == "quota") {
      p.objective = CommObjective::Quota;
    } else {
      throw ConfigError("problem.objective: expected 'max_data' or 'quota'");
    }
    s.get("quota_bits", p.quota_bits);
    s.get("eta", p.eta);
    if (const json* o = s.child("obstacles")) read_obstacles(*o, p.obstacles);
    s.finish();
  }
  if (const json* j = top.child("quantizer")) {
    Section s(*j, "quantizer");
    s.get("grid_intervals", c.quantizer.grid_intervals);
    s.get("dp_intervals", c.quantizer.dp_intervals);
    s.get("sa_iterations", c.quantizer.sa_iterations);
    s.get("cooling", c.quantizer.cooling);
    s.finish();
  }
  if (const json* j = top.child("mincontrol")) {
    Section s(*j, "mincontrol");
    s.get("tau_min", c.mincontrol.tau_min);
    s.get("condition_cap", c.mincontrol.condition_cap);
    s.finish();
  }
  if (const json* j = top.child("sa")) {
    Section s(*j, "sa");
    s.get("iterations", c.sa.iterations);
    s.get("initial_samples", c.sa.initial_samples);
    s.get("cooling", c.sa.cooling);
    s.get("sigma_angle", c.sa.sigma_angle);
    s.get("sigma_weight", c.sa.sigma_weight);
    s.get("polish", c.sa.polish);
    s.get("workers", c.sa.workers);
    s.finish();
  }
  if (const json* j = top.child("sim")) {
    Section s(*j, "sim");
    s.get("n_trials", c.sim.n_trials);
    s.get("dt_sample", c.sim.dt_sample);
    s.get("workers", c.sim.workers);
    s.finish();
  }
  top.finish();
  c.apply_seed(c.seed);
  return c;
}

}  // namespace

RateLadder LadderSpec::build() const {
  return RateLadder::qam(bits_per_symbol, target_ber, symbol_rate, period, tx_time);
}

void RunConfig::apply_seed(std::uint64_t master) {
  seed = master;
  quantizer.seed = derive_seed(master, 1);
  sa.seed = derive_seed(master, 2);
  sim.seed = derive_seed(master, 3);
}

double RunConfig::effective_domain_radius() const {
  if (domain_radius > 0.0) return domain_radius;
  return std::max(channel.distance(problem.start), channel.distance(problem.goal));
}

void RunConfig::validate() const {
  auto wrap = [](const char* section, auto&& check) {
    try {
      check();
    } catch (const Error& e) {
      throw ConfigError(std::string(section) + ": " + e.what());
    }
  };
  wrap("quadrotor", [&] { quadrotor.validate(); });
  wrap("channel", [&] { channel.validate(); });
  wrap("ladder", [&] { (void)ladder.build(); });
  wrap("problem", [&] { problem.validate(); });
  wrap("sa", [&] { sa.validate(); });
  wrap("sim", [&] { sim.validate(); });
  if (levels < 2) throw ConfigError("levels: Q must be >= 2");
  if (!(domain_radius >= 0.0) || !(effective_domain_radius() > channel.min_standoff)) {
    throw ConfigError("domain_radius: must exceed the minimum standoff");
  }
  if (!(mincontrol.tau_min > 0.0) || !(mincontrol.condition_cap > 1.0)) {
    throw ConfigError("mincontrol: need tau_min > 0 and condition_cap > 1");
  }
  if (quantizer.grid_intervals < 2 || quantizer.dp_intervals < levels ||
      quantizer.sa_iterations < 0 || !(quantizer.cooling > 0.0 && quantizer.cooling <= 1.0)) {
    throw ConfigError("quantizer: invalid grid or annealing settings");
  }
}

RunConfig default_config() {
  RunConfig c;
  c.problem.start = Vec2(75.0, 0.0);
  const double a = 5.0 * std::numbers::pi / 9.0;
  c.problem.goal = 80.0 * Vec2(std::cos(a), std::sin(a));
  c.problem.t_f = 100.0;
  c.problem.lambda = 1.0;
  c.apply_seed(c.seed);
  return c;
}

RunConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c = from_json(root);
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string dump_config(const RunConfig& cfg) {
  json root = json::object();
  for (const auto& g : describe(cfg)) {
    json& target = g.name.empty() ? root : root[g.name];
    if (!g.name.empty()) target = json::object();
    for (const auto& f : g.fields) target[f.key] = f.value;
  }
  return root.dump(2) + "\n";
}

std::string config_template() {
  // Each top-level entry is rendered separately and joined with commas.
  std::vector<std::string> entries;
  auto render = [](const Field& f, const std::string& indent) {
    return indent + "// " + f.comment + "\n" + indent + json(f.key).dump() + ": " +
           f.value.dump();
  };
  for (const auto& g : describe(default_config())) {
    if (g.name.empty()) {
      for (const auto& f : g.fields) entries.push_back(render(f, "  "));
      continue;
    }
    std::string block = "  " + json(g.name).dump() + ": {\n";
    for (size_t i = 0; i < g.fields.size(); ++i) {
      block += render(g.fields[i], "    ");
      block += i + 1 < g.fields.size() ? ",\n" : "\n";
    }
    entries.push_back(block + "  }");
  }
  std::string out =
      "// commtraj run configuration. Every key is optional; the values shown\n"
      "// are the defaults. Unknown keys are rejected.\n{\n";
  for (size_t i = 0; i < entries.size(); ++i) {
    out += entries[i];
    out += i + 1 < entries.size() ? ",\n" : "\n";
  }
  return out + "}\n";
}

}  // namespace commtraj
