#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "commtraj/errors.hpp"
#include "support.hpp"

using namespace commtraj;
namespace fs = std::filesystem;

namespace {

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "commtraj");
  args.push_back("--quiet");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

// Fresh scratch directory per test case.
struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name) {
    dir = fs::temp_directory_path() / ("commtraj_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  std::string operator/(const std::string& f) const { return (dir / f).string(); }
};

// Small annealing and sampling budgets keep these runs quick.
const char* kQuick = R"({"sa": {"iterations": 200, "polish": false}, "sim": {"n_trials": 50}})";

}  // namespace

TEST_CASE("configuration files") {
  SUBCASE("template parses to the defaults") {
    const RunConfig cfg = parse_config(config_template());
    CHECK(dump_config(cfg) == dump_config(default_config()));
  }

  SUBCASE("dump round-trips") {
    RunConfig cfg = default_config();
    cfg.problem.lambda = 0.37;
    cfg.problem.obstacles.push_back({Vec2(60, 0), 5.0});
    cfg.sweep_lambdas = {0.1, 0.9};
    const RunConfig back = parse_config(dump_config(cfg));
    CHECK(dump_config(back) == dump_config(cfg));
    CHECK(back.problem.obstacles.size() == 1);
  }

  SUBCASE("errors name the key") {
    try {
      parse_config(R"({"problem": {"lamda": 0.5}})");
      FAIL("unknown key accepted");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("lamda") != std::string::npos);
    }
    try {
      parse_config(R"({"levels": "six"})");
      FAIL("wrong type accepted");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("levels") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config(R"({"problem": {"lambda": 2}})"), ConfigError);
    CHECK_THROWS_AS(parse_config("{"), ConfigError);
  }

  SUBCASE("auto domain radius") {
    RunConfig cfg = default_config();
    CHECK(cfg.effective_domain_radius() == doctest::Approx(80.0));
    cfg.domain_radius = 120.0;
    CHECK(cfg.effective_domain_radius() == 120.0);
  }
}

TEST_CASE("cli exit codes") {
  Scratch s("codes");
  CHECK(run({"plan", "--config", s / "missing.json"}) == kExitConfig);
  CHECK(run({"quantize", "-Q", "1", "--out", s.dir.string()}) == kExitConfig);
  CHECK(run({"bogus"}) == kExitConfig);
  CHECK(run({"plan", "--lambda", "1.5", "--out", s.dir.string()}) == kExitConfig);
  CHECK(run({"validate", "--out", s.dir.string()}) == kExitConfig);

  spit(s / "cfg.json", kQuick);
  CHECK(run({"sweep", "--config", s / "cfg.json", "--lambdas", "", "--out", s.dir.string()}) ==
        kExitConfig);
  CHECK(run({"sweep", "--config", s / "cfg.json", "--lambdas", "0.5,x", "--out", s.dir.string()}) ==
        kExitConfig);
}

TEST_CASE("init writes a usable template") {
  Scratch s("init");
  REQUIRE(run({"init", "--out", s.dir.string()}) == kExitOk);
  CHECK_NOTHROW(load_config(s / "config.json"));
}

TEST_CASE("quantize command") {
  Scratch s("quantize");
  REQUIRE(run({"quantize", "-Q", "3", "--out", (s.dir / "q3").string()}) == kExitOk);
  REQUIRE(run({"quantize", "-Q", "6", "--out", (s.dir / "q6").string()}) == kExitOk);
  const auto q3 = nlohmann::json::parse(slurp(s.dir / "q3" / "ratemap.json"));
  const auto q6 = nlohmann::json::parse(slurp(s.dir / "q6" / "ratemap.json"));
  CHECK(q3["levels"].size() == 3);
  CHECK(q6["radii"].size() == 5);
  CHECK(q6["error"].get<double>() < q3["error"].get<double>());
  const std::string curve = slurp(s.dir / "q6" / "ratecurve.csv");
  CHECK(curve.rfind("radius,expected_rate,quantized_rate\r\n", 0) == 0);
}

TEST_CASE("plan and validate commands") {
  Scratch s("plan");
  spit(s / "cfg.json", kQuick);

  SUBCASE("lambda = 1 follows the straight line") {
    REQUIRE(run({"plan", "--config", s / "cfg.json", "--lambda", "1", "--out", s.dir.string()}) ==
            kExitOk);
    const auto j = nlohmann::json::parse(slurp(s.dir / "plan.json"));
    CHECK(j["depth"] == 0);
    CHECK(j["energy_ratio"].get<double>() == doctest::Approx(1.0));

    const RunConfig cfg = default_config();
    const Vec2 a = cfg.problem.start, b = cfg.problem.goal;
    const Vec2 dir = (b - a).normalized();
    std::istringstream rows(slurp(s.dir / "path.csv"));
    std::string line;
    std::getline(rows, line);
    CHECK(line == "t,x,y,speed\r");
    int n = 0;
    while (std::getline(rows, line)) {
      double t, x, y, v;
      char c;
      std::istringstream is(line);
      is >> t >> c >> x >> c >> y >> c >> v;
      const Vec2 p = Vec2(x, y) - a;
      CHECK(std::abs(p.x() * dir.y() - p.y() * dir.x()) < 1e-6);
      ++n;
    }
    CHECK(n == 101);

    CHECK(run({"validate", "--config", s / "cfg.json", "--out", s.dir.string()}) == kExitOk);
    const auto v = nlohmann::json::parse(slurp(s.dir / "validation.json"));
    CHECK(v["ok"] == true);
    CHECK(v["relative_deviation"].get<double>() < 0.01);
  }

  SUBCASE("serialized plans reproduce their bit estimate") {
    REQUIRE(run({"plan", "--config", s / "cfg.json", "--lambda", "0.5", "--out", s.dir.string()}) ==
            kExitOk);
    const std::string text = slurp(s.dir / "plan.json");
    const auto j = nlohmann::json::parse(text);
    const WaypointPlan w = plan_from_json(text);
    const RunConfig cfg = default_config();
    const QuantizedRateMap& map = testutil::reference().map;
    CHECK(approx_bits(w.durations, w.leg_levels, map, cfg.ladder.build()) ==
          j["bits_approx"].get<double>());
    CHECK(w.depth == j["depth"].get<int>());
    CHECK(j["depths"].size() == 6);
    CHECK(j["diagnostics"]["iterations"].get<int>() == 200);
    CHECK_THROWS_AS(plan_from_json(R"({"depth": 0})"), ConfigError);
  }

  SUBCASE("an aggressive plan fails validation") {
    spit(s / "fast.json",
         R"({"sa": {"iterations": 100, "polish": false}, "problem": {"t_f": 4.0, "lambda": 1.0}})");
    REQUIRE(run({"plan", "--config", s / "fast.json", "--out", s.dir.string()}) == kExitOk);
    CHECK(run({"validate", "--config", s / "fast.json", "--out", s.dir.string()}) ==
          kExitValidation);
    const auto v = nlohmann::json::parse(slurp(s.dir / "validation.json"));
    CHECK(v["ok"] == false);
    CHECK(v["violation_time"].get<double>() > 0.0);
  }
}

TEST_CASE("seeds and determinism") {
  Scratch s("seed");
  spit(s / "cfg.json", kQuick);
  const std::string cfg = s / "cfg.json";

  REQUIRE(run({"plan", "--config", cfg, "--lambda", "0.8", "--seed", "3", "--out", s / "a"}) == kExitOk);
  REQUIRE(run({"plan", "--config", cfg, "--lambda", "0.8", "--seed", "3", "--out", s / "b",
               "--workers", "3"}) == kExitOk);
  CHECK(slurp(s.dir / "a" / "plan.json") == slurp(s.dir / "b" / "plan.json"));

  // The environment wins over --seed.
  ::setenv("COMMTRAJ_SEED", "3", 1);
  REQUIRE(run({"plan", "--config", cfg, "--lambda", "0.8", "--seed", "99", "--out", s / "c"}) == kExitOk);
  ::setenv("COMMTRAJ_SEED", "three", 1);
  CHECK(run({"plan", "--config", cfg, "--out", s / "d"}) == kExitConfig);
  ::unsetenv("COMMTRAJ_SEED");
  CHECK(slurp(s.dir / "a" / "plan.json") == slurp(s.dir / "c" / "plan.json"));

  REQUIRE(run({"sweep", "--config", cfg, "--lambdas", "1,0.9", "--out", s / "e"}) == kExitOk);
  REQUIRE(run({"sweep", "--config", cfg, "--lambdas", "1,0.9", "--out", s / "f", "--workers", "2"}) ==
          kExitOk);
  const std::string table = slurp(s.dir / "e" / "table1.csv");
  CHECK(table == slurp(s.dir / "f" / "table1.csv"));
  CHECK(std::count(table.begin(), table.end(), '\n') == 3);
}
