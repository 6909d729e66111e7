#include "subheat/scenario.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace subheat;

namespace {

const char* small_config = R"({
  "name": "small",
  "space": {"kind": "circle", "resolution": 128, "refine": 256},
  "deltas": [0.8],
  "ps": [1],
  "t_grid": {"count": 12},
  "suites": [
    {"name": "critical_exponent", "resolutions": [256]},
    {"name": "bv_characterization"},
    {"name": "bv_characterization", "deltas": [0.3], "expect": "wrong_regime"}
  ]
})";

std::string field_of(const std::string& text)
{
  try {
    parse_config(text);
  } catch (const ConfigInvalid& e) {
    return e.field();
  }
  return "";
}

std::string slurp(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

} // namespace

TEST_CASE("config round trip")
{
  const auto config = parse_config(small_config);
  CHECK(config.name == "small");
  CHECK(config.space.refine == 256);
  CHECK(config.t_grid.count == 12);
  CHECK(config.suites.size() == 3);
  CHECK(config.suites[2].expect == "wrong_regime");

  const auto text = serialize_config(config);
  const auto back = parse_config(text);
  CHECK(back == config);
  CHECK(serialize_config(back) == text);
  CHECK(config_hash(back) == config_hash(config));

  auto other = config;
  other.seed = 12;
  CHECK(config_hash(other) != config_hash(config));
}

TEST_CASE("config round trip keeps doubles exact")
{
  auto config = parse_config(small_config);
  config.deltas = {0.1 + 0.2, 1.0 / 3.0};
  config.t_grid.t_min_multiplier = 2.0 / 7.0;
  const auto back = parse_config(serialize_config(config));
  CHECK(back.deltas == config.deltas);
  CHECK(back.t_grid.t_min_multiplier == config.t_grid.t_min_multiplier);
}

TEST_CASE("diagnostics name the offending field")
{
  CHECK(field_of(R"({"space": {"kind": "circle", "resolution": 64}, "deltas": [0.5], "suites": []})") == "suites");
  try {
    parse_config(R"({"space": {"kind": "circle", "resolution": 64}, "deltas": [0.5], "suites": []})");
  } catch (const ConfigInvalid& e) {
    CHECK(std::string(e.what()) == "suites: empty");
  }
  CHECK(field_of(R"({"deltas": [0.5], "suites": [{"name": "sobolev"}]})") == "space");
  CHECK(field_of(R"({"space": {"kind": "circle", "resolution": 64}, "deltas": [0.5, 1.5], "suites": [{"name": "sobolev"}]})") ==
        "deltas[1]");
  CHECK(field_of(R"({"space": {"kind": "torus", "resolution": 64}, "deltas": [0.5], "suites": [{"name": "sobolev"}]})") ==
        "space.kind");
  CHECK(field_of(R"({"space": {"kind": "circle", "resolution": 64}, "deltas": [0.5], "suites": [{"name": "nope"}]})") ==
        "suites[0].name");
  CHECK(field_of(R"({"space": {"kind": "circle", "resolution": 64}, "deltas": [0.5], "bogus": 1, "suites": [{"name": "sobolev"}]})") ==
        "bogus");
  CHECK(field_of(R"({"space": {"kind": "circle", "resolution": 64}, "deltas": [0.5], "t_grid": {"count": 4},
                    "suites": [{"name": "sobolev"}]})") == "t_grid.count");
  CHECK(field_of(R"({"space": {"kind": "circle", "resolution": 64}, "deltas": [0.5],
                    "suites": [{"name": "sobolev", "params": {"foo": 1}}]})") == "suites[0].params.foo");
  CHECK(field_of("{not json") != "");
}

TEST_CASE("evaluation is deterministic")
{
  const auto config = parse_config(small_config);
  const auto a = evaluate_scenario(config);
  const auto b = evaluate_scenario(config);
  CHECK(a.report == b.report);
  CHECK(a.exit_code == 0);
  CHECK(a.failed == 0);
  CHECK(a.records >= 3);

  const char* saved = std::getenv("SUBHEAT_THREADS");
  const std::string keep = saved ? saved : "";
  setenv("SUBHEAT_THREADS", "1", 1);
  const auto serial = evaluate_scenario(config);
  if (saved)
    setenv("SUBHEAT_THREADS", keep.c_str(), 1);
  else
    unsetenv("SUBHEAT_THREADS");
  CHECK(serial.report == a.report);
}

TEST_CASE("run writes reports")
{
  const auto config = parse_config(small_config);
  const auto dir = std::filesystem::temp_directory_path() / "subheat_scenario_test";
  std::filesystem::remove_all(dir);
  const auto r = run_scenario(config, dir);
  CHECK(r.exit_code == 0);
  CHECK(std::filesystem::exists(dir / "report.json"));
  CHECK(std::filesystem::exists(dir / "manifest.json"));
  CHECK(std::filesystem::exists(dir / "summary.csv"));
  CHECK(slurp(dir / "report.json") == r.report);
  const auto summary = slurp(dir / "summary.csv");
  CHECK(summary.rfind("suite,space,delta,p,lhs,rhs,constant,pass\n", 0) == 0);
  CHECK(slurp(dir / "manifest.json").find(config_hash(config)) != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("failing and wrong-regime exit codes")
{
  auto config = parse_config(small_config);
  config.suites = {config.suites[1]};
  config.suites[0].expect = "wrong_regime";
  CHECK(evaluate_scenario(config).exit_code == 2);

  config.suites[0].expect = "pass";
  config.suites[0].deltas = {0.3};
  CHECK_THROWS_AS(evaluate_scenario(config), ConfigInvalid);
}
