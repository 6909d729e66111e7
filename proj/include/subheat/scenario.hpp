#pragma once

#include "subheat/errors.hpp"
#include "subheat/space.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace subheat {

struct SpaceSpec
{
  SpaceKind kind = SpaceKind::circle;
  int resolution = 256;
  BoundaryMode boundary = BoundaryMode::reflecting;
  int refine = 0;  ///< second level for stability checks, 0 = none

  bool operator==(const SpaceSpec&) const = default;
};

/// Log-spaced times over a window scaled by the two multipliers.
struct GridSpec
{
  double t_min_multiplier = 1.0;
  double t_max_multiplier = 1.0;
  std::size_t count = 24;

  bool operator==(const GridSpec&) const = default;
};

/// Explicit member defined on the space coordinate s: "cosine" cos(2 pi k s),
/// "indicator" 1{lo <= s < hi}, "tent" max(0, 1 - |s - centre| / width).
struct FunctionSpec
{
  std::string id;
  std::string shape;
  double frequency = 1.0;
  double lo = 0.0;
  double hi = 0.5;
  double centre = 0.5;
  double width = 0.25;

  bool operator==(const FunctionSpec&) const = default;
};

struct FamilySpec
{
  std::string kind = "canonical";     ///< canonical | explicit
  std::vector<std::string> members;   ///< canonical subset, empty = all six
  std::vector<FunctionSpec> functions;

  bool operator==(const FamilySpec&) const = default;
};

struct SuiteSpec
{
  std::string name;
  std::vector<double> deltas;        ///< empty: the scenario list
  std::vector<double> ps;            ///< empty: the scenario list
  std::vector<int> resolutions;      ///< empty: space resolution and refine
  std::vector<std::string> members;  ///< restrict the family
  std::string function;              ///< single-function suites
  std::string expect = "pass";       ///< pass | wrong_regime
  std::optional<double> tolerance;
  std::map<std::string, double> params;

  bool operator==(const SuiteSpec&) const = default;
};

struct ScenarioConfig
{
  std::string name = "scenario";
  SpaceSpec space;
  std::vector<double> deltas;
  std::vector<double> ps{1.0};
  GridSpec t_grid;
  FamilySpec family;
  std::vector<SuiteSpec> suites;
  std::string output = "subheat_out";
  std::uint64_t seed = 11;

  bool operator==(const ScenarioConfig&) const = default;
};

/// Invalid configuration; `field()` is the dotted path of the offending entry.
class ConfigInvalid : public ConfigurationError
{
public:
  ConfigInvalid(const std::string& field, const std::string& message)
    : ConfigurationError(field + ": " + message)
    , field_(field)
  {
  }
  const std::string& field() const noexcept { return field_; }

private:
  std::string field_;
};

/// Names accepted in `suites[].name`.
const std::vector<std::string>& suite_names();

/// Parse and validate. Unknown keys are errors.
ScenarioConfig parse_config(const std::string& json_text);
ScenarioConfig load_config(const std::filesystem::path& path);

/// Canonical JSON (sorted keys, shortest round-trip doubles).
std::string serialize_config(const ScenarioConfig& config);

void validate(const ScenarioConfig& config);

/// Hex FNV-1a of the canonical serialization.
std::string config_hash(const ScenarioConfig& config);

struct RunResult
{
  int exit_code = 0;  ///< 0 all pass, 2 any fail, 3 any inconclusive
  std::size_t records = 0;
  std::size_t failed = 0;
  std::size_t inconclusive = 0;
  std::string report;  ///< report.json contents
  std::vector<std::string> files;
};

/// Execute every suite cell in config order and write report.json,
/// summary.csv, curve CSVs and manifest.json into `out_dir` (the config's
/// output directory when empty). Only the manifest carries a timestamp.
RunResult run_scenario(const ScenarioConfig& config, const std::filesystem::path& out_dir = {});

/// Same, without touching the filesystem.
RunResult evaluate_scenario(const ScenarioConfig& config);

/// Library and dependency versions recorded in the manifest.
std::map<std::string, std::string> version_info();

} // namespace subheat
