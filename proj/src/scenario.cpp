#include "subheat/scenario.hpp"

#include "subheat/analysis.hpp"
#include "subheat/numeric.hpp"
#include "subheat/parallel.hpp"
#include "subheat/seminorms.hpp"
#include "subheat/spectral.hpp"

#include <Eigen/Core>
#include <boost/version.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <limits>
#include <memory>
#include <set>
#include <sstream>

#ifndef SUBHEAT_VERSION
#define SUBHEAT_VERSION "0.0.0"
#endif

namespace subheat {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

// ---------------------------------------------------------------- suites

enum class Levels { single, compared, series };

struct SuiteInfo
{
  const char* name;
  bool uses_p;
  Levels levels;
  std::vector<std::string> params;
};

const std::vector<SuiteInfo>& suite_table()
{
  static const std::vector<SuiteInfo> table{
    {"critical_exponent", true, Levels::single, {"kappa", "decades"}},
    {"weak_be", false, Levels::single, {"decades", "sampled_pairs"}},
    {"kernel_bounds", false, Levels::single, {}},
    {"coarea", false, Levels::compared, {"alpha", "kappa", "levels", "level_tolerance"}},
    {"pseudo_poincare", false, Levels::compared, {"kappa", "decades", "level_tolerance"}},
    {"sobolev", true, Levels::compared, {"level_tolerance"}},
    {"isoperimetric", false, Levels::compared, {"level_tolerance"}},
    {"linfty", false, Levels::compared, {"level_tolerance"}},
    {"lp_smoothing", true, Levels::compared, {"level_tolerance"}},
    {"capacity_sobolev", false, Levels::compared, {"kappa_cap", "depth", "level_tolerance"}},
    {"capacity_structure", false, Levels::single, {"depth"}},
    {"bv_characterization", false, Levels::compared, {"kappa", "level_tolerance"}},
    {"equivalence", true, Levels::compared, {"alpha", "level_tolerance"}},
    {"triviality", true, Levels::series, {"offset"}},
    {"brezis", true, Levels::series, {"frequency", "min_growth"}},
  };
  return table;
}

const SuiteInfo* find_suite(const std::string& name)
{
  for (const auto& s : suite_table())
    if (name == s.name)
      return &s;
  return nullptr;
}

const std::vector<std::string> canonical_ids{"smoothed_indicator", "sharp_indicator", "low_mode",
                                             "holder_rough",       "tent",            "phi_1"};

std::string at(const std::string& path, const std::string& key)
{
  return path.empty() ? key : path + "." + key;
}

std::string at(const std::string& path, std::size_t index)
{
  return path + "[" + std::to_string(index) + "]";
}

// ---------------------------------------------------------------- parsing

void reject_unknown(const json& obj, const std::string& path, std::initializer_list<const char*> allowed)
{
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return it.key() == a; }))
      throw ConfigInvalid(at(path, it.key()), "unknown field");
  }
}

const json& object_at(const json& obj, const std::string& key, const std::string& path)
{
  const auto it = obj.find(key);
  if (it == obj.end())
    throw ConfigInvalid(at(path, key), "missing");
  if (!it->is_object())
    throw ConfigInvalid(at(path, key), "expected an object");
  return *it;
}

double as_double(const json& v, const std::string& path)
{
  if (!v.is_number())
    throw ConfigInvalid(path, "expected a number");
  return v.get<double>();
}

long long as_int(const json& v, const std::string& path)
{
  if (!v.is_number_integer())
    throw ConfigInvalid(path, "expected an integer");
  return v.get<long long>();
}

std::string as_string(const json& v, const std::string& path)
{
  if (!v.is_string())
    throw ConfigInvalid(path, "expected a string");
  return v.get<std::string>();
}

template <class F>
auto read_list(const json& obj, const std::string& key, const std::string& path, F element)
{
  using T = decltype(element(json{}, std::string{}));
  std::vector<T> out;
  const auto it = obj.find(key);
  if (it == obj.end())
    return out;
  const std::string p = at(path, key);
  if (!it->is_array())
    throw ConfigInvalid(p, "expected a list");
  for (std::size_t i = 0; i < it->size(); ++i)
    out.push_back(element((*it)[i], at(p, i)));
  return out;
}

std::vector<double> double_list(const json& obj, const std::string& key, const std::string& path)
{
  return read_list(obj, key, path, [](const json& v, const std::string& p) { return as_double(v, p); });
}

std::vector<std::string> string_list(const json& obj, const std::string& key, const std::string& path)
{
  return read_list(obj, key, path, [](const json& v, const std::string& p) { return as_string(v, p); });
}

int checked_int(const json& v, const std::string& path)
{
  const long long x = as_int(v, path);
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
    throw ConfigInvalid(path, "out of range");
  return static_cast<int>(x);
}

SpaceSpec parse_space(const json& j, const std::string& path)
{
  reject_unknown(j, path, {"kind", "resolution", "boundary", "refine"});
  SpaceSpec s;
  if (!j.contains("kind"))
    throw ConfigInvalid(at(path, "kind"), "missing");
  try {
    s.kind = parse_space_kind(as_string(j["kind"], at(path, "kind")));
  } catch (const ConfigInvalid&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigInvalid(at(path, "kind"), "expected circle, interval, gasket or vicsek");
  }
  if (!j.contains("resolution"))
    throw ConfigInvalid(at(path, "resolution"), "missing");
  s.resolution = checked_int(j["resolution"], at(path, "resolution"));
  if (j.contains("boundary")) {
    try {
      s.boundary = parse_boundary_mode(as_string(j["boundary"], at(path, "boundary")));
    } catch (const ConfigInvalid&) {
      throw;
    } catch (const std::exception&) {
      throw ConfigInvalid(at(path, "boundary"), "expected reflecting or absorbing");
    }
  }
  if (j.contains("refine"))
    s.refine = checked_int(j["refine"], at(path, "refine"));
  return s;
}

GridSpec parse_grid(const json& j, const std::string& path)
{
  reject_unknown(j, path, {"t_min_multiplier", "t_max_multiplier", "count"});
  GridSpec g;
  if (j.contains("t_min_multiplier"))
    g.t_min_multiplier = as_double(j["t_min_multiplier"], at(path, "t_min_multiplier"));
  if (j.contains("t_max_multiplier"))
    g.t_max_multiplier = as_double(j["t_max_multiplier"], at(path, "t_max_multiplier"));
  if (j.contains("count")) {
    const long long n = as_int(j["count"], at(path, "count"));
    if (n < 0)
      throw ConfigInvalid(at(path, "count"), "must be at least 8");
    g.count = static_cast<std::size_t>(n);
  }
  return g;
}

FunctionSpec parse_function(const json& j, const std::string& path)
{
  if (!j.is_object())
    throw ConfigInvalid(path, "expected an object");
  reject_unknown(j, path, {"id", "shape", "frequency", "lo", "hi", "centre", "width"});
  FunctionSpec f;
  if (j.contains("id"))
    f.id = as_string(j["id"], at(path, "id"));
  if (j.contains("shape"))
    f.shape = as_string(j["shape"], at(path, "shape"));
  if (j.contains("frequency"))
    f.frequency = as_double(j["frequency"], at(path, "frequency"));
  if (j.contains("lo"))
    f.lo = as_double(j["lo"], at(path, "lo"));
  if (j.contains("hi"))
    f.hi = as_double(j["hi"], at(path, "hi"));
  if (j.contains("centre"))
    f.centre = as_double(j["centre"], at(path, "centre"));
  if (j.contains("width"))
    f.width = as_double(j["width"], at(path, "width"));
  return f;
}

FamilySpec parse_family(const json& j, const std::string& path)
{
  reject_unknown(j, path, {"kind", "members", "functions"});
  FamilySpec f;
  if (j.contains("kind"))
    f.kind = as_string(j["kind"], at(path, "kind"));
  f.members = string_list(j, "members", path);
  f.functions = read_list(j, "functions", path, parse_function);
  return f;
}

SuiteSpec parse_suite(const json& j, const std::string& path)
{
  if (!j.is_object())
    throw ConfigInvalid(path, "expected an object");
  reject_unknown(j, path,
                 {"name", "deltas", "ps", "resolutions", "members", "function", "expect", "tolerance", "params"});
  SuiteSpec s;
  if (!j.contains("name"))
    throw ConfigInvalid(at(path, "name"), "missing");
  s.name = as_string(j["name"], at(path, "name"));
  s.deltas = double_list(j, "deltas", path);
  s.ps = double_list(j, "ps", path);
  s.resolutions = read_list(j, "resolutions", path, checked_int);
  s.members = string_list(j, "members", path);
  if (j.contains("function"))
    s.function = as_string(j["function"], at(path, "function"));
  if (j.contains("expect"))
    s.expect = as_string(j["expect"], at(path, "expect"));
  if (j.contains("tolerance"))
    s.tolerance = as_double(j["tolerance"], at(path, "tolerance"));
  if (j.contains("params")) {
    const json& p = j["params"];
    if (!p.is_object())
      throw ConfigInvalid(at(path, "params"), "expected an object");
    for (auto it = p.begin(); it != p.end(); ++it)
      s.params[it.key()] = as_double(it.value(), at(at(path, "params"), it.key()));
  }
  return s;
}

json to_json(const ScenarioConfig& c)
{
  json j;
  j["name"] = c.name;
  j["space"] = {{"kind", to_string(c.space.kind)},
                {"resolution", c.space.resolution},
                {"boundary", to_string(c.space.boundary)},
                {"refine", c.space.refine}};
  j["deltas"] = c.deltas;
  j["ps"] = c.ps;
  j["t_grid"] = {{"t_min_multiplier", c.t_grid.t_min_multiplier},
                 {"t_max_multiplier", c.t_grid.t_max_multiplier},
                 {"count", c.t_grid.count}};
  json family{{"kind", c.family.kind}, {"members", c.family.members}, {"functions", json::array()}};
  for (const auto& f : c.family.functions)
    family["functions"].push_back({{"id", f.id},
                                   {"shape", f.shape},
                                   {"frequency", f.frequency},
                                   {"lo", f.lo},
                                   {"hi", f.hi},
                                   {"centre", f.centre},
                                   {"width", f.width}});
  j["family"] = family;
  j["suites"] = json::array();
  for (const auto& s : c.suites) {
    json e{{"name", s.name},           {"deltas", s.deltas},     {"ps", s.ps},
           {"resolutions", s.resolutions}, {"members", s.members}, {"function", s.function},
           {"expect", s.expect},       {"params", json::object()}};
    if (s.tolerance)
      e["tolerance"] = *s.tolerance;
    for (const auto& [k, v] : s.params)
      e["params"][k] = v;
    j["suites"].push_back(e);
  }
  j["output"] = c.output;
  j["seed"] = c.seed;
  return j;
}

// ---------------------------------------------------------------- validation

bool resolution_ok(SpaceKind kind, int r)
{
  switch (kind) {
  case SpaceKind::circle:
  case SpaceKind::interval: return r >= 8 && r <= static_cast<int>(dense_node_budget);
  case SpaceKind::gasket: return r >= 1 && r <= 8;
  case SpaceKind::vicsek: return r >= 1 && r <= 6;
  }
  return false;
}

void check_resolution(SpaceKind kind, int r, const std::string& path)
{
  if (!resolution_ok(kind, r))
    throw ConfigInvalid(path, std::to_string(r) + " is outside the range for " + to_string(kind));
}

void check_deltas(const std::vector<double>& deltas, const std::string& path)
{
  for (std::size_t i = 0; i < deltas.size(); ++i)
    if (!(deltas[i] > 0.0 && deltas[i] < 1.0))
      throw ConfigInvalid(at(path, i), "must lie in (0, 1)");
}

void check_ps(const std::vector<double>& ps, const std::string& path, double minimum)
{
  for (std::size_t i = 0; i < ps.size(); ++i)
    if (!(ps[i] >= minimum) || !std::isfinite(ps[i]))
      throw ConfigInvalid(at(path, i), minimum == 1.0 ? "must be at least 1" : "must be at least 2");
}

std::vector<std::string> family_ids(const ScenarioConfig& c)
{
  if (c.family.kind == "canonical")
    return c.family.members.empty() ? canonical_ids : c.family.members;
  std::vector<std::string> ids;
  for (const auto& f : c.family.functions)
    ids.push_back(f.id);
  return ids;
}

std::string default_function(const ScenarioConfig& c, const SuiteSpec& s)
{
  if (!s.function.empty())
    return s.function;
  if (c.family.kind != "canonical")
    return c.family.functions.empty() ? std::string{} : c.family.functions.front().id;
  return s.name == "coarea" ? "tent" : "sharp_indicator";
}

std::vector<int> suite_levels(const ScenarioConfig& c, const SuiteSpec& s)
{
  if (!s.resolutions.empty())
    return s.resolutions;
  std::vector<int> out{c.space.resolution};
  if (c.space.refine > 0)
    out.push_back(c.space.refine);
  return out;
}

// ---------------------------------------------------------------- reports

ojson number(double x)
{
  if (std::isfinite(x))
    return x;
  if (std::isnan(x))
    return "nan";
  return x > 0 ? "inf" : "-inf";
}

std::string fmt17(double x)
{
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string short_number(double x)
{
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

std::string status_of(bool pass, bool inconclusive)
{
  return inconclusive ? "inconclusive" : (pass ? "pass" : "fail");
}

struct Record
{
  ojson body;
  std::string suite;
  std::string space;
  double delta = 0.0;
  double p = 1.0;
  double lhs = 0.0;
  double rhs = 0.0;
  double constant = 0.0;
  std::string status;
};

struct CsvFile
{
  std::string path;
  std::string contents;
};

Record make_record(const InequalityReport& r, const ojson& extra_params)
{
  Record rec;
  rec.suite = r.name;
  rec.space = r.space;
  rec.delta = r.delta;
  rec.p = r.p;
  rec.lhs = r.lhs;
  rec.rhs = r.rhs;
  rec.constant = r.constant;
  rec.status = status_of(r.pass, r.inconclusive);
  ojson params{{"delta", number(r.delta)}, {"p", number(r.p)}, {"resolution", r.resolution}};
  for (auto it = extra_params.begin(); it != extra_params.end(); ++it)
    params[it.key()] = it.value();
  ojson values = ojson::object();
  for (const auto& [k, v] : r.values)
    values[k] = number(v);
  rec.body = ojson{{"suite", r.name},
                   {"space", r.space},
                   {"params", params},
                   {"values", values},
                   {"lhs", number(r.lhs)},
                   {"rhs", number(r.rhs)},
                   {"constant", number(r.constant)},
                   {"status", rec.status},
                   {"pass", r.pass},
                   {"inconclusive", r.inconclusive},
                   {"window", {{"lo", number(r.window_lo)}, {"hi", number(r.window_hi)}}},
                   {"tolerance", number(r.tolerance)},
                   {"note", r.note}};
  return rec;
}

std::string file_label(const std::string& space)
{
  std::string out;
  for (char ch : space) {
    if (ch == ' ')
      out += '_';
    else if (ch != '=')
      out += ch;
  }
  return out;
}

// ---------------------------------------------------------------- workspace

struct LevelData
{
  MetricMeasureGraph graph;
  SpectralDecomposition spec;
};

class Workspace
{
public:
  explicit Workspace(const ScenarioConfig& config) : config_(config) {}

  LevelData& level(int resolution)
  {
    auto& slot = levels_[resolution];
    if (!slot) {
      SpaceDescriptor d;
      d.kind = config_.space.kind;
      d.resolution = resolution;
      d.boundary = config_.space.boundary;
      MetricMeasureGraph g = config_.space.kind == SpaceKind::interval
                                 ? build_interval(resolution, config_.space.boundary)
                                 : build_space(d);
      SpectralDecomposition s = eigendecompose(g);
      slot = std::make_unique<LevelData>(LevelData{std::move(g), std::move(s)});
    }
    return *slot;
  }

  std::vector<TestFunction> family(const LevelData& L, const std::vector<std::string>& restrict_to) const
  {
    std::vector<TestFunction> all;
    if (config_.family.kind == "canonical") {
      all = canonical_family(L.graph, L.spec, config_.seed);
      if (!config_.family.members.empty())
        all = select(all, config_.family.members);
    } else {
      const Eigen::VectorXd s = coordinate(L.graph);
      for (const auto& f : config_.family.functions) {
        Eigen::VectorXd v(s.size());
        for (Eigen::Index i = 0; i < s.size(); ++i) {
          const double x = s(i);
          if (f.shape == "cosine")
            v(i) = std::cos(2.0 * M_PI * f.frequency * x);
          else if (f.shape == "indicator")
            v(i) = (x >= f.lo && x < f.hi) ? 1.0 : 0.0;
          else
            v(i) = std::max(0.0, 1.0 - std::abs(x - f.centre) / f.width);
        }
        for (int b : L.graph.boundary())
          v(b) = 0.0;
        all.push_back({f.id, std::move(v)});
      }
    }
    return restrict_to.empty() ? all : select(all, restrict_to);
  }

  std::vector<double> grid(const LevelData& L, double delta, bool exponent, double decades) const
  {
    const TimeWindow w =
        exponent ? exponent_window(L.graph, L.spec, delta, decades) : resolved_time_window(L.graph, L.spec, delta);
    const double lo = w.lo * config_.t_grid.t_min_multiplier;
    const double hi = w.hi * config_.t_grid.t_max_multiplier;
    if (!(lo < hi))
      throw ConfigInvalid("t_grid", "multipliers leave an empty time window");
    return log_space(lo, hi, config_.t_grid.count);
  }

  /// kappa from the suite parameter, the geometry, or a cached weak BE estimate.
  /// Returns the graph to use and whether kappa was estimated.
  std::pair<MetricMeasureGraph, std::optional<WeakBeReport>> with_kappa(LevelData& L, double delta,
                                                                        const SuiteSpec& suite)
  {
    if (const auto it = suite.params.find("kappa"); it != suite.params.end())
      return {L.graph.with_kappa(it->second, Provenance::estimated), std::nullopt};
    if (L.graph.geometry().kappa)
      return {L.graph, std::nullopt};
    const auto key = std::make_pair(L.graph.descriptor().resolution, delta);
    auto it = kappa_cache_.find(key);
    if (it == kappa_cache_.end()) {
      const auto fam = family(L, {});
      const auto t = grid(L, delta, true, 0.5);
      it = kappa_cache_.emplace(key, weak_be_fit(L.spec, L.graph, delta, fam, t, config_.seed)).first;
    }
    return {L.graph.with_kappa(it->second.kappa_hat, Provenance::estimated), it->second};
  }

private:
  static std::vector<TestFunction> select(const std::vector<TestFunction>& all, const std::vector<std::string>& ids)
  {
    std::vector<TestFunction> out;
    for (const auto& f : all)
      if (std::find(ids.begin(), ids.end(), f.id) != ids.end())
        out.push_back(f);
    return out;
  }

  const ScenarioConfig& config_;
  std::map<int, std::unique_ptr<LevelData>> levels_;
  std::map<std::pair<int, double>, WeakBeReport> kappa_cache_;
};

double param(const SuiteSpec& s, const char* key, double fallback)
{
  const auto it = s.params.find(key);
  return it == s.params.end() ? fallback : it->second;
}

bool is_fractal(SpaceKind kind)
{
  return kind == SpaceKind::gasket || kind == SpaceKind::vicsek;
}

Record weak_be_record(const WeakBeReport& r, const MetricMeasureGraph& graph, const std::vector<double>& grid,
                      double tolerance, const std::string& note)
{
  InequalityReport ir;
  ir.name = "weak_be";
  ir.space = space_label(graph);
  ir.delta = r.delta;
  ir.p = 1.0;
  ir.resolution = graph.descriptor().resolution;
  ir.lhs = r.kappa_hat;
  ir.rhs = r.reference_kappa;
  ir.constant = r.constant;
  ir.tolerance = tolerance;
  ir.window_lo = grid.front();
  ir.window_hi = grid.back();
  ir.inconclusive = r.inconclusive;
  bool pass = r.converged;
  if (graph.geometry().kappa_provenance == Provenance::analytic && graph.geometry().kappa)
    pass = pass && std::abs(r.kappa_hat - *graph.geometry().kappa) <= tolerance;
  ir.pass = pass;
  ir.set("kappa_hat", r.kappa_hat);
  ir.set("ci_lo", r.ci_lo);
  ir.set("ci_hi", r.ci_hi);
  ir.set("constant", r.constant);
  ir.set("reference_kappa", r.reference_kappa);
  ir.set("slope", r.fit.slope);
  ir.set("r_squared", r.fit.r_squared);
  ir.set("fixed_point_residual", r.fixed_point_residual);
  ir.set("converged", r.converged ? 1.0 : 0.0);
  ir.set("nearest_neighbor_argmax", r.nearest_neighbor_argmax ? 1.0 : 0.0);
  ir.set("pair_count", static_cast<double>(r.pair_count));
  ir.note = note;
  return make_record(ir, ojson::object());
}

struct Evaluation
{
  std::vector<Record> records;
  std::vector<CsvFile> curves;
};

class Runner
{
public:
  explicit Runner(const ScenarioConfig& c) : c_(c), ws_(c) {}

  Evaluation run()
  {
    for (std::size_t i = 0; i < c_.suites.size(); ++i) {
      const SuiteSpec& s = c_.suites[i];
      const SuiteInfo& info = *find_suite(s.name);
      const std::string path = at("suites", i);
      const auto deltas = s.deltas.empty() ? c_.deltas : s.deltas;
      const auto ps = info.uses_p ? (s.ps.empty() ? c_.ps : s.ps) : std::vector<double>{1.0};
      for (double delta : deltas) {
        for (double p : ps) {
          const std::size_t before = out_.records.size();
          try {
            cell(s, info, delta, p);
            if (s.expect == "wrong_regime") {
              out_.records.resize(before);
              out_.records.push_back(expectation(s, delta, p, false, "expected a wrong-regime error"));
            }
          } catch (const WrongRegime& e) {
            out_.records.resize(before);
            if (s.expect != "wrong_regime")
              throw ConfigInvalid(path, e.what());
            out_.records.push_back(expectation(s, delta, p, true, e.what()));
          } catch (const ConfigInvalid&) {
            throw;
          } catch (const Error& e) {
            throw ConfigInvalid(path + " (" + s.name + ")", e.what());
          }
        }
      }
    }
    return std::move(out_);
  }

private:
  Record expectation(const SuiteSpec& s, double delta, double p, bool ok, const std::string& note)
  {
    InequalityReport r;
    r.name = s.name;
    r.space = to_string(c_.space.kind);
    r.delta = delta;
    r.p = p;
    r.resolution = suite_levels(c_, s).front();
    r.pass = ok;
    r.note = "expect wrong_regime: " + note;
    return make_record(r, ojson{{"expect", "wrong_regime"}});
  }

  void push(const InequalityReport& r, const ojson& extra = ojson::object())
  {
    out_.records.push_back(make_record(r, extra));
  }

  static void ensure_constant(InequalityReport& r)
  {
    for (const auto& [k, v] : r.values)
      if (k == "constant")
        return;
    r.set("constant", r.constant);
  }

  void note_kappa(const std::optional<WeakBeReport>& be, const LevelData& L, double delta)
  {
    if (!be)
      return;
    const auto key = std::make_pair(L.graph.descriptor().resolution, delta);
    if (reported_kappa_.insert(key).second) {
      const auto t = ws_.grid(L, delta, true, 0.5);
      out_.records.push_back(weak_be_record(*be, L.graph, t, 0.1, "kappa estimate used by later records"));
    }
  }

  void cell(const SuiteSpec& s, const SuiteInfo& info, double delta, double p)
  {
    const auto levels = suite_levels(c_, s);
    if (info.levels == Levels::series) {
      series(s, delta, p, levels);
      return;
    }
    std::vector<InequalityReport> reports;
    for (int res : levels) {
      LevelData& L = ws_.level(res);
      if (info.levels == Levels::single) {
        single(s, L, delta, p);
      } else {
        InequalityReport r = compared(s, L, delta, p);
        ensure_constant(r);
        push(r);
        reports.push_back(std::move(r));
      }
    }
    if (reports.size() == 2) {
      const auto keys = level_keys(s, reports.front());
      const double tol = param(s, "level_tolerance", level_tolerance);
      push(compare_levels(reports[0], reports[1], keys, tol));
    }
  }

  std::vector<std::string> level_keys(const SuiteSpec& s, const InequalityReport& r) const
  {
    if (s.name == "coarea")
      return {"c1"};
    if (s.name == "capacity_sobolev")
      return {"theta", "constant"};
    if (s.name == "bv_characterization")
      return {"ratio_min", "ratio_max"};
    if (s.name == "equivalence")
      return equivalence_keys(r.p, r.get("alpha"));
    return {"constant"};
  }

  TestFunction member(const LevelData& L, const SuiteSpec& s) const
  {
    const std::string id = default_function(c_, s);
    for (auto& f : ws_.family(L, {}))
      if (f.id == id)
        return f;
    throw ConfigInvalid("function", "unknown family member " + id);
  }

  void single(const SuiteSpec& s, LevelData& L, double delta, double p)
  {
    const double decades = param(s, "decades", 0.5);
    const auto fam = ws_.family(L, s.members);
    if (s.name == "critical_exponent") {
      const auto t = ws_.grid(L, delta, true, decades);
      std::optional<double> kappa;
      std::string note;
      if (p < 2.0 || s.params.contains("kappa")) {
        auto [g, be] = ws_.with_kappa(L, delta, s);
        note_kappa(be, L, delta);
        kappa = *g.geometry().kappa;
        if (be)
          note = "kappa estimated by weak_be";
      }
      const double tol = s.tolerance.value_or(is_fractal(c_.space.kind) ? 0.1 : 0.05);
      const auto r = critical_exponent(L.spec, L.graph, delta, p, fam, t, kappa, tol);
      exponent_record(r, L, t, note);
      return;
    }
    if (s.name == "weak_be") {
      const auto t = ws_.grid(L, delta, true, decades);
      const auto pairs = static_cast<std::size_t>(param(s, "sampled_pairs", 100000));
      const auto r = weak_be_fit(L.spec, L.graph, delta, fam, t, c_.seed, pairs);
      out_.records.push_back(weak_be_record(r, L.graph, t, s.tolerance.value_or(0.1), ""));
      return;
    }
    if (s.name == "kernel_bounds") {
      const auto t = ws_.grid(L, delta, false, decades);
      const auto b = kernel_bound_fit(L.spec, L.graph, delta, t, c_.seed);
      InequalityReport r = base(s.name, L, delta, 1.0);
      r.lhs = b.diagonal_slope;
      r.rhs = b.predicted_slope;
      r.constant = b.c3;
      r.tolerance = s.tolerance.value_or(is_fractal(c_.space.kind) ? 0.1 : 0.05);
      r.window_lo = b.window_lo;
      r.window_hi = b.window_hi;
      r.set("diagonal_slope", b.diagonal_slope);
      r.set("predicted_slope", b.predicted_slope);
      r.set("r_squared", b.r_squared);
      r.set("profile_scale", b.profile_scale);
      r.set("c3", b.c3);
      r.set("c4", b.c4);
      r.set("c5", b.c5);
      r.set("c6", b.c6);
      r.set("coverage", b.coverage);
      r.pass = std::abs(b.diagonal_slope - b.predicted_slope) <= r.tolerance && b.r_squared >= min_r_squared;
      push(r);
      return;
    }
    if (s.name == "capacity_structure") {
      const auto sets = dyadic_sets(L.graph, static_cast<int>(param(s, "depth", 3)));
      push(capacity_structure_check(L.spec, L.graph, delta, sets));
      return;
    }
  }

  InequalityReport base(const std::string& name, const LevelData& L, double delta, double p) const
  {
    InequalityReport r;
    r.name = name;
    r.space = space_label(L.graph);
    r.delta = delta;
    r.p = p;
    r.resolution = L.graph.descriptor().resolution;
    return r;
  }

  void exponent_record(const CriticalExponentReport& r, const LevelData& L, const std::vector<double>& t,
                       const std::string& note)
  {
    InequalityReport ir = base("critical_exponent", L, r.delta, r.p);
    ir.lhs = r.estimate;
    ir.rhs = r.has_point_prediction ? r.prediction : r.bracket_hi;
    ir.constant = r.estimate;
    ir.tolerance = r.tolerance;
    ir.pass = r.pass;
    ir.inconclusive = r.inconclusive;
    ir.window_lo = t.front();
    ir.window_hi = t.back();
    ir.set("estimate", r.estimate);
    if (r.has_point_prediction) {
      ir.set("prediction", r.prediction);
    } else {
      ir.set("bracket_lo", r.bracket_lo);
      ir.set("bracket_hi", r.bracket_hi);
    }
    ir.set("beta_p", r.beta_p);
    ir.set("kappa", r.kappa);
    for (const auto& [id, fit] : r.fits) {
      ir.set("slope:" + id, fit.slope);
      ir.set("r_squared:" + id, fit.r_squared);
    }
    ir.note = "witness " + (r.witness.empty() ? std::string("none") : r.witness);
    if (!note.empty())
      ir.note += "; " + note;
    push(ir);

    std::string csv = "function_id,t,E_p,besov_profile\n";
    for (const auto& curve : r.curves) {
      for (std::size_t i = 0; i < curve.grid.size(); ++i) {
        const double e = curve.energies[i];
        const double profile = std::pow(curve.grid[i], -r.estimate) * std::pow(e, 1.0 / r.p);
        csv += curve.function_id + "," + fmt17(curve.grid[i]) + "," + fmt17(e) + "," + fmt17(profile) + "\n";
      }
    }
    out_.curves.push_back({"curves/critical_exponent_" + file_label(ir.space) + "_d" + short_number(r.delta) +
                               "_p" + short_number(r.p) + ".csv",
                           std::move(csv)});
  }

  InequalityReport compared(const SuiteSpec& s, LevelData& L, double delta, double p)
  {
    const auto fam = ws_.family(L, s.members);
    const auto radii = default_radius_grid(L.graph);
    if (s.name == "coarea") {
      double alpha = param(s, "alpha", 0.0);
      if (!s.params.contains("alpha")) {
        auto [g, be] = ws_.with_kappa(L, delta, s);
        note_kappa(be, L, delta);
        alpha = predicted_critical_exponent(1.0, delta, *g.geometry().kappa, g.geometry().d_W);
      }
      const auto t = ws_.grid(L, delta, false, 0.5);
      auto r = coarea_check(L.spec, L.graph, delta, member(L, s).values, alpha, t,
                            static_cast<std::size_t>(param(s, "levels", 64)));
      r.note = default_function(c_, s);
      return r;
    }
    if (s.name == "pseudo_poincare") {
      auto [g, be] = ws_.with_kappa(L, delta, s);
      note_kappa(be, L, delta);
      const auto t = ws_.grid(L, delta, true, param(s, "decades", 0.5));
      return pseudo_poincare_check(L.spec, g, delta, member(L, s), t, radii, s.tolerance.value_or(0.05));
    }
    if (s.name == "sobolev")
      return sobolev_check(L.graph, delta, p, fam);
    if (s.name == "isoperimetric") {
      const std::vector<double> fractions{0.125, 0.25, 0.5};
      return isoperimetric_check(L.graph, delta, centred_balls(L.graph, fractions));
    }
    if (s.name == "linfty")
      return linfty_check(L.graph, delta, fam);
    if (s.name == "lp_smoothing") {
      const auto t = ws_.grid(L, delta, false, 0.5);
      return lp_smoothing_check(L.spec, L.graph, delta, p, member(L, s), t, t, s.tolerance.value_or(0.05));
    }
    if (s.name == "capacity_sobolev") {
      const double d_H = L.graph.geometry().d_H;
      const double d_W = L.graph.geometry().d_W;
      const double gap = d_H - delta * d_W;
      const double kappa_cap = param(s, "kappa_cap", gap > 0.0 ? d_H / gap : 1.0);
      const auto sets = dyadic_sets(L.graph, static_cast<int>(param(s, "depth", 3)));
      return capacity_sobolev_check(L.spec, L.graph, delta, kappa_cap, sets, fam);
    }
    if (s.name == "bv_characterization") {
      auto [g, be] = ws_.with_kappa(L, delta, s);
      note_kappa(be, L, delta);
      const auto t = ws_.grid(L, delta, false, 0.5);
      return bv_characterization_check(L.spec, g, delta, fam, t, radii);
    }
    // equivalence
    const double alpha = param(s, "alpha", 1.0 / p);
    const auto t = ws_.grid(L, delta, false, 0.5);
    return equivalence_brackets(L.spec, L.graph, delta, p, alpha, fam, t, radii);
  }

  void series(const SuiteSpec& s, double delta, double p, const std::vector<int>& resolutions)
  {
    std::vector<Level> levels;
    for (int res : resolutions) {
      LevelData& L = ws_.level(res);
      levels.push_back({&L.graph, &L.spec});
    }
    if (s.name == "triviality") {
      push(triviality_check(levels, delta, p, param(s, "offset", 0.2), c_.t_grid.count));
      return;
    }
    const double k = param(s, "frequency", 16.0);
    auto r = brezis_check(
        levels, delta, p,
        [k](const MetricMeasureGraph& g) {
          const Eigen::VectorXd x = coordinate(g);
          return Eigen::VectorXd(x.unaryExpr([k](double v) { return std::cos(2.0 * M_PI * k * v); }));
        },
        param(s, "min_growth", 0.15));
    r.set("frequency", k);
    push(r);
  }

  const ScenarioConfig& c_;
  Workspace ws_;
  Evaluation out_;
  std::set<std::pair<int, double>> reported_kappa_;
};

std::string iso_timestamp()
{
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string summary_csv(const std::vector<Record>& records)
{
  std::string csv = "suite,space,delta,p,lhs,rhs,constant,pass\n";
  for (const auto& r : records)
    csv += r.suite + "," + r.space + "," + fmt17(r.delta) + "," + fmt17(r.p) + "," + fmt17(r.lhs) + "," +
           fmt17(r.rhs) + "," + fmt17(r.constant) + "," + r.status + "\n";
  return csv;
}

RunResult assemble(const Evaluation& e)
{
  RunResult result;
  ojson report = ojson::array();
  for (const auto& r : e.records) {
    report.push_back(r.body);
    ++result.records;
    if (r.status == "fail")
      ++result.failed;
    else if (r.status == "inconclusive")
      ++result.inconclusive;
  }
  result.report = report.dump(2) + "\n";
  result.exit_code = result.failed > 0 ? 2 : (result.inconclusive > 0 ? 3 : 0);
  return result;
}

void write_file(const std::filesystem::path& path, const std::string& contents)
{
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw ConfigInvalid("output", "cannot write " + path.string());
  out << contents;
}

} // namespace

const std::vector<std::string>& suite_names()
{
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& s : suite_table())
      n.emplace_back(s.name);
    return n;
  }();
  return names;
}

ScenarioConfig parse_config(const std::string& json_text)
{
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigInvalid("config", std::string("not valid JSON: ") + e.what());
  }
  if (!j.is_object())
    throw ConfigInvalid("config", "expected an object");
  reject_unknown(j, "", {"name", "space", "deltas", "ps", "t_grid", "family", "suites", "output", "seed"});
  ScenarioConfig c;
  if (j.contains("name"))
    c.name = as_string(j["name"], "name");
  c.space = parse_space(object_at(j, "space", ""), "space");
  if (!j.contains("deltas"))
    throw ConfigInvalid("deltas", "missing");
  c.deltas = double_list(j, "deltas", "");
  if (j.contains("ps"))
    c.ps = double_list(j, "ps", "");
  if (j.contains("t_grid"))
    c.t_grid = parse_grid(object_at(j, "t_grid", ""), "t_grid");
  if (j.contains("family"))
    c.family = parse_family(object_at(j, "family", ""), "family");
  if (!j.contains("suites"))
    throw ConfigInvalid("suites", "missing");
  c.suites = read_list(j, "suites", "", parse_suite);
  if (j.contains("output"))
    c.output = as_string(j["output"], "output");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !(j["seed"].is_number_integer() && j["seed"].get<long long>() >= 0))
      throw ConfigInvalid("seed", "expected a non-negative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  validate(c);
  return c;
}

ScenarioConfig load_config(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ConfigInvalid("config", "cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string serialize_config(const ScenarioConfig& config)
{
  return to_json(config).dump(2) + "\n";
}

std::string config_hash(const ScenarioConfig& config)
{
  const std::string text = serialize_config(config);
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(std::span<const char>(text.data(), text.size()))));
  return buf;
}

void validate(const ScenarioConfig& c)
{
  check_resolution(c.space.kind, c.space.resolution, "space.resolution");
  if (c.space.boundary == BoundaryMode::absorbing && c.space.kind != SpaceKind::interval)
    throw ConfigInvalid("space.boundary", "absorbing is only available on the interval");
  if (c.space.refine < 0)
    throw ConfigInvalid("space.refine", "must be 0 or a resolution");
  if (c.space.refine > 0) {
    check_resolution(c.space.kind, c.space.refine, "space.refine");
    if (c.space.refine <= c.space.resolution)
      throw ConfigInvalid("space.refine", "must exceed space.resolution");
  }
  if (c.deltas.empty())
    throw ConfigInvalid("deltas", "empty");
  check_deltas(c.deltas, "deltas");
  if (c.ps.empty())
    throw ConfigInvalid("ps", "empty");
  check_ps(c.ps, "ps", 1.0);
  if (c.t_grid.count < 8)
    throw ConfigInvalid("t_grid.count", "must be at least 8");
  if (!(c.t_grid.t_min_multiplier > 0.0) || !std::isfinite(c.t_grid.t_min_multiplier))
    throw ConfigInvalid("t_grid.t_min_multiplier", "must be positive");
  if (!(c.t_grid.t_max_multiplier > 0.0) || !std::isfinite(c.t_grid.t_max_multiplier))
    throw ConfigInvalid("t_grid.t_max_multiplier", "must be positive");

  if (c.family.kind == "canonical") {
    if (!c.family.functions.empty())
      throw ConfigInvalid("family.functions", "only allowed with kind explicit");
    for (std::size_t i = 0; i < c.family.members.size(); ++i)
      if (std::find(canonical_ids.begin(), canonical_ids.end(), c.family.members[i]) == canonical_ids.end())
        throw ConfigInvalid(at("family.members", i), "unknown canonical member " + c.family.members[i]);
  } else if (c.family.kind == "explicit") {
    if (c.family.functions.empty())
      throw ConfigInvalid("family.functions", "empty");
    if (!c.family.members.empty())
      throw ConfigInvalid("family.members", "only allowed with kind canonical");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < c.family.functions.size(); ++i) {
      const auto& f = c.family.functions[i];
      const std::string p = at("family.functions", i);
      if (f.id.empty())
        throw ConfigInvalid(at(p, "id"), "empty");
      if (!seen.insert(f.id).second)
        throw ConfigInvalid(at(p, "id"), "duplicate id " + f.id);
      if (f.shape != "cosine" && f.shape != "indicator" && f.shape != "tent")
        throw ConfigInvalid(at(p, "shape"), "expected cosine, indicator or tent");
      if (f.shape == "tent" && !(f.width > 0.0))
        throw ConfigInvalid(at(p, "width"), "must be positive");
      if (f.shape == "indicator" && !(f.lo < f.hi))
        throw ConfigInvalid(at(p, "hi"), "must exceed lo");
    }
  } else {
    throw ConfigInvalid("family.kind", "expected canonical or explicit");
  }

  if (c.suites.empty())
    throw ConfigInvalid("suites", "empty");
  const auto ids = family_ids(c);
  for (std::size_t i = 0; i < c.suites.size(); ++i) {
    const SuiteSpec& s = c.suites[i];
    const std::string p = at("suites", i);
    const SuiteInfo* info = find_suite(s.name);
    if (!info)
      throw ConfigInvalid(at(p, "name"), "unknown suite " + s.name);
    check_deltas(s.deltas, at(p, "deltas"));
    check_ps(s.ps, at(p, "ps"), 1.0);
    if (!info->uses_p && !s.ps.empty())
      throw ConfigInvalid(at(p, "ps"), s.name + " takes no p");
    if (s.name == "lp_smoothing")
      check_ps(s.ps.empty() ? c.ps : s.ps, s.ps.empty() ? "ps" : at(p, "ps"), 2.0);
    for (std::size_t r = 0; r < s.resolutions.size(); ++r)
      check_resolution(c.space.kind, s.resolutions[r], at(at(p, "resolutions"), r));
    const auto levels = suite_levels(c, s);
    if (info->levels == Levels::series && levels.size() < 2)
      throw ConfigInvalid(at(p, "resolutions"), "needs at least two levels");
    if (info->levels == Levels::compared && levels.size() > 2)
      throw ConfigInvalid(at(p, "resolutions"), "at most two levels");
    for (std::size_t m = 0; m < s.members.size(); ++m)
      if (std::find(ids.begin(), ids.end(), s.members[m]) == ids.end())
        throw ConfigInvalid(at(at(p, "members"), m), "not in the family: " + s.members[m]);
    if (!s.function.empty() && std::find(ids.begin(), ids.end(), s.function) == ids.end())
      throw ConfigInvalid(at(p, "function"), "not in the family: " + s.function);
    const bool single_function = s.name == "coarea" || s.name == "pseudo_poincare" || s.name == "lp_smoothing";
    if (single_function) {
      const std::string f = default_function(c, s);
      if (std::find(ids.begin(), ids.end(), f) == ids.end())
        throw ConfigInvalid(at(p, "function"), "default member " + f + " is not in the family");
    }
    if (s.expect != "pass" && s.expect != "wrong_regime")
      throw ConfigInvalid(at(p, "expect"), "expected pass or wrong_regime");
    if (s.tolerance && !(*s.tolerance >= 0.0))
      throw ConfigInvalid(at(p, "tolerance"), "must be non-negative");
    for (const auto& [k, v] : s.params) {
      if (std::find(info->params.begin(), info->params.end(), k) == info->params.end())
        throw ConfigInvalid(at(at(p, "params"), k), "unknown parameter for " + s.name);
      if (!std::isfinite(v))
        throw ConfigInvalid(at(at(p, "params"), k), "must be finite");
    }
    if (s.params.contains("depth") && !(s.params.at("depth") >= 1.0 && s.params.at("depth") <= 6.0))
      throw ConfigInvalid(at(at(p, "params"), "depth"), "must lie in [1, 6]");
    if (s.params.contains("decades") && !(s.params.at("decades") > 0.0))
      throw ConfigInvalid(at(at(p, "params"), "decades"), "must be positive");
    if (s.params.contains("levels") && !(s.params.at("levels") >= 2.0))
      throw ConfigInvalid(at(at(p, "params"), "levels"), "must be at least 2");
    if (s.params.contains("sampled_pairs") && !(s.params.at("sampled_pairs") >= 1.0))
      throw ConfigInvalid(at(at(p, "params"), "sampled_pairs"), "must be at least 1");
  }
  if (c.output.empty())
    throw ConfigInvalid("output", "empty");
}

RunResult evaluate_scenario(const ScenarioConfig& config)
{
  validate(config);
  Runner runner(config);
  return assemble(runner.run());
}

RunResult run_scenario(const ScenarioConfig& config, const std::filesystem::path& out_dir)
{
  validate(config);
  const std::filesystem::path dir = out_dir.empty() ? std::filesystem::path(config.output) : out_dir;
  Runner runner(config);
  const Evaluation e = runner.run();
  RunResult result = assemble(e);

  write_file(dir / "report.json", result.report);
  result.files.push_back("report.json");
  write_file(dir / "summary.csv", summary_csv(e.records));
  result.files.push_back("summary.csv");
  for (const auto& f : e.curves) {
    write_file(dir / f.path, f.contents);
    result.files.push_back(f.path);
  }
  result.files.push_back("manifest.json");

  ojson versions = ojson::object();
  for (const auto& [k, v] : version_info())
    versions[k] = v;
  const ojson manifest{{"name", config.name},
                       {"config_hash", config_hash(config)},
                       {"config", ojson::parse(serialize_config(config))},
                       {"versions", versions},
                       {"timestamp", iso_timestamp()},
                       {"threads", worker_count()},
                       {"exit_code", result.exit_code},
                       {"records", result.records},
                       {"failed", result.failed},
                       {"inconclusive", result.inconclusive},
                       {"files", result.files}};
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  return result;
}

std::map<std::string, std::string> version_info()
{
  std::map<std::string, std::string> v;
  v["subheat"] = SUBHEAT_VERSION;
  v["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  v["boost"] = std::to_string(BOOST_VERSION / 100000) + "." + std::to_string(BOOST_VERSION / 100 % 1000) + "." +
               std::to_string(BOOST_VERSION % 100);
  v["nlohmann_json"] = std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                       std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                       std::to_string(NLOHMANN_JSON_VERSION_PATCH);
#if defined(__clang__)
  v["compiler"] = std::string("clang ") + __clang_version__;
#elif defined(__GNUC__)
  v["compiler"] = std::string("gcc ") + __VERSION__;
#else
  v["compiler"] = "unknown";
#endif
  return v;
}

} // namespace subheat
