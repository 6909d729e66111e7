// subheat command-line driver.
//
//   subheat run CONFIG [--out DIR]
//   subheat space --space gasket --level 4
//   subheat kernel --space circle --n 64 --delta 1 --t 0.1
//   subheat subordinator --delta 0.5 --t 1 --s 1
//   subheat seminorm --space circle --n 256 --delta 0.5 --p 1 --alpha 0.5 --f tent
//   subheat exponent --space circle --n 256 --delta 0.8 --p 1
//   subheat suite --space circle --n 256 --refine 512 --delta 0.8 --suite bv_characterization
//
// Exit codes: 0 pass, 1 invalid configuration or arguments, 2 a check failed,
// 3 a check was inconclusive.

#include "subheat/analysis.hpp"
#include "subheat/errors.hpp"
#include "subheat/scenario.hpp"
#include "subheat/seminorms.hpp"
#include "subheat/space.hpp"
#include "subheat/spectral.hpp"
#include "subheat/subordinator.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

using namespace subheat;

namespace {

constexpr int exit_invalid = 1;

std::string g17(double x)
{
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

struct SpaceArgs
{
  std::string kind = "circle";
  int resolution = 0;
  std::string boundary = "reflecting";
};

void add_space_flags(CLI::App* cmd, SpaceArgs& a)
{
  cmd->add_option("--space", a.kind, "circle | interval | gasket | vicsek")->required();
  cmd->add_option("--level,--n", a.resolution, "level m (fractals) or node count n")->required();
  cmd->add_option("--boundary", a.boundary, "reflecting | absorbing (interval only)");
}

MetricMeasureGraph build(const SpaceArgs& a)
{
  SpaceDescriptor d;
  try {
    d.kind = parse_space_kind(a.kind);
  } catch (const std::exception&) {
    throw ConfigInvalid("--space", "expected circle, interval, gasket or vicsek");
  }
  try {
    d.boundary = parse_boundary_mode(a.boundary);
  } catch (const std::exception&) {
    throw ConfigInvalid("--boundary", "expected reflecting or absorbing");
  }
  if (d.boundary == BoundaryMode::absorbing && d.kind != SpaceKind::interval)
    throw ConfigInvalid("--boundary", "absorbing is only available on the interval");
  d.resolution = a.resolution;
  try {
    return d.kind == SpaceKind::interval ? build_interval(a.resolution, d.boundary) : build_space(d);
  } catch (const InvalidResolution& e) {
    throw ConfigInvalid("--level", e.what());
  }
}

std::ofstream open_out(const std::filesystem::path& path)
{
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw ConfigInvalid("--out", "cannot write " + path.string());
  return out;
}

int report_run(const RunResult& r, const std::filesystem::path& dir)
{
  std::cout << r.records << " records, " << r.failed << " failed, " << r.inconclusive << " inconclusive -> "
            << (dir / "report.json").string() << "\n";
  return r.exit_code;
}

int cmd_space(const SpaceArgs& a, const std::string& out)
{
  const MetricMeasureGraph g = build(a);
  nlohmann::ordered_json j;
  j["descriptor"] = nlohmann::ordered_json::parse(descriptor_to_json(g.descriptor()));
  j["node_count"] = g.node_count();
  j["edge_count"] = g.edges().size();
  j["boundary_count"] = g.boundary().size();
  j["total_mass"] = g.total_mass();
  j["spacing"] = g.spacing();
  j["diameter"] = g.diameter();
  try {
    const auto radii = default_radius_grid(g);
    const AhlforsFit fit = ahlfors_fit(g, radii);
    j["ahlfors"] = {{"d_H", fit.d_H}, {"c1", fit.c1}, {"c2", fit.c2}, {"r_lo", radii.front()}, {"r_hi", radii.back()}};
  } catch (const InvalidGrid& e) {
    j["ahlfors"] = e.what();
  }
  std::cout << j.dump(2) << "\n";
  if (!out.empty()) {
    const std::filesystem::path dir(out);
    auto nodes = open_out(dir / "nodes.csv");
    nodes << "node,x,y,mass,boundary\n";
    for (std::size_t i = 0; i < g.node_count(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      nodes << i << "," << g17(g.positions()(k, 0)) << "," << g17(g.positions()(k, 1)) << ","
            << g17(g.measure()(k)) << "," << (g.is_boundary(static_cast<int>(i)) ? 1 : 0) << "\n";
    }
    auto edges = open_out(dir / "edges.csv");
    edges << "i,j,conductance\n";
    for (const auto& e : g.edges())
      edges << e.i << "," << e.j << "," << g17(e.conductance) << "\n";
    open_out(dir / "space.json") << descriptor_to_json(g.descriptor()) << "\n";
  }
  return 0;
}

int cmd_kernel(const SpaceArgs& a, double delta, double t, const std::string& out, const std::string& binary)
{
  if (!(delta > 0.0 && delta <= 1.0))
    throw ConfigInvalid("--delta", "must lie in (0, 1]");
  if (!(t > 0.0))
    throw ConfigInvalid("--t", "must be positive");
  const MetricMeasureGraph g = build(a);
  const SpectralDecomposition spec = eigendecompose(g);
  const KernelMatrix k = delta == 1.0 ? heat_kernel(spec, t) : subordinated_kernel(spec, delta, t);
  const Eigen::VectorXd rows = k.row_integrals(g.measure());
  std::ofstream file;
  if (!out.empty())
    file = open_out(out);
  std::ostream& os = out.empty() ? std::cout : file;
  os << "row,col,value,row_integral\n";
  const auto n = static_cast<Eigen::Index>(k.node_count());
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      os << i << "," << j << "," << g17(k.entries(i, j)) << "," << g17(rows(i)) << "\n";
  if (!binary.empty())
    write_kernel_binary(k, binary);
  return 0;
}

int cmd_subordinator(double delta, double t, std::optional<double> s, double s_min, double s_max, int count,
                     const std::string& out)
{
  if (!(delta > 0.0 && delta < 1.0))
    throw ConfigInvalid("--delta", "must lie in (0, 1)");
  if (!(t > 0.0))
    throw ConfigInvalid("--t", "must be positive");
  if (s) {
    if (!(*s > 0.0))
      throw ConfigInvalid("--s", "must be positive");
    std::cout << g17(subordinator_density(delta, t, *s)) << "\n";
  }
  if (out.empty())
    return 0;
  if (!(s_min > 0.0 && s_min < s_max) || count < 2)
    throw ConfigInvalid("--s-min", "need 0 < s-min < s-max and count >= 2");
  const std::filesystem::path dir(out);
  auto csv = open_out(dir / "subordinator.csv");
  csv << "delta,t,s,density\n";
  for (double x : log_space(s_min, s_max, static_cast<std::size_t>(count)))
    csv << g17(delta) << "," << g17(t) << "," << g17(x) << "," << g17(subordinator_density(delta, t, x)) << "\n";
  nlohmann::ordered_json moments = nlohmann::ordered_json::array();
  for (double alpha : {-1.0, -0.5, 0.0, delta / 2.0, delta}) {
    const MomentResult m = subordinator_moment(delta, t, alpha);
    moments.push_back({{"delta", delta},
                       {"t", t},
                       {"alpha", alpha},
                       {"divergent", m.divergent},
                       {"value", m.divergent ? nlohmann::ordered_json("inf") : nlohmann::ordered_json(m.value)},
                       {"reference", m.divergent ? nlohmann::ordered_json("inf") : nlohmann::ordered_json(m.reference)},
                       {"abs_error", m.abs_error}});
  }
  open_out(dir / "moments.json") << moments.dump(2) << "\n";
  return 0;
}

int cmd_seminorm(const SpaceArgs& a, double delta, double p, double alpha, const std::string& f_id,
                 const std::string& out)
{
  if (!(delta > 0.0 && delta <= 1.0))
    throw ConfigInvalid("--delta", "must lie in (0, 1]");
  if (!(p >= 1.0))
    throw ConfigInvalid("--p", "must be at least 1");
  if (!(alpha > 0.0))
    throw ConfigInvalid("--alpha", "must be positive");
  const MetricMeasureGraph g = build(a);
  const SpectralDecomposition spec = eigendecompose(g);
  auto family = canonical_family(g, spec);
  if (!f_id.empty()) {
    std::erase_if(family, [&](const TestFunction& f) { return f.id != f_id; });
    if (family.empty())
      throw ConfigInvalid("--f", "unknown family member " + f_id);
  }
  const auto grid = resolved_time_grid(g, spec, delta);
  const auto radii = default_radius_grid(g);
  const auto curves = energy_curves(spec, family, p, delta, grid);
  const std::filesystem::path dir(out.empty() ? "." : out);
  std::ofstream table;
  if (!out.empty()) {
    table = open_out(dir / "seminorms.csv");
    table << "function_id,besov,ks_limsup,ks_sup,w_norm,N_p_inf,N_p_p\n";
  }
  std::cout << "function_id,besov,ks_limsup,ks_sup,w_norm,N_p_inf,N_p_p\n";
  for (std::size_t i = 0; i < family.size(); ++i) {
    const EnergyCurve& c = curves[i];
    const SeminormReport r = seminorm_report(g, c, family[i].values, alpha, radii);
    const std::string row = r.function_id + "," + g17(r.besov) + "," + g17(r.ks_limsup) + "," + g17(r.ks_sup) +
                            "," + g17(r.w_norm) + "," + g17(r.grigoryan_p_inf) + "," + g17(r.grigoryan_p_p);
    std::cout << row << "\n";
    if (!out.empty()) {
      table << row << "\n";
      auto curve = open_out(dir / ("curve_" + c.function_id + ".csv"));
      curve << "t,E_p,besov_profile\n";
      const auto profile = besov_profile(c, alpha);
      for (std::size_t k = 0; k < c.grid.size(); ++k)
        curve << g17(c.grid[k]) << "," << g17(c.energies[k]) << "," << g17(profile[k]) << "\n";
    }
  }
  return 0;
}

ScenarioConfig one_suite(const SpaceArgs& a, int refine, const std::vector<double>& deltas,
                         const std::vector<double>& ps, const std::string& suite, std::optional<double> alpha,
                         std::optional<double> tolerance, const std::string& out)
{
  nlohmann::json j;
  j["name"] = suite;
  j["space"] = {{"kind", a.kind}, {"resolution", a.resolution}, {"boundary", a.boundary}, {"refine", refine}};
  j["deltas"] = deltas;
  j["ps"] = ps;
  nlohmann::json s{{"name", suite}};
  if (alpha)
    s["params"] = {{"alpha", *alpha}};
  if (tolerance)
    s["tolerance"] = *tolerance;
  j["suites"] = nlohmann::json::array({s});
  j["output"] = out;
  return parse_config(j.dump());
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Subordinated heat semigroups, Besov critical exponents and functional inequalities"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version_info()["subheat"]);

  std::string config_path, out;
  auto* run = app.add_subcommand("run", "Run a scenario config");
  run->add_option("config", config_path, "scenario JSON")->required();
  run->add_option("--out", out, "output directory (overrides the config)");

  SpaceArgs sa;
  std::string space_out;
  auto* space = app.add_subcommand("space", "Build a space and report its geometry");
  add_space_flags(space, sa);
  space->add_option("--out", space_out, "directory for nodes.csv, edges.csv, space.json");

  SpaceArgs ka;
  double k_delta = 1.0, k_t = 0.0;
  std::string k_out, k_binary;
  auto* kernel = app.add_subcommand("kernel", "Dense heat or subordinated kernel as CSV");
  add_space_flags(kernel, ka);
  kernel->add_option("--delta", k_delta, "stability index, 1 = heat kernel");
  kernel->add_option("--t", k_t, "time")->required();
  kernel->add_option("--out", k_out, "CSV path (stdout when omitted)");
  kernel->add_option("--binary", k_binary, "also write the binary dump");

  double s_delta = 0.5, s_t = 1.0, s_min = 1e-2, s_max = 1e2;
  std::optional<double> s_s;
  int s_count = 64;
  std::string s_out;
  auto* sub = app.add_subcommand("subordinator", "One-sided stable subordinator density and moments");
  sub->add_option("--delta", s_delta, "stability index in (0, 1)")->required();
  sub->add_option("--t", s_t, "time");
  sub->add_option("--s", s_s, "abscissa; prints the density");
  sub->add_option("--s-min", s_min, "grid start for --out");
  sub->add_option("--s-max", s_max, "grid end for --out");
  sub->add_option("--count", s_count, "grid size for --out");
  sub->add_option("--out", s_out, "directory for subordinator.csv and moments.json");

  SpaceArgs na;
  double n_delta = 0.5, n_p = 1.0, n_alpha = 0.5;
  std::string n_f, n_out;
  auto* semi = app.add_subcommand("seminorm", "Besov, Korevaar-Schoen, W and Grigor'yan seminorms");
  add_space_flags(semi, na);
  semi->add_option("--delta", n_delta, "stability index")->required();
  semi->add_option("--p", n_p, "integrability exponent");
  semi->add_option("--alpha", n_alpha, "smoothness exponent");
  semi->add_option("--f", n_f, "family member (all when omitted)");
  semi->add_option("--out", n_out, "directory for curve and summary CSVs");

  SpaceArgs ea;
  std::vector<double> e_delta, e_p{1.0};
  std::optional<double> e_tol;
  std::string e_out = "subheat_out";
  auto* expo = app.add_subcommand("exponent", "Critical exponent estimate");
  add_space_flags(expo, ea);
  expo->add_option("--delta", e_delta, "stability indices")->required();
  expo->add_option("--p", e_p, "integrability exponents");
  expo->add_option("--tolerance", e_tol, "pass tolerance");
  expo->add_option("--out", e_out, "output directory");

  SpaceArgs ua;
  int u_refine = 0;
  std::vector<double> u_delta, u_p{1.0};
  std::optional<double> u_alpha, u_tol;
  std::string u_suite, u_out = "subheat_out";
  auto* suite = app.add_subcommand("suite", "Run one inequality suite");
  add_space_flags(suite, ua);
  suite->add_option("--suite", u_suite, "suite name")->required();
  suite->add_option("--refine", u_refine, "second level for stability");
  suite->add_option("--delta", u_delta, "stability indices")->required();
  suite->add_option("--p", u_p, "integrability exponents");
  suite->add_option("--alpha", u_alpha, "smoothness exponent (coarea, equivalence)");
  suite->add_option("--tolerance", u_tol, "pass tolerance");
  suite->add_option("--out", u_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_invalid;
  }

  try {
    if (*run) {
      const ScenarioConfig c = load_config(config_path);
      const std::filesystem::path dir = out.empty() ? std::filesystem::path(c.output) : std::filesystem::path(out);
      return report_run(run_scenario(c, dir), dir);
    }
    if (*space)
      return cmd_space(sa, space_out);
    if (*kernel)
      return cmd_kernel(ka, k_delta, k_t, k_out, k_binary);
    if (*sub)
      return cmd_subordinator(s_delta, s_t, s_s, s_min, s_max, s_count, s_out);
    if (*semi)
      return cmd_seminorm(na, n_delta, n_p, n_alpha, n_f, n_out);
    if (*expo) {
      const auto c = one_suite(ea, 0, e_delta, e_p, "critical_exponent", std::nullopt, e_tol, e_out);
      const RunResult r = run_scenario(c, e_out);
      std::cout << r.report;
      return r.exit_code;
    }
    if (*suite) {
      const auto c = one_suite(ua, u_refine, u_delta, u_p, u_suite, u_alpha, u_tol, u_out);
      return report_run(run_scenario(c, u_out), u_out);
    }
  } catch (const ConfigInvalid& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return exit_invalid;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_invalid;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_invalid;
  }
  return exit_invalid;
}
