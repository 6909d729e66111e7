#include "oracles.hpp"

#include "subheat/analysis.hpp"
#include "subheat/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace subheat;

namespace {

struct Space
{
  MetricMeasureGraph graph;
  SpectralDecomposition spec;
  std::vector<TestFunction> family;
  explicit Space(MetricMeasureGraph g)
    : graph(std::move(g)), spec(eigendecompose(graph)), family(canonical_family(graph, spec))
  {
  }
};

const TestFunction& member(const Space& s, const std::string& id)
{
  for (const auto& f : s.family)
    if (f.id == id)
      return f;
  throw std::out_of_range(id);
}

std::vector<NodeSet> arcs(const MetricMeasureGraph& g, std::initializer_list<double> fractions)
{
  std::vector<NodeSet> out;
  const int n = static_cast<int>(g.node_count());
  for (double frac : fractions) {
    NodeSet s{"arc_" + std::to_string(frac), {}};
    for (int i = 0; i < static_cast<int>(std::lround(frac * n)); ++i)
      s.nodes.push_back(i);
    out.push_back(s);
  }
  return out;
}

} // namespace

TEST_CASE("predicted exponents")
{
  CHECK(predicted_critical_exponent(1.0, 0.8, 1.0, 2.0) == doctest::Approx(0.625));
  CHECK(predicted_critical_exponent(1.0, 0.4, 1.0, 2.0) == 1.0);
  CHECK(predicted_critical_exponent(2.0, 0.5, 1.0, 2.0) == 0.5);
  CHECK(predicted_critical_exponent(4.0, 0.3, 1.0, 2.0) == 0.25);
  CHECK(beta_p(2.0, 1.0, 2.0) == doctest::Approx(0.5));
  CHECK(beta_p(1.0, 1.0, 2.0) == doctest::Approx(0.5));
}

TEST_CASE("critical exponent on the circle")
{
  const Space s(build_circle(512));
  const auto grid = exponent_grid(s.graph, s.spec, 0.8);
  const auto r = critical_exponent(s.spec, s.graph, 0.8, 1.0, s.family, grid);
  CHECK(r.prediction == doctest::Approx(0.625));
  CHECK(std::abs(r.estimate - 0.625) <= 0.05);
  CHECK(r.pass);
  CHECK(r.curves.size() == s.family.size());

  const auto p2 = critical_exponent(s.spec, s.graph, 0.5, 2.0, s.family, exponent_grid(s.graph, s.spec, 0.5));
  CHECK(std::abs(p2.estimate - 0.5) <= 0.05);
}

TEST_CASE("critical exponent ceiling")
{
  const Space circle(build_circle(256));
  const Space gasket(build_gasket(5));
  for (double p : {1.0, 2.0})
    for (double delta : {0.3, 0.6, 0.9}) {
      const auto a = critical_exponent(circle.spec, circle.graph, delta, p, circle.family,
                                       exponent_grid(circle.graph, circle.spec, delta));
      CHECK(a.estimate <= 1.0 / p + 0.05);
      const auto b = critical_exponent(gasket.spec, gasket.graph, delta, p, gasket.family,
                                       exponent_grid(gasket.graph, gasket.spec, delta), 0.7);
      CHECK(b.estimate <= 1.0 / p + 0.05);
    }
}

TEST_CASE("weak bakry-emery rate")
{
  const Space s(build_circle(512));
  const auto r = weak_be_fit(s.spec, s.graph, 0.5, s.family, exponent_grid(s.graph, s.spec, 0.5));
  CHECK(std::abs(r.fit.slope + 1.0) <= 0.1);
  CHECK(std::abs(r.kappa_hat - 1.0) <= 0.1);
  CHECK(r.reference_kappa == 1.0);
  CHECK(r.converged);
}

TEST_CASE("co-area")
{
  const Space s(build_circle(256));
  const auto grid = resolved_time_grid(s.graph, s.spec, 0.3, 12);
  Eigen::VectorXd ind = Eigen::VectorXd::Zero(256);
  ind.segment(40, 70).setConstant(2.5);
  const auto single = coarea_check(s.spec, s.graph, 0.3, ind, 1.0, grid);
  CHECK(single.lhs == doctest::Approx(single.rhs).epsilon(1e-12));

  std::vector<double> constants;
  for (int n : {256, 512}) {
    const Space t(build_circle(n));
    const auto g = resolved_time_grid(t.graph, t.spec, 0.3, 12);
    const auto r = coarea_check(t.spec, t.graph, 0.3, member(t, "tent").values, 1.0, g);
    CHECK(r.get("layer_cake_error") <= 1e-6);
    CHECK(r.constant >= 0.2);
    CHECK(r.constant <= 5.0);
    constants.push_back(r.constant);
  }
  CHECK(std::abs(constants[1] / constants[0] - 1.0) <= 0.2);

  const auto flat = coarea_check(s.spec, s.graph, 0.3, Eigen::VectorXd::Ones(256), 1.0, grid);
  CHECK(flat.pass);
  CHECK(flat.lhs == 0.0);

  for (const auto& f : s.family) {
    const Eigen::VectorXd shifted = f.values.array() - f.values.minCoeff();
    CHECK(coarea_check(s.spec, s.graph, 0.3, shifted, 1.0, grid).get("layer_cake_error") <= 1e-6);
  }
  CHECK_THROWS_AS(coarea_check(s.spec, s.graph, 0.3, -Eigen::VectorXd::Ones(256), 1.0, grid), DomainError);
}

TEST_CASE("pseudo-poincare")
{
  const Space s(build_circle(512));
  const auto grid = exponent_grid(s.graph, s.spec, 0.8);
  const auto r = pseudo_poincare_check(s.spec, s.graph, 0.8, member(s, "sharp_indicator"), grid,
                                       default_radius_grid(s.graph));
  CHECK(r.get("slope") >= 0.625 - 0.05);
  CHECK(r.pass);
}

TEST_CASE("sobolev")
{
  const Space s(build_circle(256));
  const auto r = sobolev_check(s.graph, 0.25, 1.0, s.family);
  CHECK(r.get("q") == doctest::Approx(2.0));
  CHECK(std::isfinite(r.constant));

  const auto gasket = build_gasket(4);
  const auto family = canonical_family(gasket, eigendecompose(gasket));
  const double d_H = std::log2(3.0), d_W = std::log2(5.0);
  CHECK(sobolev_check(gasket, 0.5, 2.0, family).get("q") ==
        doctest::Approx(2.0 * d_H / (d_H - 0.5 * d_W)));
  CHECK(2.0 * 1.585 / (1.585 - 0.5 * 2.322) == doctest::Approx(7.476).epsilon(1e-3));

  CHECK_THROWS_AS(sobolev_check(s.graph, 0.5, 1.0, s.family), WrongRegime);
}

TEST_CASE("isoperimetric")
{
  const auto g = build_circle(256);
  const auto r = isoperimetric_check(g, 0.25, arcs(g, {0.125, 0.25, 0.5}));
  const double a = r.get("ratio:" + arcs(g, {0.125})[0].id);
  const double b = r.get("ratio:" + arcs(g, {0.25})[0].id);
  const double c = r.get("ratio:" + arcs(g, {0.5})[0].id);
  CHECK(a < b);
  CHECK(b < c);
  CHECK(std::isfinite(r.constant));
  CHECK(r.get("lhs:" + arcs(g, {0.125})[0].id) < r.get("lhs:" + arcs(g, {0.25})[0].id));
  CHECK_THROWS_AS(isoperimetric_check(g, 0.5, arcs(g, {0.25})), WrongRegime);
}

TEST_CASE("l-infinity embedding")
{
  const Space s(build_circle(256));
  std::vector<TestFunction> smooth{member(s, "smoothed_indicator")};
  const auto r = linfty_check(s.graph, 0.5, smooth);
  CHECK(std::isfinite(r.constant));
  std::vector<TestFunction> shifted{{"shifted", smooth[0].values.array() + 3.0}};
  const auto r2 = linfty_check(s.graph, 0.5, shifted);
  CHECK(r2.lhs == doctest::Approx(r.lhs).epsilon(1e-12));
  CHECK(r2.rhs == doctest::Approx(r.rhs).epsilon(1e-12));
  CHECK_THROWS_AS(linfty_check(s.graph, 0.3, smooth), WrongRegime);
}

TEST_CASE("lp smoothing")
{
  const Space s(build_circle(256));
  const auto grid = resolved_time_grid(s.graph, s.spec, 0.5, 12);
  const auto r = lp_smoothing_check(s.spec, s.graph, 0.5, 2.0, member(s, "sharp_indicator"), grid, grid);
  CHECK(r.get("slope") >= -0.55);
  const auto fine = log_space(1e-4, grid.back(), 12);
  const auto phi = lp_smoothing_check(s.spec, s.graph, 0.5, 2.0, member(s, "phi_1"), fine, grid);
  CHECK(std::isfinite(phi.lhs));
  CHECK(phi.get("density_smallest_t") <= 1e-2);
}

TEST_CASE("capacity against a projected-gradient oracle")
{
  const auto g = build_interval(128, BoundaryMode::absorbing);
  const auto spec = eigendecompose(g);
  std::vector<int> middle;
  for (int i : g.active_nodes())
    if (i >= 48 && i < 80)
      middle.push_back(i);
  const double direct = capacity(spec, g, 0.5, middle);
  const double pg = oracle::projected_gradient_capacity(oracle::bochner_form(spec, 0.5), g, middle);
  CHECK(std::abs(direct / pg - 1.0) <= 1e-4);

  CHECK(capacity(spec, g, 0.5, std::vector<int>{}) == 0.0);
  CHECK(cap1(spec, g, 0.5, middle) >= direct);
  CHECK_THROWS_AS(capacity(spec, g, 0.5, g.boundary()), ConfigurationError);
  const auto circle = build_circle(64);
  CHECK_THROWS_AS(capacity(eigendecompose(circle), circle, 0.5, std::vector<int>{3}), ConfigurationError);
}

TEST_CASE("capacity monotone and subadditive")
{
  const auto g = build_interval(64, BoundaryMode::absorbing);
  const auto spec = eigendecompose(g);
  const auto sets = dyadic_sets(g, 3);
  const auto r = capacity_structure_check(spec, g, 0.25, sets);
  CHECK(r.get("nested_pairs") > 0.0);
  CHECK(r.get("monotone_violations") == 0.0);
  CHECK(r.get("subadditive_violations") == 0.0);
  CHECK(r.pass);
}

TEST_CASE("capacity sobolev")
{
  const auto g = build_interval(128, BoundaryMode::absorbing);
  const auto spec = eigendecompose(g);
  const auto family = canonical_family(g, spec);
  const auto sets = dyadic_sets(g, 3);
  const auto r = capacity_sobolev_check(spec, g, 0.25, 2.0, sets, family);
  CHECK(std::isfinite(r.get("theta")));
  CHECK(r.get("theta") > 0.0);

  const auto l2 = capacity_sobolev_check(spec, g, 0.25, 1.0, sets, family);
  for (const auto& f : family) {
    const double norm = std::sqrt(f.values.array().square().matrix().dot(g.measure()));
    CHECK(norm <= l2.get("constant") * std::sqrt(fractional_form(spec, 0.25, f.values)) * (1.0 + 1e-12));
  }
  CHECK_THROWS_AS(capacity_sobolev_check(spec, g, 0.75, 2.0, sets, family), WrongRegime);
}

TEST_CASE("bv characterization")
{
  const Space s(build_circle(256));
  const auto grid = exponent_grid(s.graph, s.spec, 0.8);
  const auto radii = default_radius_grid(s.graph);
  const auto r = bv_characterization_check(s.spec, s.graph, 0.8, s.family, grid, radii);
  CHECK(r.get("ratio_min") > 0.0);
  CHECK(std::isfinite(r.get("ratio_max")));
  CHECK_THROWS_AS(bv_characterization_check(s.spec, s.graph, 0.3, s.family, grid, radii), WrongRegime);
}

TEST_CASE("scaling leaves verdicts unchanged")
{
  const Space s(build_circle(256));
  std::vector<TestFunction> scaled;
  for (const auto& f : s.family)
    scaled.push_back({f.id, 7.0 * f.values});
  const auto grid = exponent_grid(s.graph, s.spec, 0.8);
  const auto a = critical_exponent(s.spec, s.graph, 0.8, 1.0, s.family, grid);
  const auto b = critical_exponent(s.spec, s.graph, 0.8, 1.0, scaled, grid);
  CHECK(a.estimate == doctest::Approx(b.estimate).epsilon(1e-12));
  CHECK(a.pass == b.pass);

  const auto x = sobolev_check(s.graph, 0.25, 1.0, s.family);
  const auto y = sobolev_check(s.graph, 0.25, 1.0, scaled);
  CHECK(x.constant == doctest::Approx(y.constant).epsilon(1e-12));
  CHECK(x.pass == y.pass);
}

TEST_CASE("level comparison")
{
  InequalityReport coarse;
  coarse.name = "x";
  coarse.constant = 1.0;
  coarse.pass = true;
  coarse.set("constant", 1.0);
  InequalityReport fine = coarse;
  fine.set("constant", 1.2);
  const std::vector<std::string> keys{"constant"};
  CHECK(compare_levels(coarse, fine, keys).pass);
  fine.set("constant", 1.3);
  CHECK_FALSE(compare_levels(coarse, fine, keys).pass);
}

TEST_CASE("triviality and brezis signatures")
{
  std::vector<Space> spaces;
  for (int n : {128, 256, 512})
    spaces.emplace_back(build_circle(n));
  std::vector<Level> levels;
  for (const auto& s : spaces)
    levels.push_back({&s.graph, &s.spec});
  CHECK(triviality_check(levels, 0.5, 1.0).pass);

  const auto cosine = [](const MetricMeasureGraph& g) {
    const Eigen::VectorXd s = coordinate(g);
    return Eigen::VectorXd((2.0 * std::numbers::pi * 16.0 * s.array()).cos());
  };
  CHECK(brezis_check(levels, 0.5, 1.0, cosine).pass);
}
