#include "subheat/errors.hpp"
#include "subheat/seminorms.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

using namespace subheat;

namespace {

struct Circle
{
  MetricMeasureGraph graph;
  SpectralDecomposition spec;
  explicit Circle(int n) : graph(build_circle(n)), spec(eigendecompose(graph)) {}
};

Eigen::VectorXd arc(int n, int begin, int end)
{
  Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
  for (int i = begin; i < end; ++i)
    f(i) = 1.0;
  return f;
}

Eigen::VectorXd rotate(const Eigen::VectorXd& f, int shift)
{
  const auto n = f.size();
  Eigen::VectorXd g(n);
  for (Eigen::Index i = 0; i < n; ++i)
    g((i + shift) % n) = f(i);
  return g;
}

} // namespace

TEST_CASE("canonical family")
{
  const Circle c(128);
  const auto family = canonical_family(c.graph, c.spec);
  REQUIRE(family.size() == 6);
  const std::vector<std::string> ids{"smoothed_indicator", "sharp_indicator", "low_mode",
                                     "holder_rough", "tent", "phi_1"};
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(family[i].id == ids[i]);
    CHECK(family[i].values.cwiseAbs().maxCoeff() == doctest::Approx(1.0));
  }

  const auto interval = build_interval(64, BoundaryMode::absorbing);
  const auto killed = canonical_family(interval, eigendecompose(interval));
  for (const auto& f : killed)
    for (int b : interval.boundary())
      CHECK(f.values(b) == 0.0);
}

TEST_CASE("besov energy")
{
  const Circle c(64);
  const auto k = subordinated_kernel(c.spec, 0.5, 0.05);
  CHECK(besov_energy(k, c.spec.measure, Eigen::VectorXd::Constant(64, 3.0), 1.0) == 0.0);

  const Eigen::VectorXd f = arc(64, 10, 30);
  double oracle = 0.0;
  for (int i = 10; i < 30; ++i)
    for (int j = 0; j < 64; ++j)
      if (j < 10 || j >= 30)
        oracle += k.entries(i, j) * c.spec.measure(i) * c.spec.measure(j);
  CHECK(besov_energy(k, c.spec.measure, f, 1.0) == doctest::Approx(2.0 * oracle).epsilon(1e-12));

  const Eigen::VectorXd g = canonical_family(c.graph, c.spec)[2].values;
  CHECK(besov_energy(k, c.spec.measure, g, 2.0) <= besov_energy(k, c.spec.measure, g, 1.0));
  CHECK(besov_energy(k, c.spec.measure, -2.5 * g, 1.5) ==
        doctest::Approx(std::pow(2.5, 1.5) * besov_energy(k, c.spec.measure, g, 1.5)).epsilon(1e-12));
}

TEST_CASE("besov norm")
{
  const Circle c(128);
  const auto family = canonical_family(c.graph, c.spec);
  const auto grid = resolved_time_grid(c.graph, c.spec, 0.5, 12);
  const auto curve = energy_curve(c.spec, family[1], 1.0, 0.5, grid);
  double max_energy = 0.0;
  for (double e : curve.energies)
    max_energy = std::max(max_energy, e);
  CHECK(besov_norm(curve, 0.0).value == doctest::Approx(max_energy));

  const auto above = besov_norm(curve, 1.2);
  CHECK(above.edge_pinned);
  CHECK(above.argmax_t == grid.front());

  const TestFunction constant{"constant", Eigen::VectorXd::Ones(128)};
  CHECK(besov_norm(energy_curve(c.spec, constant, 1.0, 0.5, grid), 0.4).value == 0.0);

  EnergyCurve empty;
  CHECK_THROWS_AS(besov_norm(empty, 0.5), InvalidGrid);
}

TEST_CASE("korevaar-schoen norms")
{
  const Circle c(512);
  const auto radii = default_radius_grid(c.graph);
  Eigen::VectorXd s(512);
  for (int i = 0; i < 512; ++i)
    s(i) = std::sin(2.0 * std::numbers::pi * i / 512.0);
  const auto values = ks_functional(c.graph, s, 1.0, 1.0, radii);
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  CHECK(*hi / *lo <= 1.5);

  const auto rough = canonical_family(c.graph, c.spec)[3].values;
  CHECK(ks_norm(c.graph, rough, 0.5, 2.0, radii, KsMode::limsup_smallest) <=
        ks_norm(c.graph, rough, 0.5, 2.0, radii, KsMode::sup));
  CHECK(ks_norm(c.graph, Eigen::VectorXd::Ones(512), 0.5, 1.0, radii, KsMode::sup) == 0.0);
}

TEST_CASE("fractional sobolev norm")
{
  CHECK(w_norm(build_circle(64), Eigen::VectorXd::Ones(64), 1.0, 1.0) == 0.0);

  std::vector<double> arcs;
  for (int n : {256, 512, 1024})
    arcs.push_back(w_norm(build_circle(n), arc(n, n / 8, n / 2), 0.5, 1.0));
  CHECK(std::abs(arcs[1] / arcs[0] - 1.0) < 0.05);
  CHECK(std::abs(arcs[2] / arcs[1] - 1.0) < 0.05);

  std::vector<double> smooth;
  for (int n : {128, 256, 512, 1024}) {
    Eigen::VectorXd f(n);
    for (int i = 0; i < n; ++i)
      f(i) = std::cos(2.0 * std::numbers::pi * i / n);
    smooth.push_back(w_norm(build_circle(n), f, 1.0, 1.0));
  }
  for (std::size_t i = 1; i < smooth.size(); ++i)
    CHECK(smooth[i] > smooth[i - 1]);
  const double step1 = smooth[1] - smooth[0];
  const double step3 = smooth[3] - smooth[2];
  CHECK(std::abs(step3 / step1 - 1.0) < 0.05);
}

TEST_CASE("grigoryan norms")
{
  const Circle c(128);
  const auto radii = default_radius_grid(c.graph);
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(128);
  CHECK(grigoryan_seminorm(c.graph, one, 0.5, 1.0, radii[2]) == 0.0);
  CHECK(grigoryan_norm(c.graph, one, 0.5, 2.0, 2.0, radii) == 0.0);
  CHECK(grigoryan_norm(c.graph, one, 0.5, 2.0, INFINITY, radii) == 0.0);

  const auto f = canonical_family(c.graph, c.spec)[4].values;
  double sup = 0.0;
  for (double r : radii)
    sup = std::max(sup, grigoryan_seminorm(c.graph, f, 0.5, 1.0, r));
  CHECK(grigoryan_norm(c.graph, f, 0.5, 1.0, INFINITY, radii) == doctest::Approx(sup));
}

TEST_CASE("variation")
{
  std::vector<double> values;
  for (int n : {256, 512, 1024}) {
    const auto g = build_circle(n);
    const auto radii = default_radius_grid(g);
    const auto f = arc(n, n / 4, 3 * n / 4);
    const double var = variation(g, f, radii);
    CHECK(var <= ks_norm(g, f, 1.0, 1.0, radii, KsMode::sup) * (1.0 + 1e-12));
    CHECK(variation(g, Eigen::VectorXd::Ones(n), radii) == 0.0);
    values.push_back(var);
  }
  CHECK(std::abs(values[1] / values[0] - 1.0) < 0.1);
  CHECK(std::abs(values[2] / values[1] - 1.0) < 0.1);

  const auto gasket = build_gasket(5);
  CHECK_THROWS_AS(variation(gasket, Eigen::VectorXd::Ones(static_cast<Eigen::Index>(gasket.node_count())),
                            default_radius_grid(gasket)),
                  ConfigurationError);
}

TEST_CASE("seminorm report invariants")
{
  const Circle c(128);
  const auto family = canonical_family(c.graph, c.spec);
  const auto grid = resolved_time_grid(c.graph, c.spec, 0.5, 12);
  const auto radii = default_radius_grid(c.graph);
  for (const auto& f : family) {
    const auto r = seminorm_report(c.graph, energy_curve(c.spec, f, 1.0, 0.5, grid), f.values, 0.4, radii);
    CHECK(r.ks_limsup <= r.ks_sup);
    for (double v : {r.besov, r.ks_limsup, r.ks_sup, r.w_norm, r.grigoryan_p_inf, r.grigoryan_p_p})
      CHECK(v >= 0.0);
    CHECK(r.window_t_lo == grid.front());
  }
}

TEST_CASE("rotation invariance on the circle")
{
  const Circle c(128);
  const auto f = canonical_family(c.graph, c.spec)[4];
  const TestFunction g{"rotated", rotate(f.values, 37)};
  const auto grid = resolved_time_grid(c.graph, c.spec, 0.5, 8);
  const auto radii = default_radius_grid(c.graph);
  const auto a = seminorm_report(c.graph, energy_curve(c.spec, f, 1.0, 0.5, grid), f.values, 0.4, radii);
  const auto b = seminorm_report(c.graph, energy_curve(c.spec, g, 1.0, 0.5, grid), g.values, 0.4, radii);
  CHECK(std::abs(a.besov - b.besov) <= 1e-10 * a.besov);
  CHECK(std::abs(a.ks_sup - b.ks_sup) <= 1e-10 * a.ks_sup);
  CHECK(std::abs(a.w_norm - b.w_norm) <= 1e-10 * a.w_norm);
  CHECK(std::abs(a.grigoryan_p_p - b.grigoryan_p_p) <= 1e-10 * a.grigoryan_p_p);
}

TEST_CASE("triangle inequality")
{
  const Circle c(128);
  const auto family = canonical_family(c.graph, c.spec);
  const auto radii = default_radius_grid(c.graph);
  const auto k = subordinated_kernel(c.spec, 0.5, 0.02);
  const auto& mu = c.spec.measure;
  for (std::size_t i = 0; i < family.size(); ++i)
    for (std::size_t j = i + 1; j < family.size(); ++j) {
      const Eigen::VectorXd& f = family[i].values;
      const Eigen::VectorXd& g = family[j].values;
      const Eigen::VectorXd h = f + g;
      for (double p : {1.0, 2.0}) {
        const auto root = [&](const Eigen::VectorXd& v) { return std::pow(besov_energy(k, mu, v, p), 1.0 / p); };
        CHECK(root(h) <= root(f) + root(g) + 1e-12);
        CHECK(w_norm(c.graph, h, 0.4, p) <= w_norm(c.graph, f, 0.4, p) + w_norm(c.graph, g, 0.4, p) + 1e-12);
        CHECK(ks_norm(c.graph, h, 0.4, p, radii, KsMode::sup) <=
              ks_norm(c.graph, f, 0.4, p, radii, KsMode::sup) + ks_norm(c.graph, g, 0.4, p, radii, KsMode::sup) + 1e-12);
        CHECK(grigoryan_seminorm(c.graph, h, 0.4, p, radii[3]) <=
              grigoryan_seminorm(c.graph, f, 0.4, p, radii[3]) + grigoryan_seminorm(c.graph, g, 0.4, p, radii[3]) + 1e-12);
      }
    }
}
