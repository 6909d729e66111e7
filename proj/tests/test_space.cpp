#include "subheat/errors.hpp"
#include "subheat/space.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

using namespace subheat;

namespace {

void check_triangle(const MetricMeasureGraph& g, std::uint32_t seed)
{
  std::mt19937 rng(seed);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(g.node_count()) - 1);
  for (int k = 0; k < 10000; ++k) {
    const int a = pick(rng), b = pick(rng), c = pick(rng);
    REQUIRE(g.distance(a, c) <= g.distance(a, b) + g.distance(b, c) + 1e-15);
  }
}

void check_ball_monotone(const MetricMeasureGraph& g)
{
  const std::vector<double> radii{0.05, 0.1, 0.2, 0.4, 0.8};
  for (int x = 0; x < static_cast<int>(g.node_count()); x += 7) {
    std::vector<int> previous;
    for (double r : radii) {
      const auto b = ball(g, x, r);
      REQUIRE(std::includes(b.begin(), b.end(), previous.begin(), previous.end()));
      previous = b;
    }
  }
}

} // namespace

TEST_CASE("circle metric and measure")
{
  const auto g = build_circle(8);
  CHECK(g.distance(0, 4) == doctest::Approx(0.5));
  CHECK(g.distance(1, 7) == doctest::Approx(0.25));
  CHECK(g.total_mass() == doctest::Approx(1.0));
  CHECK_FALSE(g.killed());
  CHECK(g.geometry().d_H == 1.0);
  CHECK(g.geometry().d_W == 2.0);
  REQUIRE(g.geometry().kappa.has_value());
  CHECK(*g.geometry().kappa == 1.0);
}

TEST_CASE("circle quadratic form of the first Fourier mode")
{
  const int n = 64;
  const auto g = build_circle(n);
  std::vector<double> f(n);
  for (int i = 0; i < n; ++i)
    f[static_cast<std::size_t>(i)] = std::sqrt(2.0) * std::cos(2.0 * std::numbers::pi * i / n);
  const double exact = 4.0 * n * n * std::pow(std::sin(std::numbers::pi / n), 2);
  CHECK(g.quadratic_form(f) == doctest::Approx(exact).epsilon(1e-10));
  CHECK(std::abs(g.quadratic_form(f) / (4.0 * std::numbers::pi * std::numbers::pi) - 1.0) < 0.02);
}

TEST_CASE("constants have zero energy on conservative spaces")
{
  for (const auto& g : {build_circle(32), build_interval(32, BoundaryMode::reflecting),
                        build_gasket(3), build_vicsek(2)}) {
    const std::vector<double> one(g.node_count(), 1.0);
    CHECK(std::abs(g.quadratic_form(one)) < 1e-9);
  }
  const auto killed = build_interval(32, BoundaryMode::absorbing);
  CHECK(killed.killed());
  const std::vector<double> one(killed.node_count(), 1.0);
  CHECK(killed.quadratic_form(one) > 0.0);
}

TEST_CASE("gasket structure")
{
  const auto g1 = build_gasket(1);
  CHECK(g1.node_count() == 6);
  CHECK(g1.edges().size() == 9);
  CHECK(build_gasket(2).total_mass() == doctest::Approx(1.0));
  CHECK(build_gasket(4).node_count() == 3 * (81 + 1) / 2);
  CHECK(g1.geometry().d_H == doctest::Approx(std::log(3.0) / std::log(2.0)));
  CHECK(g1.geometry().d_W == doctest::Approx(std::log(5.0) / std::log(2.0)));
  CHECK_FALSE(g1.geometry().kappa.has_value());
}

TEST_CASE("vicsek structure")
{
  CHECK(build_vicsek(1).node_count() == 16);
  const auto g = build_vicsek(3);
  const auto c = g.conductance_matrix();
  CHECK((Eigen::MatrixXd(c) - Eigen::MatrixXd(c).transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.total_mass() == doctest::Approx(1.0));
}

TEST_CASE("metric triangle inequality")
{
  check_triangle(build_circle(97), 1);
  check_triangle(build_interval(64, BoundaryMode::absorbing), 2);
  check_triangle(build_gasket(4), 3);
  check_triangle(build_vicsek(3), 4);
}

TEST_CASE("balls")
{
  const auto g = build_circle(8);
  CHECK(ball(g, 0, 0.3) == std::vector<int>{0, 1, 2, 6, 7});
  CHECK(ball(g, 3, 2.0).size() == 8);

  const auto gasket = build_gasket(3);
  const auto b = ball(gasket, 0, 0.5);
  std::size_t brute = 0;
  for (int y = 0; y < static_cast<int>(gasket.node_count()); ++y)
    brute += gasket.distance(0, y) < 0.5 ? 1 : 0;
  CHECK(b.size() == brute);

  check_ball_monotone(build_circle(64));
  check_ball_monotone(gasket);
  check_ball_monotone(build_vicsek(2));
}

TEST_CASE("ahlfors regularity fits")
{
  const auto circle = build_circle(256);
  CHECK(std::abs(ahlfors_fit(circle, default_radius_grid(circle)).d_H - 1.0) < 0.02);

  const auto g5 = build_gasket(5);
  CHECK(std::abs(ahlfors_fit(g5, default_radius_grid(g5)).d_H - std::log2(3.0)) < 0.1);

  const auto v4 = build_vicsek(4);
  const auto fit = ahlfors_fit(v4, default_radius_grid(v4));
  CHECK(std::abs(fit.d_H - std::log(5.0) / std::log(3.0)) < 0.1);
  CHECK(std::isfinite(fit.c2 / fit.c1));
  CHECK(fit.c1 > 0.0);
}

TEST_CASE("builder domain errors")
{
  CHECK_THROWS_AS(build_circle(2), InvalidResolution);
  CHECK_THROWS_AS(build_gasket(-1), InvalidResolution);
  CHECK_THROWS_AS(build_vicsek(20), Error);
}

TEST_CASE("descriptor round trip")
{
  const auto g = build_interval(16, BoundaryMode::absorbing);
  const auto text = descriptor_to_json(g.descriptor());
  CHECK(descriptor_from_json(text) == g.descriptor());
  const auto rebuilt = build_space(descriptor_from_json(text));
  CHECK(rebuilt.node_count() == g.node_count());
  CHECK(rebuilt.boundary() == g.boundary());
}
