#include "subheat/errors.hpp"
#include "subheat/spectral.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

using namespace subheat;

namespace {

double sup_rel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
  return (a - b).cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff();
}

Eigen::MatrixXd poisson_kernel(const MetricMeasureGraph& g, double t)
{
  const double r = std::exp(-2.0 * std::numbers::pi * t);
  const int n = static_cast<int>(g.node_count());
  Eigen::MatrixXd p(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      p(i, j) = (1.0 - r * r) /
                (1.0 - 2.0 * r * std::cos(2.0 * std::numbers::pi * g.distance(i, j)) + r * r);
  return p;
}

} // namespace

TEST_CASE("eigendecomposition invariants")
{
  const auto g = build_circle(64);
  const auto spec = eigendecompose(g);
  CHECK(std::abs(spec.eigenvalues(0)) < 1e-9);
  const double lambda1 = 4.0 * 64 * 64 * std::pow(std::sin(std::numbers::pi / 64), 2);
  CHECK(spec.eigenvalues(1) == doctest::Approx(lambda1).epsilon(1e-10));
  CHECK(spec.eigenvalues(2) == doctest::Approx(lambda1).epsilon(1e-10));
  CHECK(lambda1 == doctest::Approx(39.447).epsilon(1e-4));
  CHECK(eigen_residual(g, spec) <= 1e-8);

  const Eigen::MatrixXd gram = spec.eigenvectors.transpose() * spec.measure.asDiagonal() * spec.eigenvectors;
  CHECK((gram - Eigen::MatrixXd::Identity(64, 64)).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((spec.eigenvectors.col(0).array() - spec.eigenvectors(0, 0)).abs().maxCoeff() < 1e-10);
  CHECK_FALSE(spec.killed);
}

TEST_CASE("killed spectrum")
{
  const auto g = build_interval(64, BoundaryMode::absorbing);
  const auto spec = eigendecompose(g);
  CHECK(spec.killed);
  CHECK(spec.eigenvalues(0) > 0.0);
  CHECK(std::abs(spec.eigenvalues(0) / (std::numbers::pi * std::numbers::pi) - 1.0) < 0.03);
  CHECK(eigendecompose(build_interval(32, BoundaryMode::absorbing)).eigenvalues.minCoeff() > 0.0);
}

TEST_CASE("dense budget")
{
  CHECK_THROWS_AS(eigendecompose(build_circle(64), 32), ResourceError);
}

TEST_CASE("heat kernel")
{
  const auto g = build_circle(256);
  const auto spec = eigendecompose(g);
  for (double t : {1e-3, 0.05, 1.0}) {
    const auto k = heat_kernel(spec, t);
    CHECK((k.row_integrals(spec.measure).array() - 1.0).abs().maxCoeff() < 1e-8);
    CHECK((k.entries - k.entries.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(k.entries.minCoeff() >= 0.0);
  }
  const double gaussian = 1.0 / std::sqrt(4.0 * std::numbers::pi * 1e-3);
  CHECK(std::abs(heat_kernel(spec, 1e-3).entries(0, 0) / gaussian - 1.0) < 0.03);
  CHECK((heat_kernel(spec, 5.0).entries.array() - 1.0).abs().maxCoeff() < 1e-8);
}

TEST_CASE("semigroup property")
{
  const auto g = build_circle(48);
  const auto spec = eigendecompose(g);
  const auto sum = heat_kernel(spec, 0.03);
  const Eigen::MatrixXd composed = compose(heat_kernel(spec, 0.01), heat_kernel(spec, 0.02), spec.measure);
  CHECK((composed - sum.entries).cwiseAbs().maxCoeff() < 1e-8);

  const Eigen::MatrixXd sub = compose(subordinated_kernel(spec, 0.4, 0.1),
                                      subordinated_kernel(spec, 0.4, 0.2), spec.measure);
  CHECK((sub - subordinated_kernel(spec, 0.4, 0.3).entries).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("subordinated kernel")
{
  const auto g = build_circle(256);
  const auto spec = eigendecompose(g);
  const auto k = subordinated_kernel(spec, 0.5, 0.05);
  CHECK(sup_rel(k.entries, poisson_kernel(g, 0.05)) < 0.01);

  const Eigen::VectorXd phi = spec.eigenvectors.col(3);
  const Eigen::VectorXd image = k.apply(phi, spec.measure);
  CHECK((image - std::exp(-0.05 * std::sqrt(spec.eigenvalues(3))) * phi).cwiseAbs().maxCoeff() < 1e-10);

  CHECK((subordinated_kernel(spec, 0.999, 0.1).entries - heat_kernel(spec, 0.1).entries)
          .cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("cross-route kernels")
{
  const auto g = build_circle(64);
  const auto spec = eigendecompose(g);
  for (double delta : {0.3, 0.5})
    for (double t : {0.1, 1.0}) {
      const auto a = subordinated_kernel(spec, delta, t);
      const auto b = subordinated_kernel_by_integral(spec, delta, t);
      CHECK(sup_rel(b.entries, a.entries) <= 1e-3);
      CHECK((b.row_integrals(spec.measure).array() - 1.0).abs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("fractional laplacian")
{
  const auto g = build_circle(64);
  const auto spec = eigendecompose(g);
  const auto lap = fractional_laplacian(spec, 0.5);
  const auto bochner = fractional_laplacian_bochner(spec, 0.5);
  CHECK((lap.operator_matrix() - bochner.operator_matrix()).cwiseAbs().maxCoeff() <= 1e-4);

  const Eigen::VectorXd one = Eigen::VectorXd::Ones(64);
  CHECK(lap.apply(one).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(bochner.apply(one).cwiseAbs().maxCoeff() < 1e-8);

  const Eigen::VectorXd phi = spec.eigenvectors.col(1);
  CHECK((lap.apply(phi) - std::sqrt(spec.eigenvalues(1)) * phi).cwiseAbs().maxCoeff() < 1e-8);

  const Eigen::MatrixXd gen = fractional_laplacian(spec, 1.0).operator_matrix();
  CHECK((gen - generator_matrix(g)).cwiseAbs().maxCoeff() < 1e-8 * generator_matrix(g).cwiseAbs().maxCoeff());

  const auto small = eigendecompose(build_circle(32));
  const Eigen::VectorXd phi1 = small.eigenvectors.col(1);
  CHECK((fractional_laplacian_bochner(small, 0.5).apply(phi1) - std::sqrt(small.eigenvalues(1)) * phi1)
          .cwiseAbs().maxCoeff() < 1e-4);

  const auto killed = eigendecompose(build_interval(32, BoundaryMode::absorbing));
  CHECK((fractional_laplacian(killed, 0.7).operator_matrix() -
         fractional_laplacian_bochner(killed, 0.7).operator_matrix()).cwiseAbs().maxCoeff() <= 1e-4);
}

TEST_CASE("bochner power")
{
  for (double lambda : {0.0, 0.5, 3.0, 400.0})
    for (double delta : {0.2, 0.5, 0.8})
      CHECK(bochner_power(lambda, delta) == doctest::Approx(std::pow(lambda, delta)).epsilon(1e-10));
}

TEST_CASE("contractivity")
{
  const auto g = build_circle(128);
  const auto spec = eigendecompose(g);
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto k = subordinated_kernel(spec, 0.6, 0.02);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd f(128);
    for (auto& v : f)
      v = u(rng);
    CHECK(k.apply(f, spec.measure).cwiseAbs().maxCoeff() <= f.cwiseAbs().maxCoeff() + 1e-12);
  }
}

TEST_CASE("resolved window")
{
  const auto g = build_circle(512);
  const auto spec = eigendecompose(g);
  const auto w = resolved_time_window(g, spec, 0.5);
  CHECK(w.lo == doctest::Approx(std::pow(8.0 / 512.0, 1.0)));
  CHECK(w.hi == doctest::Approx(1.0 / std::sqrt(spec.eigenvalues(1))));
  CHECK(resolved_time_grid(g, spec, 0.5).size() == 24);
  CHECK(lattice_factor(build_gasket(2)) == 1.0);

  const auto tiny = build_circle(8);
  CHECK_THROWS_AS(resolved_time_window(tiny, eigendecompose(tiny), 0.5), InvalidGrid);
}

TEST_CASE("kernel bound fit")
{
  const auto g = build_circle(512);
  const auto spec = eigendecompose(g);
  const auto r = kernel_bound_fit(spec, g, 0.5, resolved_time_grid(g, spec, 0.5));
  CHECK(std::abs(r.diagonal_slope + 1.0) < 0.05);
  CHECK(r.predicted_slope == doctest::Approx(-1.0));
  CHECK(r.c5 <= r.c3);
  CHECK(r.coverage >= 0.99);

  const auto gasket = build_gasket(6);
  const auto gs = eigendecompose(gasket);
  const auto base = kernel_bound_fit(gs, gasket, 1.0, resolved_time_grid(gasket, gs, 1.0));
  CHECK(std::abs(base.diagonal_slope + std::log2(3.0) / std::log2(5.0)) < 0.05);
}

TEST_CASE("fractional energy")
{
  const auto g = build_circle(256);
  const auto spec = eigendecompose(g);
  const auto zero = fractional_energy(spec, g, 0.5, Eigen::VectorXd::Ones(256));
  CHECK(std::abs(zero.spectral) < 1e-12);
  CHECK(zero.metric == 0.0);

  const Eigen::VectorXd phi = spec.eigenvectors.col(1);
  CHECK(fractional_energy(spec, g, 0.5, phi).spectral ==
        doctest::Approx(std::sqrt(spec.eigenvalues(1))).epsilon(1e-10));

  Eigen::VectorXd half(256);
  for (int i = 0; i < 256; ++i)
    half(i) = i < 128 ? 1.0 : 0.0;
  const Eigen::VectorXd smooth = heat_kernel(spec, 0.01).apply(half, spec.measure);
  const double ratio = fractional_energy(spec, g, 0.5, smooth).ratio;
  CHECK(ratio >= 0.1);
  CHECK(ratio <= 10.0);
}

TEST_CASE("kernel binary round trip")
{
  const auto spec = eigendecompose(build_circle(16));
  const auto k = subordinated_kernel(spec, 0.5, 0.1);
  const auto path = (std::filesystem::temp_directory_path() / "subheat_kernel_test.bin").string();
  write_kernel_binary(k, path);
  const auto back = read_kernel_binary(path);
  std::filesystem::remove(path);
  CHECK(back.t == k.t);
  CHECK(back.delta == k.delta);
  CHECK(back.entries == k.entries);
}
