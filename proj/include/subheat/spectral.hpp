#pragma once

#include "subheat/space.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace subheat {

/// Eigenpairs of the generator: A phi = lambda M phi with M = diag(mu).
///
/// Columns of `eigenvectors` are orthonormal for <f, g> = sum f_i g_i mu_i.
/// On a killed space boundary rows are zero.
struct SpectralDecomposition
{
  Eigen::VectorXd eigenvalues;   ///< ascending
  Eigen::MatrixXd eigenvectors;  ///< node_count x eigenvalue count
  Eigen::VectorXd measure;
  bool killed = false;
  double form_norm = 0.0;        ///< largest absolute row sum of A

  std::size_t node_count() const noexcept { return static_cast<std::size_t>(eigenvectors.rows()); }
  std::size_t size() const noexcept { return static_cast<std::size_t>(eigenvalues.size()); }
  /// First eigenvalue above zero (index 1 when conservative, 0 when killed).
  double spectral_gap() const;
  /// <f, phi_k> for every k.
  Eigen::VectorXd coefficients(const Eigen::VectorXd& f) const;
  /// sum_k m(lambda_k) <f, phi_k> phi_k.
  Eigen::VectorXd apply(const std::function<double(double)>& multiplier,
                        const Eigen::VectorXd& f) const;
};

inline constexpr std::size_t dense_node_budget = 12000;

SpectralDecomposition eigendecompose(const MetricMeasureGraph& graph,
                                     std::size_t budget = dense_node_budget);

/// max_k ||A phi_k - lambda_k M phi_k||_inf / ||A||, over active nodes.
double eigen_residual(const MetricMeasureGraph& graph, const SpectralDecomposition& spec);

/// Dense symmetric kernel with respect to mu, tagged with (t, delta).
/// delta = 1 is the base heat semigroup.
struct KernelMatrix
{
  double t = 0.0;
  double delta = 1.0;
  bool stochastic = false;
  Eigen::MatrixXd entries;

  std::size_t node_count() const noexcept { return static_cast<std::size_t>(entries.rows()); }
  /// sum_j p(i, j) mu_j for every i.
  Eigen::VectorXd row_integrals(const Eigen::VectorXd& measure) const;
  /// (P f)(i) = sum_j p(i, j) f_j mu_j.
  Eigen::VectorXd apply(const Eigen::VectorXd& f, const Eigen::VectorXd& measure) const;
};

/// Entries below this are treated as floating-point noise and clipped to 0.
inline constexpr double kernel_clip_tolerance = 1e-10;

/// sum_k m(lambda_k) phi_k(i) phi_k(j), symmetrized and clipped.
KernelMatrix kernel_from_multipliers(const SpectralDecomposition& spec,
                                     std::span<const double> multipliers,
                                     double t, double delta);

KernelMatrix heat_kernel(const SpectralDecomposition& spec, double t);
KernelMatrix subordinated_kernel(const SpectralDecomposition& spec, double delta, double t);
/// Same kernel, with every multiplier obtained by quadrature of
/// int eta_t(s) exp(-s lambda) ds instead of the closed form.
KernelMatrix subordinated_kernel_by_integral(const SpectralDecomposition& spec, double delta,
                                             double t, double abs_tol = 1e-12);

/// mu-weighted composition (K1 o K2)(i, j) = sum_l K1(i, l) K2(l, j) mu_l.
Eigen::MatrixXd compose(const KernelMatrix& a, const KernelMatrix& b, const Eigen::VectorXd& measure);

/// Operator (-L)^delta. `kernel` is symmetric; the action on f is
/// kernel * (mu .* f), i.e. the matrix `operator_matrix()`.
struct OperatorMatrix
{
  double delta = 1.0;
  Eigen::MatrixXd kernel;
  Eigen::VectorXd measure;

  Eigen::MatrixXd operator_matrix() const;
  Eigen::VectorXd apply(const Eigen::VectorXd& f) const;
};

OperatorMatrix fractional_laplacian(const SpectralDecomposition& spec, double delta);

/// (delta / Gamma(1 - delta)) int_0^inf t^(-delta-1) (1 - exp(-lambda t)) dt by
/// quadrature, split at t = 1.
double bochner_power(double lambda, double delta, double abs_tol = 1e-13);

OperatorMatrix fractional_laplacian_bochner(const SpectralDecomposition& spec, double delta,
                                            double abs_tol = 1e-13);

/// M^{-1} A on active nodes, zero on boundary rows and columns.
Eigen::MatrixXd generator_matrix(const MetricMeasureGraph& graph);

struct TimeWindow
{
  double lo = 0.0;
  double hi = 0.0;
};

/// Lattice multiple k in the lower time cut: 8 on circle and interval, 1 on
/// the fractal graphs where a single level-m cell is already self-similar.
double lattice_factor(const MetricMeasureGraph& graph);

/// [(k h)^(delta d_W), lambda_1^(-delta)]: between lattice scale and spectral-gap
/// saturation. Throws InvalidGrid when empty.
TimeWindow resolved_time_window(const MetricMeasureGraph& graph,
                                const SpectralDecomposition& spec, double delta);

/// `count` log-spaced times across the resolved window.
std::vector<double> resolved_time_grid(const MetricMeasureGraph& graph,
                                       const SpectralDecomposition& spec, double delta,
                                       std::size_t count = 24);

/// mu-averaged diagonal sum_x p_t(x, x) mu_x / mu(X) = sum_k m(lambda_k) / mu(X).
double mean_on_diagonal(const SpectralDecomposition& spec, double delta, double t);

/// Two-sided bound
///   c5 V(t) Phi(c d / T(t)) <= p_t(x, y) <= c3 V(t) Phi(c d / T(t)),
/// V(t) = t^(-d_H / (delta d_W)), T(t) = t^(1 / (delta d_W)).
/// Phi(s) = (1 + s)^(-d_H - delta d_W) for delta < 1 and
/// exp(-s^(d_W / (d_W - 1))) for delta = 1.
struct BoundFitReport
{
  double delta = 1.0;
  double profile_scale = 1.0;  ///< c (the shared c4 = c6)
  double c3 = 0.0;
  double c4 = 0.0;
  double c5 = 0.0;
  double c6 = 0.0;
  double diagonal_slope = 0.0;
  double predicted_slope = 0.0;
  double r_squared = 0.0;
  double window_lo = 0.0;
  double window_hi = 0.0;
  double coverage = 0.0;  ///< fraction of held-out triples inside the envelopes
  std::size_t fit_samples = 0;
  std::size_t check_samples = 0;
};

BoundFitReport kernel_bound_fit(const SpectralDecomposition& spec, const MetricMeasureGraph& graph,
                                double delta, std::span<const double> t_grid,
                                std::uint64_t seed = 7);

struct FractionalEnergy
{
  double spectral = 0.0;  ///< sum_k lambda_k^delta <f, phi_k>^2
  double metric = 0.0;    ///< sum_{i != j} |f_i - f_j|^2 d^(-d_H - delta d_W) mu_i mu_j
  double ratio = 0.0;     ///< spectral / metric; 0 when both vanish
};

FractionalEnergy fractional_energy(const SpectralDecomposition& spec,
                                   const MetricMeasureGraph& graph, double delta,
                                   const Eigen::VectorXd& f);

/// "row,col,value" lines, 17 significant digits.
void write_kernel_csv(const KernelMatrix& kernel, const std::string& path);
/// Header {uint64 node_count, double t, double delta}, then column-major doubles.
void write_kernel_binary(const KernelMatrix& kernel, const std::string& path);
KernelMatrix read_kernel_binary(const std::string& path);

} // namespace subheat
