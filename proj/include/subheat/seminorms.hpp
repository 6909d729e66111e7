#pragma once

#include "subheat/spectral.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace subheat {

struct TestFunction
{
  std::string id;
  Eigen::VectorXd values;
};

/// The six canonical members, each scaled to sup norm 1 and zero on the
/// boundary of a killed space: smoothed_indicator, sharp_indicator,
/// low_mode, holder_rough, tent, phi_1. On gasket and vicsek the sharp
/// indicator is that of a level-1 corner cell, which meets the rest of the
/// space in finitely many points.
std::vector<TestFunction> canonical_family(const MetricMeasureGraph& graph,
                                           const SpectralDecomposition& spec,
                                           std::uint64_t seed = 1);

/// Scalar coordinate used to cut half-spaces and centre tents: arc
/// position on circle and interval, first embedding coordinate otherwise.
Eigen::VectorXd coordinate(const MetricMeasureGraph& graph);

/// Harmonic function with value 1 at the first corner of the level-0 cell and 0
/// at the others; only defined for gasket and vicsek.
Eigen::VectorXd corner_harmonic(const MetricMeasureGraph& graph);

/// E_p(t, f) = sum_ij |f_i - f_j|^p p(i, j) mu_i mu_j.
double besov_energy(const KernelMatrix& kernel, const Eigen::VectorXd& measure,
                    const Eigen::VectorXd& f, double p);

struct EnergyCurve
{
  std::string function_id;
  double p = 1.0;
  double delta = 1.0;
  std::vector<double> grid;
  std::vector<double> energies;
};

/// One curve per function, sharing a kernel per grid time. delta = 1 uses
/// the base heat kernel.
std::vector<EnergyCurve> energy_curves(const SpectralDecomposition& spec,
                                       std::span<const TestFunction> family, double p,
                                       double delta, std::span<const double> t_grid);

EnergyCurve energy_curve(const SpectralDecomposition& spec, const TestFunction& f, double p,
                         double delta, std::span<const double> t_grid);

struct BesovValue
{
  double value = 0.0;
  double argmax_t = 0.0;
  bool edge_pinned = false;  ///< argmax sits at the left end of the grid
};

/// max over the curve's grid of t^(-alpha) E_p(t)^(1/p).
BesovValue besov_norm(const EnergyCurve& curve, double alpha);

/// t^(-alpha) E_p(t)^(1/p) at every grid point.
std::vector<double> besov_profile(const EnergyCurve& curve, double alpha);

enum class KsMode { limsup_smallest, sup };

/// sum_x mu_x sum_{y in B(x, r)} |f_x - f_y|^p mu_y / (r^(lambda p) mu(B(x, r)))
/// for every radius. The p-th root is not taken.
std::vector<double> ks_functional(const MetricMeasureGraph& graph, const Eigen::VectorXd& f,
                                  double lambda, double p, std::span<const double> radii);

/// (KS functional)^(1/p), maximized over the 3 smallest radii or over all.
double ks_norm(const MetricMeasureGraph& graph, const Eigen::VectorXd& f, double lambda, double p,
               std::span<const double> radii, KsMode mode);

/// (sum_{i != j} |f_i - f_j|^p d(i, j)^(-d_H - lambda p) mu_i mu_j)^(1/p).
double w_norm(const MetricMeasureGraph& graph, const Eigen::VectorXd& f, double lambda, double p);

/// N_p^alpha(f, r) = r^(-alpha - d_H/p) (sum_{d(i,j) < r} |f_i - f_j|^p mu_i mu_j)^(1/p).
double grigoryan_seminorm(const MetricMeasureGraph& graph, const Eigen::VectorXd& f, double alpha,
                          double p, double r);

/// N^alpha_{p,q}: q = infinity takes the max over radii, q = p integrates
/// N^q dr / r with the trapezoid rule in log r.
double grigoryan_norm(const MetricMeasureGraph& graph, const Eigen::VectorXd& f, double alpha,
                      double p, double q, std::span<const double> radii);

/// min over the 3 smallest radii of the KS functional with lambda = d_W - kappa, p = 1.
/// Uses the graph's kappa when `kappa` is not positive; throws
/// ConfigurationError when neither is available.
double variation(const MetricMeasureGraph& graph, const Eigen::VectorXd& f,
                 std::span<const double> radii, double kappa = 0.0);

struct SeminormReport
{
  std::string function_id;
  double besov = 0.0;
  double besov_argmax_t = 0.0;
  bool besov_edge_pinned = false;
  double ks_limsup = 0.0;
  double ks_sup = 0.0;
  double w_norm = 0.0;
  double grigoryan_p_inf = 0.0;
  double grigoryan_p_p = 0.0;
  double window_t_lo = 0.0;
  double window_t_hi = 0.0;
  double window_r_lo = 0.0;
  double window_r_hi = 0.0;
};

/// All seminorms of f for given (p, alpha, delta) on the resolved windows:
/// KS with lambda = alpha delta d_W, W with lambda = delta d_W / p,
/// N^{alpha delta d_W}_{p,inf} and N^{delta d_W / p}_{p,p}.
SeminormReport seminorm_report(const MetricMeasureGraph& graph, const EnergyCurve& curve,
                               const Eigen::VectorXd& f, double alpha,
                               std::span<const double> radii);

} // namespace subheat
