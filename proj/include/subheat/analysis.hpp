#pragma once

#include "subheat/numeric.hpp"
#include "subheat/seminorms.hpp"
#include "subheat/spectral.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace subheat {

inline constexpr double min_r_squared = 0.9;
inline constexpr double level_tolerance = 0.25;

/// Lower part of the resolved window, [t_lo, min(t_hi, 10^decades t_lo)].
/// Two-point energies leave their small-time power law well before the
/// spectral gap takes over, so exponent fits stay near the lattice cut.
TimeWindow exponent_window(const MetricMeasureGraph& graph, const SpectralDecomposition& spec,
                           double delta, double decades = 0.5);

std::vector<double> exponent_grid(const MetricMeasureGraph& graph, const SpectralDecomposition& spec,
                                  double delta, std::size_t count = 24, double decades = 0.5);

/// Short label such as "circle n=256" or "gasket m=6 absorbing".
std::string space_label(const MetricMeasureGraph& graph);

struct InequalityReport
{
  std::string name;
  std::string space;
  double delta = 0.0;
  double p = 1.0;
  int resolution = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  double constant = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  bool inconclusive = false;
  double window_lo = 0.0;
  double window_hi = 0.0;
  std::vector<std::pair<std::string, double>> values;
  std::string note;

  void set(const std::string& key, double value);
  /// Throws std::out_of_range for unknown keys.
  double get(const std::string& key) const;
};

/// Two runs of the same check on successive refinement levels. Each listed
/// key must change by at most `tolerance` relative to the coarse value.
InequalityReport compare_levels(const InequalityReport& coarse, const InequalityReport& fine,
                                std::span<const std::string> keys, double tolerance = level_tolerance);

/// Standard error of the slope of an OLS fit.
double slope_standard_error(const SlopeFit& fit);

struct CriticalExponentReport
{
  double p = 1.0;
  double delta = 0.0;
  double estimate = 0.0;
  std::string witness;               ///< family member attaining the max
  double prediction = 0.0;           ///< point prediction when one exists
  bool has_point_prediction = false;
  double bracket_lo = 0.0;           ///< 1 <= p < 2 only
  double bracket_hi = 0.0;
  double beta_p = 0.0;
  double kappa = 0.0;
  double tolerance = 0.05;
  bool pass = false;
  bool inconclusive = false;
  std::vector<std::pair<std::string, SlopeFit>> fits;
  std::vector<EnergyCurve> curves;
};

/// (1 - 2/p) kappa / d_W + 1/p.
double beta_p(double p, double kappa, double d_W);

/// min{1, (1 - kappa/d_W)/delta} for p = 1, 1/p for p >= 2.
double predicted_critical_exponent(double p, double delta, double kappa, double d_W);

/// Slope of log E_p(t)^(1/p) per member over `t_grid`; the estimate is the
/// largest slope among fits with R^2 >= 0.9. Kappa is read from the graph
/// unless given.
CriticalExponentReport critical_exponent(const SpectralDecomposition& spec,
                                         const MetricMeasureGraph& graph, double delta, double p,
                                         std::span<const TestFunction> family,
                                         std::span<const double> t_grid,
                                         std::optional<double> kappa = std::nullopt,
                                         double tolerance = 0.05);

struct WeakBeReport
{
  double delta = 0.0;
  double kappa_hat = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double constant = 0.0;         ///< max_t H(t) t^(kappa / (delta d_W)) with the reference kappa
  double reference_kappa = 0.0;  ///< analytic kappa when known, else kappa_hat
  SlopeFit fit;
  double fixed_point_residual = 0.0;  ///< kappa(kappa_hat) - kappa_hat
  bool converged = false;             ///< residual within 10% of kappa_hat
  bool nearest_neighbor_argmax = false;
  bool inconclusive = false;
  std::size_t pair_count = 0;
};

/// H(t) = max over pairs and members of |P_t g(x) - P_t g(y)| / d(x, y)^kappa,
/// pairs restricted to d <= max(h, t^(1 / (delta d_W))) so the O(1) oscillation
/// across the whole space does not mask the small-scale bound.
/// kappa = -slope * delta d_W evaluated at kappa = d_W, then checked as a fixed point.
/// All pairs up to 2000 nodes, else `sampled_pairs` seeded pairs.
WeakBeReport weak_be_fit(const SpectralDecomposition& spec, const MetricMeasureGraph& graph,
                         double delta, std::span<const TestFunction> family,
                         std::span<const double> t_grid, std::uint64_t seed = 11,
                         std::size_t sampled_pairs = 100000);

/// Besov norm sup over `t_grid` of t^(-alpha) E_1(t, f) with slicing at up to
/// 64 quantile levels of f. Reports lhs = ||f||, rhs = int ||1_{f > s}|| ds.
InequalityReport coarea_check(const SpectralDecomposition& spec, const MetricMeasureGraph& graph,
                              double delta, const Eigen::VectorXd& f, double alpha,
                              std::span<const double> t_grid, std::size_t levels = 64);

/// ||P_t f - f||_1 against t^alpha times Var(f) (alpha < 1) or W_{delta d_W, 1}(f)
/// (alpha = 1), alpha = alpha_1^# from the graph's kappa.
InequalityReport pseudo_poincare_check(const SpectralDecomposition& spec,
                                       const MetricMeasureGraph& graph, double delta,
                                       const TestFunction& f, std::span<const double> t_grid,
                                       std::span<const double> radii, double tolerance = 0.05);

/// q = p d_H / (d_H - delta d_W), C = max ||f - mean f||_q / W_{delta d_W / p, p}(f).
InequalityReport sobolev_check(const MetricMeasureGraph& graph, double delta, double p,
                               std::span<const TestFunction> family);

struct NodeSet
{
  std::string id;
  std::vector<int> nodes;
};

/// Theta = max over sets of mu(E)^((d_H - delta d_W)/d_H) / sum_{E x E^c} d^(-d_H - delta d_W).
InequalityReport isoperimetric_check(const MetricMeasureGraph& graph, double delta,
                                     std::span<const NodeSet> sets);

/// Balls around the centre node holding about the given fractions of the mass.
std::vector<NodeSet> centred_balls(const MetricMeasureGraph& graph, std::span<const double> fractions);

/// max f - min f <= C W_{delta d_W, 1}(f); needs d_H = delta d_W.
InequalityReport linfty_check(const MetricMeasureGraph& graph, double delta,
                              std::span<const TestFunction> family);

/// ||P_t f||_{p, 1/p} over `t_grid`, the Besov norm taken on `s_grid`.
InequalityReport lp_smoothing_check(const SpectralDecomposition& spec,
                                    const MetricMeasureGraph& graph, double delta, double p,
                                    const TestFunction& f, std::span<const double> t_grid,
                                    std::span<const double> s_grid, double tolerance = 0.05);

/// E(f, f) = sum_k lambda_k^delta <f, phi_k>^2 as a dense matrix Q with
/// E(f, f) = f^T Q f.
Eigen::MatrixXd fractional_form_matrix(const SpectralDecomposition& spec, double delta);

double fractional_form(const SpectralDecomposition& spec, double delta, const Eigen::VectorXd& f);

/// Cap_0(K): min f^T Q f over f = 1 on K, 0 on the boundary.
double capacity(const SpectralDecomposition& spec, const MetricMeasureGraph& graph, double delta,
                std::span<const int> K);

/// Cap_1(K): same with Q + M.
double cap1(const SpectralDecomposition& spec, const MetricMeasureGraph& graph, double delta,
            std::span<const int> K);

/// Dyadic subintervals of the interval (level `depth` and coarser) away from the boundary.
std::vector<NodeSet> dyadic_sets(const MetricMeasureGraph& graph, int depth);

/// Theta = max mu(K)^(1/kappa) / Cap_0(K), C = max ||f||_{2 kappa} / sqrt(E(f, f)).
/// Needs delta < min{1, d_H/d_W} and a killed graph.
InequalityReport capacity_sobolev_check(const SpectralDecomposition& spec,
                                        const MetricMeasureGraph& graph, double delta,
                                        double kappa_cap, std::span<const NodeSet> sets,
                                        std::span<const TestFunction> family);

/// Bracket of ||f||_{1, alpha_1^#} / Var(f); needs delta > 1 - kappa/d_W.
InequalityReport bv_characterization_check(const SpectralDecomposition& spec,
                                           const MetricMeasureGraph& graph, double delta,
                                           std::span<const TestFunction> family,
                                           std::span<const double> t_grid,
                                           std::span<const double> radii);

/// Ratios of the Besov norm to KS, W and Grigor'yan norms over the family:
/// bracket ends "<name>_min" and "<name>_max" for each comparison. The
/// limsup KS ratio is reported but does not enter lhs, rhs or the verdict;
/// only the sup form has an equivalent seminorm.
InequalityReport equivalence_brackets(const SpectralDecomposition& spec,
                                      const MetricMeasureGraph& graph, double delta, double p,
                                      double alpha, std::span<const TestFunction> family,
                                      std::span<const double> t_grid, std::span<const double> radii);

/// Value keys of equivalence_brackets that carry an equivalence claim.
std::vector<std::string> equivalence_keys(double p, double alpha);

struct Level
{
  const MetricMeasureGraph* graph = nullptr;
  const SpectralDecomposition* spec = nullptr;
};

/// Besov value at alpha = 1/p + offset of every non-constant canonical member
/// on the resolved window of each level, coarse to fine. Values are keyed
/// "<id>@<resolution>"; pass when every member increases strictly.
InequalityReport triviality_check(std::span<const Level> levels, double delta, double p,
                                  double offset = 0.2, std::size_t count = 24);

/// W_{delta d_W / p, p}(f) per level with f = make_f(graph); pass when each
/// refinement grows the norm by at least `min_growth` (relative).
InequalityReport brezis_check(std::span<const Level> levels, double delta, double p,
                              const std::function<Eigen::VectorXd(const MetricMeasureGraph&)>& make_f,
                              double min_growth = 0.15);

/// Cap_0 on every set, monotonicity on all nested pairs and subadditivity
/// on all pairs (relative slack 1e-10).
InequalityReport capacity_structure_check(const SpectralDecomposition& spec,
                                          const MetricMeasureGraph& graph, double delta,
                                          std::span<const NodeSet> sets);

} // namespace subheat
