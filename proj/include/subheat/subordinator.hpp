#pragma once

#include <span>
#include <vector>

namespace subheat {

/// How the one-sided stable density is evaluated.
enum class DensityMethod {
  series,             ///< convergent series for standardized argument > 1, Zolotarev integral below
  laplace_inversion,  ///< fixed-Talbot inversion of exp(-t lambda^delta)
  closed_form_half,   ///< exact Levy density, delta = 1/2 only
};

/// Density eta_t(s) of the one-sided delta-stable subordinator, defined by
///   int_0^inf eta_t(s) exp(-s lambda) ds = exp(-t lambda^delta).
class StableDensityEvaluator
{
public:
  explicit StableDensityEvaluator(double delta,
                                  DensityMethod method = DensityMethod::series,
                                  double abs_tol = 1e-10);

  double delta() const noexcept { return delta_; }
  DensityMethod method() const noexcept { return method_; }
  double abs_tol() const noexcept { return abs_tol_; }

  /// eta_t(s); zero for s <= 0 is not returned, s must be positive.
  double density(double t, double s) const;

  /// eta_1(x), the standardized density.
  double standard_density(double x) const;

private:
  double delta_;
  DensityMethod method_;
  double abs_tol_;
};

/// Standardized density by the alternating series
///   eta_1(x) = (1/pi) sum_k (-1)^(k+1) Gamma(k delta + 1) / k! sin(pi k delta) x^(-k delta - 1).
double stable_density_series(double delta, double x);

/// Standardized density by Zolotarev's integral over (0, pi). Non-oscillatory
/// and valid for every x > 0.
double stable_density_integral(double delta, double x);

/// Standardized density by fixed-Talbot inversion of exp(-lambda^delta).
/// Throws AccuracyError when the contour sum overflows (delta near 1, small x).
double stable_density_talbot(double delta, double x, int terms = 32);

/// t / (2 sqrt(pi)) s^(-3/2) exp(-t^2 / (4 s)).
double half_stable_density(double t, double s);

double subordinator_density(double delta, double t, double s);

struct MomentResult
{
  bool divergent = false;     ///< alpha >= delta: the integral is +infinity
  double value = 0.0;         ///< quadrature of int eta_t(s) s^alpha ds
  double reference = 0.0;     ///< Gamma(1 - alpha/delta) / Gamma(1 - alpha) t^(alpha/delta)
  double abs_error = 0.0;     ///< |value - reference|
};

MomentResult subordinator_moment(double delta, double t, double alpha, double abs_tol = 1e-12);

struct LaplaceCheck
{
  double quadrature = 0.0;
  double reference = 0.0;  ///< exp(-t lambda^delta)
  double abs_error = 0.0;
};

/// Quadrature of int eta_t(s) exp(-s lambda) ds against its closed form.
/// Throws AccuracyError when the result misses `abs_tol`.
LaplaceCheck laplace_check(double delta, double t, double lambda, double abs_tol = 1e-8);

/// Quadrature value of int eta_t(s) exp(-s lambda) ds alone.
double subordinated_multiplier_by_quadrature(double delta, double t, double lambda,
                                             double abs_tol = 1e-12);

/// Smallest C with eta_t(s) <= C min(t^(-1/delta), t s^(-1-delta)) on the grid.
double density_bound_constant(double delta, double t, std::span<const double> s_grid);

} // namespace subheat
