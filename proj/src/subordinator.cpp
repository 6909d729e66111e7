#include "subheat/subordinator.hpp"

#include "subheat/errors.hpp"
#include "subheat/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

namespace subheat {

namespace {

void require_delta(double delta)
{
  if (!(delta > 0.0 && delta < 1.0))
    throw DomainError("stability index delta must lie in (0, 1)");
}

// log A(phi) for Zolotarev's function
//   A(phi) = (sin(delta phi) / sin phi)^(1/(1-delta)) sin((1-delta) phi) / sin(delta phi).
double zolotarev_log_a(double delta, double phi)
{
  const double sd = std::sin(delta * phi);
  return std::log(sd / std::sin(phi)) / (1.0 - delta) + std::log(std::sin((1.0 - delta) * phi) / sd);
}

} // namespace

double half_stable_density(double t, double s)
{
  return t / (2.0 * std::sqrt(std::numbers::pi)) * std::pow(s, -1.5) * std::exp(-t * t / (4.0 * s));
}

double stable_density_series(double delta, double x)
{
  require_delta(delta);
  if (!(x > 0.0))
    throw DomainError("density argument must be positive");
  const double log_x = std::log(x);
  double sum = 0.0;
  double previous_magnitude = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= 4000; ++k) {
    const double kd = k * delta;
    const double log_mag = std::lgamma(kd + 1.0) - std::lgamma(k + 1.0) - (kd + 1.0) * log_x;
    const double magnitude = std::exp(log_mag);
    const double term = (k % 2 == 1 ? 1.0 : -1.0) * magnitude * std::sin(std::numbers::pi * kd);
    sum += term;
    if (k > 4 && magnitude < previous_magnitude && magnitude < 1e-18 * std::max(std::abs(sum), 1e-300))
      break;
    previous_magnitude = magnitude;
  }
  return std::max(sum / std::numbers::pi, 0.0);
}

double stable_density_integral(double delta, double x)
{
  require_delta(delta);
  if (!(x > 0.0))
    throw DomainError("density argument must be positive");
  const double a = 1.0 / (1.0 - delta);
  const double a0 = std::pow(delta, delta / (1.0 - delta)) * (1.0 - delta);
  const double big_x = std::pow(x, -delta / (1.0 - delta));
  const double log_prefactor = std::log(delta / ((1.0 - delta) * std::numbers::pi)) - a * std::log(x) - a0 * big_x;
  if (log_prefactor < -745.0 - 10.0)
    return 0.0;

  auto integrand = [&](double phi) {
    const double log_a = zolotarev_log_a(delta, phi);
    const double av = std::exp(log_a);
    if (!std::isfinite(av))
      return 0.0;
    const double v = av * std::exp(-(av - a0) * big_x);
    return std::isfinite(v) ? v : 0.0;
  };

  // The integrand peaks at phi = 0 with width ~ 1/sqrt(X); panels double
  // outward from there so the peak is always resolved.
  const double pi = std::numbers::pi;
  double lo = 0.0;
  double width = std::min(pi / 2.0, 1.0 / std::sqrt(1.0 + big_x));
  double total = 0.0;
  while (lo < pi) {
    const double hi = std::min(pi, lo + width);
    const double panel = integrate(integrand, lo, hi, 1e-11).value;
    total += panel;
    if (hi < pi && panel < 1e-17 * total) {
      const double tail_a = std::exp(zolotarev_log_a(delta, hi));
      if ((tail_a - a0) * big_x > 60.0)
        break;
    }
    lo = hi;
    width *= 2.0;
  }
  if (!(total > 0.0))
    return 0.0;
  return std::exp(log_prefactor + std::log(total));
}

double stable_density_talbot(double delta, double x, int terms)
{
  require_delta(delta);
  if (!(x > 0.0))
    throw DomainError("density argument must be positive");
  using cd = std::complex<double>;
  const double r = 2.0 * terms / (5.0 * x);
  double sum = 0.5 * std::exp(r * x - std::pow(r, delta));
  for (int k = 1; k < terms; ++k) {
    const double theta = k * std::numbers::pi / terms;
    const double cot = std::cos(theta) / std::sin(theta);
    const cd z(r * theta * cot, r * theta);
    const double sigma = theta + (theta * cot - 1.0) * cot;
    sum += (std::exp(z * x - std::pow(z, delta)) * cd(1.0, sigma)).real();
  }
  const double value = r / terms * sum;
  if (!std::isfinite(value))
    throw AccuracyError("fixed Talbot inversion overflowed on the contour", INFINITY);
  return value;
}

double subordinator_density(double delta, double t, double s)
{
  return StableDensityEvaluator(delta).density(t, s);
}

StableDensityEvaluator::StableDensityEvaluator(double delta, DensityMethod method, double abs_tol)
  : delta_(delta)
  , method_(method)
  , abs_tol_(abs_tol)
{
  require_delta(delta);
  if (method == DensityMethod::closed_form_half && delta != 0.5)
    throw DomainError("closed_form_half requires delta = 1/2");
}

double StableDensityEvaluator::standard_density(double x) const
{
  if (!(x > 0.0))
    throw DomainError("density argument must be positive");
  switch (method_) {
  case DensityMethod::closed_form_half: return half_stable_density(1.0, x);
  case DensityMethod::laplace_inversion: return std::max(stable_density_talbot(delta_, x), 0.0);
  case DensityMethod::series: break;
  }
  return x > 1.0 ? stable_density_series(delta_, x) : stable_density_integral(delta_, x);
}

double StableDensityEvaluator::density(double t, double s) const
{
  if (!(t > 0.0) || !(s > 0.0))
    throw DomainError("density needs t > 0 and s > 0");
  const double scale = std::pow(t, -1.0 / delta_);
  return scale * standard_density(s * scale);
}

MomentResult subordinator_moment(double delta, double t, double alpha, double abs_tol)
{
  require_delta(delta);
  if (!(t > 0.0))
    throw DomainError("moment needs t > 0");
  MomentResult out;
  if (alpha >= delta) {
    out.divergent = true;
    return out;
  }
  out.reference = std::tgamma(1.0 - alpha / delta) / std::tgamma(1.0 - alpha) * std::pow(t, alpha / delta);
  const StableDensityEvaluator eval(delta);
  const double center = std::log(t) / delta;
  auto g = [&](double u) {
    const double s = std::exp(u);
    return eval.density(t, s) * std::exp((alpha + 1.0) * u);
  };
  const double tol = abs_tol * std::max(1.0, std::abs(out.reference));
  out.value = integrate_doubling_panels(g, center, tol).value;
  out.abs_error = std::abs(out.value - out.reference);
  return out;
}

double subordinated_multiplier_by_quadrature(double delta, double t, double lambda, double abs_tol)
{
  require_delta(delta);
  if (!(t > 0.0) || lambda < 0.0)
    throw DomainError("laplace transform needs t > 0 and lambda >= 0");
  const StableDensityEvaluator eval(delta);
  double center = std::log(t) / delta;
  if (lambda > 0.0)
    center = std::min(center, -std::log(lambda));
  auto g = [&](double u) {
    const double s = std::exp(u);
    const double damp = std::exp(-lambda * s);
    if (damp == 0.0)
      return 0.0;
    return eval.density(t, s) * damp * s;
  };
  return integrate_doubling_panels(g, center, abs_tol).value;
}

LaplaceCheck laplace_check(double delta, double t, double lambda, double abs_tol)
{
  LaplaceCheck out;
  out.reference = std::exp(-t * std::pow(lambda, delta));
  out.quadrature = subordinated_multiplier_by_quadrature(delta, t, lambda, abs_tol * 1e-3);
  out.abs_error = std::abs(out.quadrature - out.reference);
  if (out.abs_error > abs_tol)
    throw AccuracyError("laplace identity quadrature missed tolerance", out.abs_error);
  return out;
}

double density_bound_constant(double delta, double t, std::span<const double> s_grid)
{
  const StableDensityEvaluator eval(delta);
  double c = 0.0;
  for (double s : s_grid) {
    const double envelope = std::min(std::pow(t, -1.0 / delta), t * std::pow(s, -1.0 - delta));
    c = std::max(c, eval.density(t, s) / envelope);
  }
  return c;
}

} // namespace subheat
