#include "subheat/spectral.hpp"

#include "subheat/errors.hpp"
#include "subheat/numeric.hpp"
#include "subheat/parallel.hpp"
#include "subheat/quadrature.hpp"
#include "subheat/subordinator.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>

namespace subheat {

double SpectralDecomposition::spectral_gap() const
{
  if (size() == 0)
    throw InvariantViolation("spectral_gap: empty decomposition");
  if (killed)
    return eigenvalues(0);
  if (size() < 2)
    throw InvariantViolation("spectral_gap: single eigenvalue");
  return eigenvalues(1);
}

Eigen::VectorXd SpectralDecomposition::coefficients(const Eigen::VectorXd& f) const
{
  if (static_cast<std::size_t>(f.size()) != node_count())
    throw DomainError("coefficients: function size does not match node count");
  return eigenvectors.transpose() * measure.cwiseProduct(f);
}

Eigen::VectorXd SpectralDecomposition::apply(const std::function<double(double)>& multiplier,
                                             const Eigen::VectorXd& f) const
{
  Eigen::VectorXd c = coefficients(f);
  for (Eigen::Index k = 0; k < c.size(); ++k)
    c(k) *= multiplier(eigenvalues(k));
  return eigenvectors * c;
}

SpectralDecomposition eigendecompose(const MetricMeasureGraph& graph, std::size_t budget)
{
  const std::size_t n = graph.node_count();
  if (n > budget)
    throw ResourceError("eigendecompose: " + std::to_string(n) + " nodes exceed the dense budget of " +
                        std::to_string(budget));
  const auto& active = graph.active_nodes();
  const auto na = static_cast<Eigen::Index>(active.size());
  if (na == 0)
    throw InvariantViolation("eigendecompose: no active nodes");

  const Eigen::MatrixXd full = graph.form_matrix();
  if ((full - full.transpose()).cwiseAbs().maxCoeff() != 0.0)
    throw InvariantViolation("eigendecompose: form matrix is not symmetric");

  Eigen::VectorXd scale(na);
  for (Eigen::Index a = 0; a < na; ++a)
    scale(a) = 1.0 / std::sqrt(graph.measure()(active[static_cast<std::size_t>(a)]));
  Eigen::MatrixXd b(na, na);
  for (Eigen::Index j = 0; j < na; ++j)
    for (Eigen::Index i = 0; i < na; ++i)
      b(i, j) = scale(i) * full(active[static_cast<std::size_t>(i)], active[static_cast<std::size_t>(j)]) * scale(j);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(b);
  if (solver.info() != Eigen::Success)
    throw InvariantViolation("eigendecompose: eigensolver did not converge");

  SpectralDecomposition spec;
  spec.killed = graph.killed();
  spec.measure = graph.measure();
  spec.form_norm = full.cwiseAbs().rowwise().sum().maxCoeff();
  spec.eigenvalues = solver.eigenvalues();
  spec.eigenvectors = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), na);
  const Eigen::MatrixXd& v = solver.eigenvectors();
  for (Eigen::Index a = 0; a < na; ++a)
    spec.eigenvectors.row(active[static_cast<std::size_t>(a)]) = scale(a) * v.row(a);

  const double top = std::abs(spec.eigenvalues(na - 1));
  if (!spec.killed) {
    if (std::abs(spec.eigenvalues(0)) > 1e-9 * top)
      throw InvariantViolation("eigendecompose: ground eigenvalue of a conservative form is not 0");
    spec.eigenvalues(0) = 0.0;
    const double c = 1.0 / std::sqrt(graph.total_mass());
    const double sign = spec.eigenvectors.col(0).sum() < 0.0 ? -1.0 : 1.0;
    spec.eigenvectors.col(0).setConstant(sign * c);
  }
  for (Eigen::Index k = 0; k < na; ++k) {
    if (spec.eigenvalues(k) < 0.0) {
      if (spec.eigenvalues(k) < -1e-9 * top)
        throw InvariantViolation("eigendecompose: negative eigenvalue");
      spec.eigenvalues(k) = 0.0;
    }
  }
  return spec;
}

double eigen_residual(const MetricMeasureGraph& graph, const SpectralDecomposition& spec)
{
  const Eigen::MatrixXd a = graph.form_matrix();
  Eigen::MatrixXd r = a * spec.eigenvectors;
  for (Eigen::Index k = 0; k < r.cols(); ++k)
    r.col(k) -= spec.eigenvalues(k) * spec.measure.cwiseProduct(spec.eigenvectors.col(k));
  double worst = 0.0;
  for (int i : graph.active_nodes())
    worst = std::max(worst, r.row(i).cwiseAbs().maxCoeff());
  return worst / spec.form_norm;
}

Eigen::VectorXd KernelMatrix::row_integrals(const Eigen::VectorXd& measure) const
{
  return entries * measure;
}

Eigen::VectorXd KernelMatrix::apply(const Eigen::VectorXd& f, const Eigen::VectorXd& measure) const
{
  return entries * measure.cwiseProduct(f);
}

namespace {

/// Phi diag(w) Phi^T with w >= 0, exactly symmetric.
Eigen::MatrixXd symmetric_product(const Eigen::MatrixXd& phi, std::span<const double> weights)
{
  Eigen::MatrixXd scaled = phi;
  for (Eigen::Index k = 0; k < scaled.cols(); ++k)
    scaled.col(k) *= std::sqrt(weights[static_cast<std::size_t>(k)]);
  const auto n = phi.rows();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  out.selfadjointView<Eigen::Lower>().rankUpdate(scaled);
  out.triangularView<Eigen::StrictlyUpper>() = out.transpose();
  return out;
}

} // namespace

KernelMatrix kernel_from_multipliers(const SpectralDecomposition& spec,
                                     std::span<const double> multipliers, double t, double delta)
{
  if (multipliers.size() != spec.size())
    throw DomainError("kernel_from_multipliers: one multiplier per eigenvalue required");
  for (double m : multipliers)
    if (!(m >= 0.0) || !std::isfinite(m))
      throw DomainError("kernel_from_multipliers: multipliers must be finite and nonnegative");
  KernelMatrix kernel;
  kernel.t = t;
  kernel.delta = delta;
  kernel.stochastic = !spec.killed;
  kernel.entries = symmetric_product(spec.eigenvectors, multipliers);
  const double floor = -kernel_clip_tolerance * std::max(1.0, kernel.entries.diagonal().maxCoeff());
  for (Eigen::Index j = 0; j < kernel.entries.cols(); ++j) {
    for (Eigen::Index i = 0; i < kernel.entries.rows(); ++i) {
      double& e = kernel.entries(i, j);
      if (e < 0.0) {
        if (e < floor)
          throw InvariantViolation("kernel entry " + std::to_string(e) + " below the clipping floor");
        e = 0.0;
      }
    }
  }
  return kernel;
}

KernelMatrix heat_kernel(const SpectralDecomposition& spec, double t)
{
  if (!(t > 0.0))
    throw DomainError("heat_kernel: t must be positive");
  std::vector<double> m(spec.size());
  for (std::size_t k = 0; k < m.size(); ++k)
    m[k] = std::exp(-t * spec.eigenvalues(static_cast<Eigen::Index>(k)));
  return kernel_from_multipliers(spec, m, t, 1.0);
}

namespace {

void check_delta_t(double delta, double t, const char* where)
{
  if (!(delta > 0.0 && delta < 1.0))
    throw DomainError(std::string(where) + ": delta must lie in (0, 1)");
  if (!(t > 0.0))
    throw DomainError(std::string(where) + ": t must be positive");
}

double subordinated_multiplier(double lambda, double delta, double t)
{
  return lambda == 0.0 ? 1.0 : std::exp(-t * std::pow(lambda, delta));
}

} // namespace

KernelMatrix subordinated_kernel(const SpectralDecomposition& spec, double delta, double t)
{
  check_delta_t(delta, t, "subordinated_kernel");
  std::vector<double> m(spec.size());
  for (std::size_t k = 0; k < m.size(); ++k)
    m[k] = subordinated_multiplier(spec.eigenvalues(static_cast<Eigen::Index>(k)), delta, t);
  return kernel_from_multipliers(spec, m, t, delta);
}

KernelMatrix subordinated_kernel_by_integral(const SpectralDecomposition& spec, double delta,
                                             double t, double abs_tol)
{
  check_delta_t(delta, t, "subordinated_kernel_by_integral");
  std::vector<double> m(spec.size());
  parallel_for(m.size(), [&](std::size_t k) {
    m[k] = subordinated_multiplier_by_quadrature(delta, t, spec.eigenvalues(static_cast<Eigen::Index>(k)),
                                                 abs_tol);
  });
  return kernel_from_multipliers(spec, m, t, delta);
}

Eigen::MatrixXd compose(const KernelMatrix& a, const KernelMatrix& b, const Eigen::VectorXd& measure)
{
  return a.entries * measure.asDiagonal() * b.entries;
}

Eigen::MatrixXd OperatorMatrix::operator_matrix() const
{
  return kernel * measure.asDiagonal();
}

Eigen::VectorXd OperatorMatrix::apply(const Eigen::VectorXd& f) const
{
  return kernel * measure.cwiseProduct(f);
}

namespace {

OperatorMatrix operator_from_powers(const SpectralDecomposition& spec, std::span<const double> powers,
                                    double delta)
{
  OperatorMatrix op;
  op.delta = delta;
  op.measure = spec.measure;
  op.kernel = symmetric_product(spec.eigenvectors, powers);
  return op;
}

} // namespace

OperatorMatrix fractional_laplacian(const SpectralDecomposition& spec, double delta)
{
  if (!(delta > 0.0 && delta <= 1.0))
    throw DomainError("fractional_laplacian: delta must lie in (0, 1]");
  std::vector<double> w(spec.size());
  for (std::size_t k = 0; k < w.size(); ++k) {
    const double lambda = spec.eigenvalues(static_cast<Eigen::Index>(k));
    w[k] = lambda == 0.0 ? 0.0 : std::pow(lambda, delta);
  }
  return operator_from_powers(spec, w, delta);
}

double bochner_power(double lambda, double delta, double abs_tol)
{
  if (!(delta > 0.0 && delta < 1.0))
    throw DomainError("bochner_power: delta must lie in (0, 1)");
  if (!(lambda >= 0.0))
    throw DomainError("bochner_power: lambda must be nonnegative");
  if (lambda == 0.0)
    return 0.0;
  const double tol = abs_tol * std::max(1.0, std::pow(lambda, delta));
  // (0, 1]: t = exp(-v), integrand t^(-delta) (1 - exp(-lambda t)) dv.
  auto near = [&](double v) {
    return std::exp(delta * v) * -std::expm1(-lambda * std::exp(-v));
  };
  const QuadResult head = integrate_doubling_panels_right(near, 0.0, tol);
  // [1, inf): int t^(-delta-1) dt = 1 / delta minus the exponentially damped part.
  auto far = [&](double t) { return std::pow(t, -delta - 1.0) * std::exp(-lambda * t); };
  const QuadResult tail = integrate_doubling_panels_right(far, 1.0, tol, std::min(1.0, 1.0 / lambda));
  const double integral = head.value + 1.0 / delta - tail.value;
  return delta / std::tgamma(1.0 - delta) * integral;
}

OperatorMatrix fractional_laplacian_bochner(const SpectralDecomposition& spec, double delta,
                                            double abs_tol)
{
  std::vector<double> w(spec.size());
  parallel_for(w.size(), [&](std::size_t k) {
    w[k] = bochner_power(spec.eigenvalues(static_cast<Eigen::Index>(k)), delta, abs_tol);
  });
  for (double& x : w)
    x = std::max(x, 0.0);
  return operator_from_powers(spec, w, delta);
}

Eigen::MatrixXd generator_matrix(const MetricMeasureGraph& graph)
{
  Eigen::MatrixXd a = graph.form_matrix();
  const auto n = a.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool bi = graph.is_boundary(static_cast<int>(i));
    for (Eigen::Index j = 0; j < n; ++j) {
      if (bi || graph.is_boundary(static_cast<int>(j)))
        a(i, j) = 0.0;
      else
        a(i, j) /= graph.measure()(i);
    }
  }
  return a;
}

double lattice_factor(const MetricMeasureGraph& graph)
{
  switch (graph.descriptor().kind) {
  case SpaceKind::circle:
  case SpaceKind::interval:
    return 8.0;
  case SpaceKind::gasket:
  case SpaceKind::vicsek:
    return 1.0;
  }
  return 8.0;
}

TimeWindow resolved_time_window(const MetricMeasureGraph& graph, const SpectralDecomposition& spec,
                                double delta)
{
  if (!(delta > 0.0 && delta <= 1.0))
    throw DomainError("resolved_time_window: delta must lie in (0, 1]");
  const double d_W = graph.geometry().d_W;
  TimeWindow w;
  w.lo = std::pow(lattice_factor(graph) * graph.spacing(), delta * d_W);
  w.hi = std::pow(spec.spectral_gap(), -delta);
  if (!(w.lo < w.hi))
    throw InvalidGrid("resolved time window is empty at this resolution");
  return w;
}

std::vector<double> resolved_time_grid(const MetricMeasureGraph& graph, const SpectralDecomposition& spec,
                                       double delta, std::size_t count)
{
  const TimeWindow w = resolved_time_window(graph, spec, delta);
  return log_space(w.lo, w.hi, count);
}

double mean_on_diagonal(const SpectralDecomposition& spec, double delta, double t)
{
  std::vector<double> m(spec.size());
  for (std::size_t k = 0; k < m.size(); ++k) {
    const double lambda = spec.eigenvalues(static_cast<Eigen::Index>(k));
    m[k] = delta == 1.0 ? std::exp(-t * lambda) : subordinated_multiplier(lambda, delta, t);
  }
  return pairwise_sum(m) / pairwise_sum(std::span<const double>(spec.measure.data(),
                                                                 static_cast<std::size_t>(spec.measure.size())));
}

namespace {

struct Triple
{
  std::size_t t_index;
  int x;
  int y;
};

std::vector<Triple> sample_triples(std::size_t t_count, const std::vector<int>& nodes,
                                   std::size_t per_t, std::mt19937_64& rng)
{
  std::vector<Triple> out;
  const std::size_t n = nodes.size();
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  for (std::size_t ti = 0; ti < t_count; ++ti) {
    if (n * n <= per_t) {
      for (int x : nodes)
        for (int y : nodes)
          out.push_back({ti, x, y});
    } else {
      for (std::size_t s = 0; s < per_t; ++s)
        out.push_back({ti, nodes[pick(rng)], nodes[pick(rng)]});
    }
  }
  return out;
}

} // namespace

BoundFitReport kernel_bound_fit(const SpectralDecomposition& spec, const MetricMeasureGraph& graph,
                                double delta, std::span<const double> t_grid, std::uint64_t seed)
{
  const TimeWindow window = resolved_time_window(graph, spec, delta);
  if (t_grid.empty())
    throw InvalidGrid("kernel_bound_fit: empty t grid");
  const double slack = 1e-9;
  for (double t : t_grid)
    if (t < window.lo * (1.0 - slack) || t > window.hi * (1.0 + slack))
      throw InvalidGrid("kernel_bound_fit: t = " + std::to_string(t) + " lies outside the resolved window");

  const double d_H = graph.geometry().d_H;
  const double d_W = graph.geometry().d_W;
  BoundFitReport report;
  report.delta = delta;
  report.window_lo = t_grid.front();
  report.window_hi = t_grid.back();
  report.predicted_slope = -d_H / (delta * d_W);

  std::vector<double> diag(t_grid.size());
  for (std::size_t i = 0; i < t_grid.size(); ++i)
    diag[i] = mean_on_diagonal(spec, delta, t_grid[i]);
  const SlopeFit fit = log_log_fit(t_grid, diag);
  report.diagonal_slope = fit.slope;
  report.r_squared = fit.r_squared;

  std::vector<KernelMatrix> kernels(t_grid.size());
  parallel_for(t_grid.size(), [&](std::size_t i) {
    kernels[i] = delta == 1.0 ? heat_kernel(spec, t_grid[i]) : subordinated_kernel(spec, delta, t_grid[i]);
  });

  std::mt19937_64 rng(seed);
  const std::size_t per_t = 4000;
  const auto fit_set = sample_triples(t_grid.size(), graph.active_nodes(), per_t, rng);
  const auto check_set = sample_triples(t_grid.size(), graph.active_nodes(), per_t, rng);

  const double volume_exp = -d_H / (delta * d_W);
  const double time_exp = 1.0 / (delta * d_W);
  auto profile = [&](double s) {
    if (delta == 1.0)
      return std::exp(-std::pow(s, d_W / (d_W - 1.0)));
    return std::pow(1.0 + s, -d_H - delta * d_W);
  };
  // Kernel values below this fraction of the diagonal are dominated by
  // rounding in the spectral sum and carry no envelope information.
  const double noise = 1e-8;
  struct Point
  {
    double value;
    double volume;
    double scaled_distance;
  };
  auto collect = [&](const std::vector<Triple>& triples) {
    std::vector<Point> pts;
    pts.reserve(triples.size());
    for (const auto& tr : triples) {
      const double t = t_grid[tr.t_index];
      const auto& k = kernels[tr.t_index].entries;
      const double v = k(tr.x, tr.y);
      if (v <= noise * k.diagonal().maxCoeff())
        continue;
      pts.push_back({v, std::pow(t, volume_exp), graph.distance(tr.x, tr.y) / std::pow(t, time_exp)});
    }
    return pts;
  };
  const auto fit_pts = collect(fit_set);
  const auto check_pts = collect(check_set);
  if (fit_pts.empty() || check_pts.empty())
    throw InvalidGrid("kernel_bound_fit: no usable samples");
  report.fit_samples = fit_pts.size();
  report.check_samples = check_pts.size();

  double best_width = std::numeric_limits<double>::infinity();
  for (int g = 0; g <= 80; ++g) {
    const double c = std::pow(10.0, -2.0 + 4.0 * g / 80.0);
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (const auto& p : fit_pts) {
      const double env = p.volume * profile(c * p.scaled_distance);
      if (!(env > 0.0)) {
        hi = std::numeric_limits<double>::infinity();
        break;
      }
      const double r = p.value / env;
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    const double width = std::log(hi / lo);
    if (std::isfinite(width) && width < best_width) {
      best_width = width;
      report.profile_scale = c;
      report.c3 = hi;
      report.c5 = lo;
    }
  }
  if (!std::isfinite(best_width))
    throw InvalidGrid("kernel_bound_fit: envelope underflows on every profile scale");
  report.c4 = report.c6 = report.profile_scale;

  std::size_t inside = 0;
  for (const auto& p : check_pts) {
    const double env = p.volume * profile(report.profile_scale * p.scaled_distance);
    if (report.c5 * env <= p.value && p.value <= report.c3 * env)
      ++inside;
  }
  report.coverage = static_cast<double>(inside) / static_cast<double>(check_pts.size());
  return report;
}

FractionalEnergy fractional_energy(const SpectralDecomposition& spec, const MetricMeasureGraph& graph,
                                   double delta, const Eigen::VectorXd& f)
{
  if (!(delta > 0.0 && delta <= 1.0))
    throw DomainError("fractional_energy: delta must lie in (0, 1]");
  if (!f.allFinite())
    throw DomainError("fractional_energy: f must be finite");
  const Eigen::VectorXd c = spec.coefficients(f);
  std::vector<double> terms(static_cast<std::size_t>(c.size()));
  for (Eigen::Index k = 0; k < c.size(); ++k) {
    const double lambda = spec.eigenvalues(k);
    terms[static_cast<std::size_t>(k)] = (lambda == 0.0 ? 0.0 : std::pow(lambda, delta)) * c(k) * c(k);
  }
  FractionalEnergy out;
  out.spectral = pairwise_sum(terms);

  const double exponent = -(graph.geometry().d_H + delta * graph.geometry().d_W);
  const auto n = static_cast<int>(graph.node_count());
  const auto& mu = graph.measure();
  std::vector<double> rows(static_cast<std::size_t>(n));
  parallel_for(rows.size(), [&](std::size_t iu) {
    const int i = static_cast<int>(iu);
    std::vector<double> row(static_cast<std::size_t>(n), 0.0);
    for (int j = 0; j < n; ++j) {
      if (j == i)
        continue;
      const double diff = f(i) - f(j);
      row[static_cast<std::size_t>(j)] = diff * diff * std::pow(graph.distance(i, j), exponent) * mu(j);
    }
    rows[iu] = pairwise_sum(row) * mu(i);
  });
  out.metric = pairwise_sum(rows);
  out.ratio = out.metric > 0.0 ? out.spectral / out.metric : 0.0;
  return out;
}

void write_kernel_csv(const KernelMatrix& kernel, const std::string& path)
{
  std::FILE* file = std::fopen(path.c_str(), "w");
  if (!file)
    throw ConfigurationError("cannot open " + path + " for writing");
  std::fputs("row,col,value\n", file);
  const auto n = kernel.entries.rows();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      std::fprintf(file, "%ld,%ld,%.17g\n", static_cast<long>(i), static_cast<long>(j), kernel.entries(i, j));
  std::fclose(file);
}

void write_kernel_binary(const KernelMatrix& kernel, const std::string& path)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw ConfigurationError("cannot open " + path + " for writing");
  const std::uint64_t n = kernel.node_count();
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(&kernel.t), sizeof kernel.t);
  out.write(reinterpret_cast<const char*>(&kernel.delta), sizeof kernel.delta);
  out.write(reinterpret_cast<const char*>(kernel.entries.data()),
            static_cast<std::streamsize>(n * n * sizeof(double)));
}

KernelMatrix read_kernel_binary(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ConfigurationError("cannot open " + path);
  std::uint64_t n = 0;
  KernelMatrix k;
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  in.read(reinterpret_cast<char*>(&k.t), sizeof k.t);
  in.read(reinterpret_cast<char*>(&k.delta), sizeof k.delta);
  if (!in || n > dense_node_budget)
    throw ConfigurationError(path + ": malformed kernel header");
  k.entries.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  in.read(reinterpret_cast<char*>(k.entries.data()), static_cast<std::streamsize>(n * n * sizeof(double)));
  if (!in)
    throw ConfigurationError(path + ": truncated kernel data");
  return k;
}

} // namespace subheat
