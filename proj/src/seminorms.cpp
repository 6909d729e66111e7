#include "subheat/seminorms.hpp"

#include "subheat/errors.hpp"
#include "subheat/numeric.hpp"
#include "subheat/parallel.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace subheat {

namespace {

double abs_pow(double x, double p)
{
  const double a = std::abs(x);
  if (p == 1.0)
    return a;
  if (p == 2.0)
    return a * a;
  return std::pow(a, p);
}

void normalize_sup(Eigen::VectorXd& f)
{
  const double m = f.cwiseAbs().maxCoeff();
  if (m > 0.0)
    f /= m;
}

double uniform01(std::mt19937_64& rng)
{
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

void check_radii(std::span<const double> radii, std::size_t min_count)
{
  if (radii.size() < min_count)
    throw InvalidGrid("radius grid needs at least " + std::to_string(min_count) + " radii");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (!(radii[i] > 0.0) || (i > 0 && !(radii[i] > radii[i - 1])))
      throw InvalidGrid("radius grid must be positive and strictly increasing");
  }
}

} // namespace

Eigen::VectorXd coordinate(const MetricMeasureGraph& graph)
{
  return graph.positions().col(0);
}

Eigen::VectorXd corner_harmonic(const MetricMeasureGraph& graph)
{
  const auto kind = graph.descriptor().kind;
  std::vector<Eigen::Vector2d> corners;
  if (kind == SpaceKind::gasket)
    corners = {{0.0, 0.0}, {1.0, 0.0}, {0.5, 0.5 * std::sqrt(3.0)}};
  else if (kind == SpaceKind::vicsek)
    corners = {{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}};
  else
    throw ConfigurationError("corner_harmonic is defined on gasket and vicsek only");

  const auto n = static_cast<Eigen::Index>(graph.node_count());
  std::vector<int> corner_node;
  for (const auto& c : corners) {
    Eigen::Index best = 0;
    (graph.positions().rowwise() - c.transpose()).rowwise().squaredNorm().minCoeff(&best);
    corner_node.push_back(static_cast<int>(best));
  }
  Eigen::VectorXd value = Eigen::VectorXd::Zero(n);
  std::vector<int> index(static_cast<std::size_t>(n), -1);
  std::vector<bool> fixed(static_cast<std::size_t>(n), false);
  for (std::size_t c = 0; c < corner_node.size(); ++c) {
    fixed[static_cast<std::size_t>(corner_node[c])] = true;
    value(corner_node[c]) = c == 0 ? 1.0 : 0.0;
  }
  int free_count = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    if (!fixed[static_cast<std::size_t>(i)])
      index[static_cast<std::size_t>(i)] = free_count++;

  std::vector<Eigen::Triplet<double>> triplets;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(free_count);
  for (const auto& e : graph.edges()) {
    const int a = index[static_cast<std::size_t>(e.i)];
    const int b = index[static_cast<std::size_t>(e.j)];
    if (a >= 0) {
      triplets.emplace_back(a, a, e.conductance);
      if (b >= 0)
        triplets.emplace_back(a, b, -e.conductance);
      else
        rhs(a) += e.conductance * value(e.j);
    }
    if (b >= 0) {
      triplets.emplace_back(b, b, e.conductance);
      if (a >= 0)
        triplets.emplace_back(b, a, -e.conductance);
      else
        rhs(b) += e.conductance * value(e.i);
    }
  }
  Eigen::SparseMatrix<double> a(free_count, free_count);
  a.setFromTriplets(triplets.begin(), triplets.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(a);
  if (solver.info() != Eigen::Success)
    throw InvariantViolation("corner_harmonic: factorization failed");
  const Eigen::VectorXd x = solver.solve(rhs);
  for (Eigen::Index i = 0; i < n; ++i)
    if (index[static_cast<std::size_t>(i)] >= 0)
      value(i) = x(index[static_cast<std::size_t>(i)]);
  return value;
}

std::vector<TestFunction> canonical_family(const MetricMeasureGraph& graph,
                                           const SpectralDecomposition& spec, std::uint64_t seed)
{
  const auto n = static_cast<Eigen::Index>(graph.node_count());
  const auto kind = graph.descriptor().kind;
  const bool one_dim = kind == SpaceKind::circle || kind == SpaceKind::interval;
  const Eigen::VectorXd s = coordinate(graph);

  Eigen::VectorXd sharp(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = graph.positions()(i, 0);
    const double y = graph.positions()(i, 1);
    switch (kind) {
    case SpaceKind::circle: sharp(i) = s(i) < 0.5 ? 1.0 : 0.0; break;
    case SpaceKind::interval: sharp(i) = (s(i) >= 0.25 && s(i) < 0.75) ? 1.0 : 0.0; break;
    case SpaceKind::gasket: {
      // Level-1 corner cell; its two junction vertices belong to the other cells.
      const bool junction = (std::abs(x - 0.5) < 1e-9 && std::abs(y) < 1e-9) ||
                            (std::abs(x - 0.25) < 1e-9 && std::abs(y - std::sqrt(3.0) / 4.0) < 1e-9);
      sharp(i) = (x + y / std::sqrt(3.0) <= 0.5 + 1e-9 && !junction) ? 1.0 : 0.0;
      break;
    }
    case SpaceKind::vicsek: sharp(i) = x + y < 2.0 / 3.0 - 1e-9 ? 1.0 : 0.0; break;
    }
  }

  const double tau = 0.01;
  Eigen::VectorXd smoothed = spec.apply([tau](double lambda) { return std::exp(-tau * lambda); }, sharp);

  Eigen::VectorXd low(n);
  if (kind == SpaceKind::circle)
    low = (2.0 * std::numbers::pi * s.array()).cos().matrix();
  else if (kind == SpaceKind::interval)
    low = (std::numbers::pi * s.array()).sin().matrix();
  else
    low = corner_harmonic(graph);

  std::mt19937_64 rng(seed);
  const double hurst = 0.5;
  const int octaves = 7;
  Eigen::VectorXd rough = Eigen::VectorXd::Zero(n);
  for (int j = 0; j < octaves; ++j) {
    const double phase = 2.0 * std::numbers::pi * uniform01(rng);
    const double angle = 2.0 * std::numbers::pi * uniform01(rng);
    const double freq = std::ldexp(1.0, j);
    const double amp = std::pow(freq, -hurst);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double u = one_dim ? s(i)
                               : graph.positions()(i, 0) * std::cos(angle) +
                                   graph.positions()(i, 1) * std::sin(angle);
      rough(i) += amp * std::cos(2.0 * std::numbers::pi * freq * u + phase);
    }
  }
  if (kind == SpaceKind::interval)
    rough = rough.cwiseProduct((std::numbers::pi * s.array()).sin().matrix());

  Eigen::Vector2d centre;
  double radius = graph.diameter() / 4.0;
  switch (kind) {
  case SpaceKind::circle:
  case SpaceKind::interval: centre = {0.5, 0.0}; break;
  case SpaceKind::gasket: centre = {0.5, std::sqrt(3.0) / 6.0}; break;
  case SpaceKind::vicsek: centre = {0.5, 0.5}; break;
  }
  Eigen::Index centre_node = 0;
  (graph.positions().rowwise() - centre.transpose()).rowwise().squaredNorm().minCoeff(&centre_node);
  Eigen::VectorXd tent(n);
  for (Eigen::Index i = 0; i < n; ++i)
    tent(i) = std::max(0.0, 1.0 - graph.distance(static_cast<int>(i), static_cast<int>(centre_node)) / radius);

  const Eigen::Index k1 = spec.killed ? 0 : 1;
  Eigen::VectorXd phi1 = spec.eigenvectors.col(k1);

  std::vector<TestFunction> family{{"smoothed_indicator", smoothed}, {"sharp_indicator", sharp},
                                   {"low_mode", low},                {"holder_rough", rough},
                                   {"tent", tent},                   {"phi_1", phi1}};
  for (auto& f : family) {
    for (int b : graph.boundary())
      f.values(b) = 0.0;
    normalize_sup(f.values);
  }
  return family;
}

double besov_energy(const KernelMatrix& kernel, const Eigen::VectorXd& measure,
                    const Eigen::VectorXd& f, double p)
{
  if (!(p >= 1.0))
    throw DomainError("besov_energy: p must be at least 1");
  const auto n = kernel.entries.rows();
  if (f.size() != n || measure.size() != n)
    throw DomainError("besov_energy: size mismatch");
  std::vector<double> rows(static_cast<std::size_t>(n));
  std::vector<double> row(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) {
    // Column j of the symmetric kernel is contiguous.
    const double* col = kernel.entries.col(j).data();
    for (Eigen::Index i = 0; i < n; ++i)
      row[static_cast<std::size_t>(i)] = abs_pow(f(i) - f(j), p) * col[i] * measure(i);
    rows[static_cast<std::size_t>(j)] = pairwise_sum(row) * measure(j);
  }
  return pairwise_sum(rows);
}

std::vector<EnergyCurve> energy_curves(const SpectralDecomposition& spec,
                                       std::span<const TestFunction> family, double p,
                                       double delta, std::span<const double> t_grid)
{
  if (t_grid.empty())
    throw InvalidGrid("energy_curves: empty t grid");
  std::vector<EnergyCurve> curves(family.size());
  for (std::size_t f = 0; f < family.size(); ++f) {
    curves[f].function_id = family[f].id;
    curves[f].p = p;
    curves[f].delta = delta;
    curves[f].grid.assign(t_grid.begin(), t_grid.end());
    curves[f].energies.assign(t_grid.size(), 0.0);
  }
  parallel_for(t_grid.size(), [&](std::size_t i) {
    const KernelMatrix k = delta == 1.0 ? heat_kernel(spec, t_grid[i]) : subordinated_kernel(spec, delta, t_grid[i]);
    for (std::size_t f = 0; f < family.size(); ++f)
      curves[f].energies[i] = besov_energy(k, spec.measure, family[f].values, p);
  });
  return curves;
}

EnergyCurve energy_curve(const SpectralDecomposition& spec, const TestFunction& f, double p, double delta,
                         std::span<const double> t_grid)
{
  return energy_curves(spec, std::span<const TestFunction>(&f, 1), p, delta, t_grid).front();
}

std::vector<double> besov_profile(const EnergyCurve& curve, double alpha)
{
  std::vector<double> out(curve.grid.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::pow(curve.grid[i], -alpha) * std::pow(curve.energies[i], 1.0 / curve.p);
  return out;
}

BesovValue besov_norm(const EnergyCurve& curve, double alpha)
{
  if (curve.grid.empty())
    throw InvalidGrid("besov_norm: empty window");
  if (!(alpha >= 0.0))
    throw DomainError("besov_norm: alpha must be nonnegative");
  const auto profile = besov_profile(curve, alpha);
  BesovValue out;
  std::size_t best = 0;
  for (std::size_t i = 0; i < profile.size(); ++i) {
    if (profile[i] > profile[best])
      best = i;
  }
  out.value = profile[best];
  out.argmax_t = curve.grid[best];
  out.edge_pinned = best == 0 && out.value > 0.0;
  return out;
}

namespace {

/// For every radius r: per-node sums over y with d(x, y) < r of
/// |f_x - f_y|^p mu_y and of mu_y. Rows are nodes, columns radii.
struct BallSums
{
  Eigen::MatrixXd oscillation;
  Eigen::MatrixXd mass;
};

BallSums ball_sums(const MetricMeasureGraph& graph, const Eigen::VectorXd& f, double p,
                   std::span<const double> radii)
{
  const auto n = static_cast<int>(graph.node_count());
  const auto nr = static_cast<Eigen::Index>(radii.size());
  BallSums out{Eigen::MatrixXd::Zero(n, nr), Eigen::MatrixXd::Zero(n, nr)};
  const auto& mu = graph.measure();
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t xu) {
    const int x = static_cast<int>(xu);
    std::vector<std::pair<double, int>> order(static_cast<std::size_t>(n));
    for (int y = 0; y < n; ++y)
      order[static_cast<std::size_t>(y)] = {graph.distance(x, y), y};
    std::sort(order.begin(), order.end());
    std::size_t k = 0;
    double osc = 0.0;
    double mass = 0.0;
    for (Eigen::Index r = 0; r < nr; ++r) {
      while (k < order.size() && order[k].first < radii[static_cast<std::size_t>(r)]) {
        const int y = order[k].second;
        osc += abs_pow(f(x) - f(y), p) * mu(y);
        mass += mu(y);
        ++k;
      }
      out.oscillation(x, r) = osc;
      out.mass(x, r) = mass;
    }
  });
  return out;
}

} // namespace

std::vector<double> ks_functional(const MetricMeasureGraph& graph, const Eigen::VectorXd& f, double lambda,
                                  double p, std::span<const double> radii)
{
  if (!(lambda > 0.0))
    throw DomainError("ks_functional: lambda must be positive");
  if (!(p >= 1.0))
    throw DomainError("ks_functional: p must be at least 1");
  check_radii(radii, 1);
  const BallSums sums = ball_sums(graph, f, p, radii);
  const auto& mu = graph.measure();
  std::vector<double> out(radii.size());
  std::vector<double> terms(graph.node_count());
  for (std::size_t r = 0; r < radii.size(); ++r) {
    for (std::size_t x = 0; x < terms.size(); ++x) {
      const auto xi = static_cast<Eigen::Index>(x);
      const auto ri = static_cast<Eigen::Index>(r);
      terms[x] = mu(xi) * sums.oscillation(xi, ri) / sums.mass(xi, ri);
    }
    out[r] = pairwise_sum(terms) / std::pow(radii[r], lambda * p);
  }
  return out;
}

double ks_norm(const MetricMeasureGraph& graph, const Eigen::VectorXd& f, double lambda, double p,
               std::span<const double> radii, KsMode mode)
{
  check_radii(radii, 3);
  const auto values = ks_functional(graph, f, lambda, p, radii);
  const std::size_t count = mode == KsMode::limsup_smallest ? 3 : values.size();
  const double m = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(count));
  return std::pow(m, 1.0 / p);
}

double w_norm(const MetricMeasureGraph& graph, const Eigen::VectorXd& f, double lambda, double p)
{
  if (!(lambda > 0.0))
    throw DomainError("w_norm: lambda must be positive");
  if (!(p >= 1.0))
    throw DomainError("w_norm: p must be at least 1");
  const auto n = static_cast<int>(graph.node_count());
  const double exponent = -(graph.geometry().d_H + lambda * p);
  const auto& mu = graph.measure();
  std::vector<double> rows(static_cast<std::size_t>(n));
  parallel_for(rows.size(), [&](std::size_t iu) {
    const int i = static_cast<int>(iu);
    std::vector<double> row(static_cast<std::size_t>(n), 0.0);
    for (int j = 0; j < n; ++j) {
      if (j != i)
        row[static_cast<std::size_t>(j)] = abs_pow(f(i) - f(j), p) * std::pow(graph.distance(i, j), exponent) * mu(j);
    }
    rows[iu] = pairwise_sum(row) * mu(i);
  });
  return std::pow(pairwise_sum(rows), 1.0 / p);
}

namespace {

std::vector<double> grigoryan_profile(const MetricMeasureGraph& graph, const Eigen::VectorXd& f,
                                      double alpha, double p, std::span<const double> radii)
{
  if (!(p >= 1.0))
    throw DomainError("grigoryan: p must be at least 1");
  const BallSums sums = ball_sums(graph, f, p, radii);
  const auto& mu = graph.measure();
  std::vector<double> out(radii.size());
  std::vector<double> terms(graph.node_count());
  for (std::size_t r = 0; r < radii.size(); ++r) {
    for (std::size_t x = 0; x < terms.size(); ++x)
      terms[x] = mu(static_cast<Eigen::Index>(x)) * sums.oscillation(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(r));
    out[r] = std::pow(radii[r], -alpha - graph.geometry().d_H / p) * std::pow(pairwise_sum(terms), 1.0 / p);
  }
  return out;
}

} // namespace

double grigoryan_seminorm(const MetricMeasureGraph& graph, const Eigen::VectorXd& f, double alpha, double p,
                          double r)
{
  if (!(r > 0.0))
    throw InvalidGrid("grigoryan_seminorm: r must be positive");
  const double radii[] = {r};
  return grigoryan_profile(graph, f, alpha, p, radii).front();
}

double grigoryan_norm(const MetricMeasureGraph& graph, const Eigen::VectorXd& f, double alpha, double p,
                      double q, std::span<const double> radii)
{
  check_radii(radii, 2);
  const auto values = grigoryan_profile(graph, f, alpha, p, radii);
  if (std::isinf(q) && q > 0.0)
    return *std::max_element(values.begin(), values.end());
  if (q != p)
    throw DomainError("grigoryan_norm: q must be p or infinity");
  std::vector<double> panels(values.size() - 1);
  for (std::size_t i = 0; i + 1 < values.size(); ++i)
    panels[i] = 0.5 * (std::pow(values[i], q) + std::pow(values[i + 1], q)) * std::log(radii[i + 1] / radii[i]);
  return std::pow(pairwise_sum(panels), 1.0 / q);
}

double variation(const MetricMeasureGraph& graph, const Eigen::VectorXd& f, std::span<const double> radii,
                 double kappa)
{
  if (!(kappa > 0.0)) {
    if (!graph.geometry().kappa)
      throw ConfigurationError("variation: kappa is unset and was not supplied");
    kappa = *graph.geometry().kappa;
  }
  check_radii(radii, 3);
  const double lambda = graph.geometry().d_W - kappa;
  const auto values = ks_functional(graph, f, lambda, 1.0, radii.first(3));
  return *std::min_element(values.begin(), values.end());
}

SeminormReport seminorm_report(const MetricMeasureGraph& graph, const EnergyCurve& curve,
                               const Eigen::VectorXd& f, double alpha, std::span<const double> radii)
{
  const double p = curve.p;
  const double delta = curve.delta;
  const double d_W = graph.geometry().d_W;
  SeminormReport rep;
  rep.function_id = curve.function_id;
  const BesovValue b = besov_norm(curve, alpha);
  rep.besov = b.value;
  rep.besov_argmax_t = b.argmax_t;
  rep.besov_edge_pinned = b.edge_pinned;
  const double lambda = alpha * delta * d_W;
  if (lambda > 0.0) {
    rep.ks_limsup = ks_norm(graph, f, lambda, p, radii, KsMode::limsup_smallest);
    rep.ks_sup = ks_norm(graph, f, lambda, p, radii, KsMode::sup);
  }
  rep.w_norm = w_norm(graph, f, delta * d_W / p, p);
  rep.grigoryan_p_inf = grigoryan_norm(graph, f, lambda, p, std::numeric_limits<double>::infinity(), radii);
  rep.grigoryan_p_p = grigoryan_norm(graph, f, delta * d_W / p, p, p, radii);
  rep.window_t_lo = curve.grid.front();
  rep.window_t_hi = curve.grid.back();
  rep.window_r_lo = radii.front();
  rep.window_r_hi = radii.back();
  return rep;
}

} // namespace subheat
