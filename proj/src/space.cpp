#include "subheat/space.hpp"

#include "subheat/errors.hpp"
#include "subheat/numeric.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <map>
#include <numeric>
#include <utility>

namespace subheat {

namespace {

GeometryParams analytic_geometry(double d_H, double d_W, std::optional<double> kappa)
{
  GeometryParams g;
  g.d_H = d_H;
  g.d_W = d_W;
  g.kappa = kappa;
  g.d_H_provenance = Provenance::analytic;
  g.d_W_provenance = Provenance::analytic;
  g.kappa_provenance = kappa ? Provenance::analytic : Provenance::unset;
  return g;
}

// Interns integer lattice points so vertex ids follow first-visit order.
class VertexTable
{
public:
  int id(std::pair<long, long> key)
  {
    auto [it, inserted] = ids_.try_emplace(key, static_cast<int>(keys_.size()));
    if (inserted)
      keys_.push_back(key);
    return it->second;
  }
  const std::vector<std::pair<long, long>>& keys() const { return keys_; }

private:
  std::map<std::pair<long, long>, int> ids_;
  std::vector<std::pair<long, long>> keys_;
};

void gasket_cells(long u, long v, long size, std::vector<std::array<long, 2>>& out)
{
  if (size == 1) {
    out.push_back({u, v});
    return;
  }
  const long h = size / 2;
  gasket_cells(u, v, h, out);
  gasket_cells(u + h, v, h, out);
  gasket_cells(u, v + h, h, out);
}

void vicsek_cells(long u, long v, long size, std::vector<std::array<long, 2>>& out)
{
  if (size == 1) {
    out.push_back({u, v});
    return;
  }
  const long s = size / 3;
  vicsek_cells(u, v, s, out);
  vicsek_cells(u + 2 * s, v, s, out);
  vicsek_cells(u, v + 2 * s, s, out);
  vicsek_cells(u + 2 * s, v + 2 * s, s, out);
  vicsek_cells(u + s, v + s, s, out);
}

} // namespace

std::string to_string(SpaceKind kind)
{
  switch (kind) {
  case SpaceKind::circle: return "circle";
  case SpaceKind::interval: return "interval";
  case SpaceKind::gasket: return "gasket";
  case SpaceKind::vicsek: return "vicsek";
  }
  return "unknown";
}

std::string to_string(BoundaryMode mode)
{
  return mode == BoundaryMode::absorbing ? "absorbing" : "reflecting";
}

std::string to_string(Provenance provenance)
{
  switch (provenance) {
  case Provenance::analytic: return "analytic";
  case Provenance::estimated: return "estimated";
  case Provenance::unset: return "unset";
  }
  return "unset";
}

SpaceKind parse_space_kind(const std::string& text)
{
  if (text == "circle") return SpaceKind::circle;
  if (text == "interval") return SpaceKind::interval;
  if (text == "gasket") return SpaceKind::gasket;
  if (text == "vicsek") return SpaceKind::vicsek;
  throw ConfigurationError("unknown space kind '" + text + "'");
}

BoundaryMode parse_boundary_mode(const std::string& text)
{
  if (text == "reflecting") return BoundaryMode::reflecting;
  if (text == "absorbing") return BoundaryMode::absorbing;
  throw ConfigurationError("unknown boundary mode '" + text + "'");
}

Provenance parse_provenance(const std::string& text)
{
  if (text == "analytic") return Provenance::analytic;
  if (text == "estimated") return Provenance::estimated;
  if (text == "unset") return Provenance::unset;
  throw ConfigurationError("unknown provenance '" + text + "'");
}

void GeometryParams::validate() const
{
  if (d_W_provenance == Provenance::analytic && d_W < 2.0)
    throw InvariantViolation("analytic walk dimension must be >= 2");
  if (!(d_H > 0.0) || !(d_W > 0.0))
    throw InvariantViolation("dimensions must be positive");
  if (kappa && !(*kappa > 0.0 && *kappa < d_W))
    throw InvariantViolation("kappa must lie in (0, d_W)");
}

std::string descriptor_to_json(const SpaceDescriptor& d)
{
  nlohmann::ordered_json j;
  j["kind"] = to_string(d.kind);
  j[d.kind == SpaceKind::circle || d.kind == SpaceKind::interval ? "n" : "level"] = d.resolution;
  j["boundary_mode"] = to_string(d.boundary);
  nlohmann::ordered_json g;
  g["d_H"] = d.geometry.d_H;
  g["d_W"] = d.geometry.d_W;
  g["kappa"] = d.geometry.kappa ? nlohmann::ordered_json(*d.geometry.kappa) : nlohmann::ordered_json(nullptr);
  g["provenance"] = {{"d_H", to_string(d.geometry.d_H_provenance)},
                     {"d_W", to_string(d.geometry.d_W_provenance)},
                     {"kappa", to_string(d.geometry.kappa_provenance)}};
  j["geometry"] = g;
  return j.dump();
}

SpaceDescriptor descriptor_from_json(const std::string& text)
{
  const auto j = nlohmann::json::parse(text);
  SpaceDescriptor d;
  d.kind = parse_space_kind(j.at("kind").get<std::string>());
  d.resolution = j.contains("n") ? j.at("n").get<int>() : j.at("level").get<int>();
  d.boundary = parse_boundary_mode(j.value("boundary_mode", std::string("reflecting")));
  const auto& g = j.at("geometry");
  d.geometry.d_H = g.at("d_H").get<double>();
  d.geometry.d_W = g.at("d_W").get<double>();
  if (!g.at("kappa").is_null())
    d.geometry.kappa = g.at("kappa").get<double>();
  const auto& p = g.at("provenance");
  d.geometry.d_H_provenance = parse_provenance(p.at("d_H").get<std::string>());
  d.geometry.d_W_provenance = parse_provenance(p.at("d_W").get<std::string>());
  d.geometry.kappa_provenance = parse_provenance(p.at("kappa").get<std::string>());
  return d;
}

MetricMeasureGraph::MetricMeasureGraph(SpaceDescriptor descriptor,
                                       Eigen::MatrixX2d positions,
                                       Metric metric,
                                       Eigen::VectorXd measure,
                                       std::vector<Edge> edges,
                                       std::vector<int> boundary,
                                       double spacing,
                                       double diameter)
  : descriptor_(std::move(descriptor))
  , positions_(std::move(positions))
  , metric_(metric)
  , measure_(std::move(measure))
  , edges_(std::move(edges))
  , boundary_(std::move(boundary))
  , spacing_(spacing)
  , diameter_(diameter)
{
  const auto n = node_count();
  if (static_cast<std::size_t>(positions_.rows()) != n)
    throw InvariantViolation("positions and measure disagree on node count");
  if ((measure_.array() <= 0.0).any())
    throw InvariantViolation("node masses must be positive");
  for (const auto& e : edges_) {
    if (e.i == e.j || e.conductance < 0.0 || e.i < 0 || e.j < 0 ||
        static_cast<std::size_t>(std::max(e.i, e.j)) >= n)
      throw InvariantViolation("malformed edge");
  }
  descriptor_.geometry.validate();
  std::sort(boundary_.begin(), boundary_.end());
  is_boundary_.assign(n, false);
  for (int b : boundary_)
    is_boundary_[static_cast<std::size_t>(b)] = true;
  for (std::size_t i = 0; i < n; ++i)
    if (!is_boundary_[i])
      active_.push_back(static_cast<int>(i));
}

double MetricMeasureGraph::distance(int i, int j) const
{
  if (metric_ == Metric::periodic_arc) {
    const double d = std::abs(positions_(i, 0) - positions_(j, 0));
    return std::min(d, 1.0 - d);
  }
  return (positions_.row(i) - positions_.row(j)).norm();
}

Eigen::MatrixXd MetricMeasureGraph::distance_matrix() const
{
  const auto n = static_cast<Eigen::Index>(node_count());
  Eigen::MatrixXd d(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      d(i, j) = distance(static_cast<int>(i), static_cast<int>(j));
  return d;
}

double MetricMeasureGraph::total_mass() const
{
  return pairwise_sum(std::span<const double>(measure_.data(), static_cast<std::size_t>(measure_.size())));
}

Eigen::MatrixXd MetricMeasureGraph::form_matrix() const
{
  const auto n = static_cast<Eigen::Index>(node_count());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (const auto& e : edges_) {
    a(e.i, e.j) -= e.conductance;
    a(e.j, e.i) -= e.conductance;
    a(e.i, e.i) += e.conductance;
    a(e.j, e.j) += e.conductance;
  }
  return a;
}

Eigen::SparseMatrix<double> MetricMeasureGraph::conductance_matrix() const
{
  const auto n = static_cast<Eigen::Index>(node_count());
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(2 * edges_.size());
  for (const auto& e : edges_) {
    triplets.emplace_back(e.i, e.j, e.conductance);
    triplets.emplace_back(e.j, e.i, e.conductance);
  }
  Eigen::SparseMatrix<double> c(n, n);
  c.setFromTriplets(triplets.begin(), triplets.end());
  return c;
}

double MetricMeasureGraph::quadratic_form(std::span<const double> f) const
{
  if (f.size() != node_count())
    throw DomainError("quadratic_form: vector length differs from node count");
  std::vector<double> terms;
  terms.reserve(edges_.size() + boundary_.size());
  for (const auto& e : edges_) {
    const double fi = is_boundary(e.i) ? 0.0 : f[static_cast<std::size_t>(e.i)];
    const double fj = is_boundary(e.j) ? 0.0 : f[static_cast<std::size_t>(e.j)];
    terms.push_back(e.conductance * (fi - fj) * (fi - fj));
  }
  return pairwise_sum(terms);
}

MetricMeasureGraph MetricMeasureGraph::with_kappa(double kappa, Provenance provenance) const
{
  MetricMeasureGraph copy = *this;
  copy.descriptor_.geometry.kappa = kappa;
  copy.descriptor_.geometry.kappa_provenance = provenance;
  copy.descriptor_.geometry.validate();
  return copy;
}

MetricMeasureGraph build_circle(int n)
{
  if (n < 8)
    throw InvalidResolution("circle needs n >= 8");
  SpaceDescriptor d{SpaceKind::circle, n, BoundaryMode::reflecting, analytic_geometry(1.0, 2.0, 1.0)};
  Eigen::MatrixX2d pos(n, 2);
  for (int i = 0; i < n; ++i) {
    pos(i, 0) = static_cast<double>(i) / n;
    pos(i, 1) = 0.0;
  }
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    edges.push_back({i, (i + 1) % n, static_cast<double>(n)});
  Eigen::VectorXd mu = Eigen::VectorXd::Constant(n, 1.0 / n);
  return {d, std::move(pos), MetricMeasureGraph::Metric::periodic_arc, std::move(mu),
          std::move(edges), {}, 1.0 / n, 0.5};
}

// Nodes x_i = i / n for i = 0..n with half masses at the endpoints. Both modes
// have spectrum 4 n^2 sin^2(pi k / 2n): k = 0..n reflecting, k = 1..n-1 absorbing.
MetricMeasureGraph build_interval(int n, BoundaryMode mode)
{
  if (n < 8)
    throw InvalidResolution("interval needs n >= 8");
  SpaceDescriptor d{SpaceKind::interval, n, mode, analytic_geometry(1.0, 2.0, 1.0)};
  const int nodes = n + 1;
  Eigen::MatrixX2d pos(nodes, 2);
  Eigen::VectorXd mu(nodes);
  for (int i = 0; i < nodes; ++i) {
    pos(i, 0) = static_cast<double>(i) / n;
    pos(i, 1) = 0.0;
    mu(i) = (i == 0 || i == n) ? 0.5 / n : 1.0 / n;
  }
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i)
    edges.push_back({i, i + 1, static_cast<double>(n)});
  std::vector<int> boundary;
  if (mode == BoundaryMode::absorbing)
    boundary = {0, n};
  return {d, std::move(pos), MetricMeasureGraph::Metric::euclidean, std::move(mu),
          std::move(edges), std::move(boundary), 1.0 / n, 1.0};
}

MetricMeasureGraph build_gasket(int level)
{
  if (level < 1 || level > 8)
    throw InvalidResolution("gasket level must be in [1, 8]");
  SpaceDescriptor d{SpaceKind::gasket, level, BoundaryMode::reflecting,
                    analytic_geometry(std::log(3.0) / std::log(2.0), std::log(5.0) / std::log(2.0), std::nullopt)};
  const long side = 1L << level;
  std::vector<std::array<long, 2>> cells;
  gasket_cells(0, 0, side, cells);

  VertexTable table;
  std::vector<Edge> edges;
  std::vector<int> incidence;
  const double conductance = std::pow(5.0 / 3.0, level);
  for (const auto& c : cells) {
    const int a = table.id({c[0], c[1]});
    const int b = table.id({c[0] + 1, c[1]});
    const int e = table.id({c[0], c[1] + 1});
    incidence.resize(table.keys().size(), 0);
    for (int v : {a, b, e})
      ++incidence[static_cast<std::size_t>(v)];
    edges.push_back({a, b, conductance});
    edges.push_back({b, e, conductance});
    edges.push_back({e, a, conductance});
  }
  const auto n = static_cast<Eigen::Index>(table.keys().size());
  Eigen::MatrixX2d pos(n, 2);
  Eigen::VectorXd mu(n);
  const double cell_mass = std::pow(3.0, -level);
  const double h = 1.0 / static_cast<double>(side);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto [u, v] = table.keys()[static_cast<std::size_t>(i)];
    pos(i, 0) = (static_cast<double>(u) + 0.5 * static_cast<double>(v)) * h;
    pos(i, 1) = 0.5 * std::sqrt(3.0) * static_cast<double>(v) * h;
    mu(i) = cell_mass * incidence[static_cast<std::size_t>(i)] / 3.0;
  }
  return {d, std::move(pos), MetricMeasureGraph::Metric::euclidean, std::move(mu),
          std::move(edges), {}, h, 1.0};
}

// Vicsek set in the diagonal-cross configuration (four corner cells plus the
// center cell). Each m-cell carries the star of its center to its four
// corners; eliminating the center (star-mesh) leaves the complete graph on
// the corners with conductance 3^m / 4 per pair.
MetricMeasureGraph build_vicsek(int level)
{
  if (level < 1 || level > 6)
    throw InvalidResolution("vicsek level must be in [1, 6]");
  SpaceDescriptor d{SpaceKind::vicsek, level, BoundaryMode::reflecting,
                    analytic_geometry(std::log(5.0) / std::log(3.0), std::log(15.0) / std::log(3.0), std::nullopt)};
  long side = 1;
  for (int i = 0; i < level; ++i)
    side *= 3;
  std::vector<std::array<long, 2>> cells;
  vicsek_cells(0, 0, side, cells);

  VertexTable table;
  std::vector<Edge> edges;
  std::vector<int> incidence;
  const double conductance = std::pow(3.0, level) / 4.0;
  for (const auto& c : cells) {
    const std::array<int, 4> corner{table.id({c[0], c[1]}), table.id({c[0] + 1, c[1]}),
                                    table.id({c[0] + 1, c[1] + 1}), table.id({c[0], c[1] + 1})};
    incidence.resize(table.keys().size(), 0);
    for (int v : corner)
      ++incidence[static_cast<std::size_t>(v)];
    for (int a = 0; a < 4; ++a)
      for (int b = a + 1; b < 4; ++b)
        edges.push_back({corner[static_cast<std::size_t>(a)], corner[static_cast<std::size_t>(b)], conductance});
  }
  const auto n = static_cast<Eigen::Index>(table.keys().size());
  Eigen::MatrixX2d pos(n, 2);
  Eigen::VectorXd mu(n);
  const double cell_mass = std::pow(5.0, -level);
  const double h = 1.0 / static_cast<double>(side);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto [u, v] = table.keys()[static_cast<std::size_t>(i)];
    pos(i, 0) = static_cast<double>(u) * h;
    pos(i, 1) = static_cast<double>(v) * h;
    mu(i) = cell_mass * incidence[static_cast<std::size_t>(i)] / 4.0;
  }
  return {d, std::move(pos), MetricMeasureGraph::Metric::euclidean, std::move(mu),
          std::move(edges), {}, h, std::sqrt(2.0)};
}

MetricMeasureGraph build_space(const SpaceDescriptor& descriptor)
{
  auto graph = [&] {
    switch (descriptor.kind) {
    case SpaceKind::circle: return build_circle(descriptor.resolution);
    case SpaceKind::interval: return build_interval(descriptor.resolution, descriptor.boundary);
    case SpaceKind::gasket: return build_gasket(descriptor.resolution);
    case SpaceKind::vicsek: return build_vicsek(descriptor.resolution);
    }
    throw ConfigurationError("unknown space kind");
  }();
  const auto& g = descriptor.geometry;
  if (g.kappa && g.kappa_provenance != Provenance::analytic)
    return graph.with_kappa(*g.kappa, g.kappa_provenance);
  return graph;
}

std::vector<int> ball(const MetricMeasureGraph& graph, int center, double r)
{
  std::vector<int> out;
  const auto n = static_cast<int>(graph.node_count());
  for (int j = 0; j < n; ++j)
    if (j == center || graph.distance(center, j) < r)
      out.push_back(j);
  return out;
}

Eigen::MatrixXd ball_masses(const MetricMeasureGraph& graph, std::span<const double> radii)
{
  const auto n = static_cast<int>(graph.node_count());
  const auto& mu = graph.measure();
  Eigen::MatrixXd out(n, static_cast<Eigen::Index>(radii.size()));
  std::vector<std::pair<double, double>> row(static_cast<std::size_t>(n));
  for (int x = 0; x < n; ++x) {
    for (int y = 0; y < n; ++y)
      row[static_cast<std::size_t>(y)] = {graph.distance(x, y), mu(y)};
    std::sort(row.begin(), row.end());
    double acc = 0.0;
    std::size_t k = 0;
    for (std::size_t r = 0; r < radii.size(); ++r) {
      while (k < row.size() && row[k].first < radii[r]) {
        acc += row[k].second;
        ++k;
      }
      out(x, static_cast<Eigen::Index>(r)) = std::max(acc, mu(x));
    }
  }
  return out;
}

std::vector<double> default_radius_grid(const MetricMeasureGraph& graph, std::size_t count)
{
  return log_space(4.0 * graph.spacing(), graph.diameter() / 4.0, count);
}

AhlforsFit ahlfors_fit(const MetricMeasureGraph& graph, std::span<const double> radii)
{
  if (radii.size() < 3)
    throw InvalidGrid("ahlfors_fit needs at least 3 radii");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (!(radii[i] > 0.0) || (i > 0 && !(radii[i] > radii[i - 1])))
      throw InvalidGrid("ahlfors_fit radii must be positive and strictly increasing");
  }
  if (radii.back() > graph.diameter())
    throw InvalidGrid("ahlfors_fit radii exceed the diameter");

  const Eigen::MatrixXd masses = ball_masses(graph, radii);
  const auto n = masses.rows();
  std::vector<double> slopes(static_cast<std::size_t>(n));
  std::vector<double> row(radii.size());
  for (Eigen::Index x = 0; x < n; ++x) {
    for (std::size_t r = 0; r < radii.size(); ++r)
      row[r] = masses(x, static_cast<Eigen::Index>(r));
    slopes[static_cast<std::size_t>(x)] = log_log_fit(radii, row, 3).slope;
  }
  AhlforsFit fit;
  fit.d_H = pairwise_sum(slopes) / static_cast<double>(n);
  fit.c1 = std::numeric_limits<double>::infinity();
  fit.c2 = 0.0;
  for (Eigen::Index x = 0; x < n; ++x) {
    for (std::size_t r = 0; r < radii.size(); ++r) {
      const double ratio = masses(x, static_cast<Eigen::Index>(r)) / std::pow(radii[r], fit.d_H);
      fit.c1 = std::min(fit.c1, ratio);
      fit.c2 = std::max(fit.c2, ratio);
    }
  }
  fit.radii.assign(radii.begin(), radii.end());
  return fit;
}

} // namespace subheat
