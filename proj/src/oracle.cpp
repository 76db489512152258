#include "geodesic_atlas/oracle.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <queue>

#include "geodesic_atlas/errors.hpp"
#include "geodesic_atlas/geodesics.hpp"
#include "geodesic_atlas/geometry.hpp"

namespace geodesic_atlas {

GridDistance::GridDistance(Domain domain, GridResolution resolution, int source, std::vector<double> distances)
    : domain_(std::move(domain)), resolution_(resolution), source_(source), distances_(std::move(distances)) {}

ChartPoint GridDistance::node(int flat) const {
  const int i = flat % resolution_[0];
  const int j = flat / resolution_[0];
  ChartPoint q{0.0, 0.0};
  q[0] = domain_.lo()[0] + domain_.width(0) * i / (resolution_[0] - 1);
  q[1] = domain_.lo()[1] + domain_.width(1) * j / (resolution_[1] - 1);
  return q;
}

int GridDistance::nearest_node(const ChartPoint& q) const {
  auto snap = [&](int axis) {
    const int n = resolution_[static_cast<std::size_t>(axis)];
    const double t = (q[axis] - domain_.lo()[axis]) / domain_.width(axis) * (n - 1);
    return std::clamp(static_cast<int>(std::lround(t)), 0, n - 1);
  };
  return index(snap(0), snap(1));
}

void GridDistance::write_csv(std::ostream& os) const {
  os << std::setprecision(15) << "x,y,distance\n";
  for (int flat = 0; flat < static_cast<int>(distances_.size()); ++flat) {
    const ChartPoint q = node(flat);
    os << q[0] << "," << q[1] << "," << distances_[static_cast<std::size_t>(flat)] << "\n";
  }
}

GridDistance grid_distance(const ImmersedManifold& m, const ChartPoint& p, int resolution) {
  return grid_distance(m, p, GridResolution{resolution, resolution});
}

GridDistance grid_distance(const ImmersedManifold& m, const ChartPoint& p, GridResolution resolution) {
  if (m.intrinsic_dim() != 2) throw DimensionError("grid oracle supports two-dimensional charts only");
  if (resolution[0] < 8 || resolution[1] < 8) throw DomainError("grid resolution must be at least 8 per axis");
  require_in_domain(m, p);

  const int nx = resolution[0];
  const int ny = resolution[1];
  const std::size_t n = static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny);
  GridDistance shape(m.domain(), resolution, 0, {});
  const int source = shape.nearest_node(p);

  // Weights for the four undirected edge directions out of each node; the
  // other four are looked up from the neighbour so weights are symmetric.
  constexpr std::array<std::array<int, 2>, 4> kForward{{{1, 0}, {0, 1}, {1, 1}, {1, -1}}};
  std::vector<std::array<double, 4>> weight(n);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int a = shape.index(i, j);
      for (std::size_t e = 0; e < kForward.size(); ++e) {
        const int ni = i + kForward[e][0];
        const int nj = j + kForward[e][1];
        double w = std::numeric_limits<double>::infinity();
        if (ni >= 0 && ni < nx && nj >= 0 && nj < ny) {
          DiscreteCurve segment;
          segment.points = {shape.node(a), shape.node(shape.index(ni, nj))};
          segment.times = {0.0, 1.0};
          w = curve_length(m, segment);
        }
        weight[static_cast<std::size_t>(a)][e] = w;
      }
    }
  }

  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  using Entry = std::pair<double, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> frontier;
  dist[static_cast<std::size_t>(source)] = 0.0;
  frontier.emplace(0.0, source);
  while (!frontier.empty()) {
    const auto [d, a] = frontier.top();
    frontier.pop();
    if (d > dist[static_cast<std::size_t>(a)]) continue;
    const int i = a % nx;
    const int j = a / nx;
    for (std::size_t e = 0; e < kForward.size(); ++e) {
      for (int sign : {1, -1}) {
        const int ni = i + sign * kForward[e][0];
        const int nj = j + sign * kForward[e][1];
        if (ni < 0 || ni >= nx || nj < 0 || nj >= ny) continue;
        const int b = shape.index(ni, nj);
        const double w = sign > 0 ? weight[static_cast<std::size_t>(a)][e] : weight[static_cast<std::size_t>(b)][e];
        const double candidate = d + w;
        if (candidate < dist[static_cast<std::size_t>(b)]) {
          dist[static_cast<std::size_t>(b)] = candidate;
          frontier.emplace(candidate, b);
        }
      }
    }
  }
  for (double d : dist) {
    if (!std::isfinite(d)) throw DisconnectedError("grid graph is disconnected from the source node");
  }
  return GridDistance(m.domain(), resolution, source, std::move(dist));
}

ChartVector finite_diff_grad(const std::function<double(const ChartVector&)>& f, const ChartVector& x,
                             double h) {
  if (!(h > 0.0)) throw DomainError("finite-difference step must be positive");
  ChartVector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    ChartVector plus = x, minus = x;
    plus[i] += h;
    minus[i] -= h;
    g[i] = (f(plus) - f(minus)) / (2.0 * h);
  }
  return g;
}

AnalyticDistance plane_exact_distance(const ImmersedManifold& plane, const ChartPoint& p, double factor) {
  return AnalyticDistance(
      plane, p, [p, factor](const ChartPoint& q) { return factor * (q.coords - p.coords).norm(); },
      [p, factor](const ChartPoint& q) -> ChartVector {
        const ChartVector d = q.coords - p.coords;
        const double r = d.norm();
        if (r == 0.0) return ChartVector::Zero(d.size());
        return (factor / r) * d;
      });
}

AnalyticDistance sphere_exact_distance(const ImmersedManifold& sphere, const ChartPoint& p) {
  const Eigen::VectorXd xp = immerse(sphere, p);
  return AnalyticDistance(
      sphere, p,
      [sphere, xp](const ChartPoint& q) {
        const double c = std::clamp(xp.dot(immerse(sphere, q)), -1.0, 1.0);
        return std::acos(c);
      },
      [sphere, xp](const ChartPoint& q) -> ChartVector {
        const ImmersionJet jet = immersion_jet(sphere, q, false);
        const double c = std::clamp(xp.dot(jet.position), -1.0, 1.0);
        const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
        if (s == 0.0) return ChartVector::Zero(q.dim());
        // d/dq arccos(c) = −(∂c/∂q)/sqrt(1 − c²)
        return -(jet.jacobian.transpose() * xp) / s;
      });
}

}  // namespace geodesic_atlas
