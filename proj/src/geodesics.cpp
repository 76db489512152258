#include "geodesic_atlas/geodesics.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "geodesic_atlas/geometry.hpp"

namespace geodesic_atlas {

namespace {

struct PhaseDerivative {
  ChartVector dq;
  ChartVector dv;
};

PhaseDerivative geodesic_rhs(const ImmersedManifold& m, const ChartPoint& q, const ChartVector& v) {
  const MetricData md = christoffel(m, q);
  return {v, -md.christoffel.contract(v, v)};
}

ChartPoint offset(const ChartPoint& q, const ChartVector& d) { return ChartPoint(q.coords + d); }

}  // namespace

std::vector<GeodesicState> integrate_geodesic_states(const ImmersedManifold& m, const ChartPoint& q0,
                                                     const ChartVector& v0, double t_end, int n_steps) {
  require_in_domain(m, q0);
  if (n_steps < 1) throw DomainError("n_steps must be at least 1");
  if (!(t_end > 0.0)) throw DomainError("t_end must be positive");
  if (v0.size() != q0.dim()) throw DimensionError("initial velocity dimension mismatch");
  if (!v0.allFinite()) throw NonFiniteError("initial velocity is not finite");

  const Domain& domain = m.domain();
  const double h = t_end / n_steps;
  std::vector<GeodesicState> states;
  states.reserve(static_cast<std::size_t>(n_steps) + 1);
  states.push_back({q0, v0, 0.0});

  for (int step = 0; step < n_steps; ++step) {
    const GeodesicState& s = states.back();
    auto stage = [&](const ChartVector& dq, const ChartVector& dv) {
      const ChartPoint q = offset(s.position, dq);
      if (!domain.contains(q)) {
        std::ostringstream os;
        os << "geodesic left the domain of " << m.name() << " after t = " << s.time;
        throw DomainExitError(os.str(), s);
      }
      return geodesic_rhs(m, q, s.velocity + dv);
    };
    const ChartVector zero = ChartVector::Zero(q0.dim());
    const PhaseDerivative k1 = stage(zero, zero);
    const PhaseDerivative k2 = stage(0.5 * h * k1.dq, 0.5 * h * k1.dv);
    const PhaseDerivative k3 = stage(0.5 * h * k2.dq, 0.5 * h * k2.dv);
    const PhaseDerivative k4 = stage(h * k3.dq, h * k3.dv);

    GeodesicState next;
    next.position = offset(s.position, (h / 6.0) * (k1.dq + 2.0 * k2.dq + 2.0 * k3.dq + k4.dq));
    next.velocity = s.velocity + (h / 6.0) * (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv);
    next.time = (step + 1) * h;
    if (!next.position.is_finite() || !next.velocity.allFinite()) {
      throw NonFiniteError("geodesic integration blew up at t = " + std::to_string(next.time));
    }
    if (!domain.contains(next.position)) {
      throw DomainExitError("geodesic left the domain of " + m.name(), s);
    }
    next.position = domain.wrap(next.position);
    states.push_back(std::move(next));
  }
  return states;
}

DiscreteCurve integrate_geodesic(const ImmersedManifold& m, const ChartPoint& q0, const TangentVector& v0,
                                 double t_end, int n_steps) {
  if (v0.base.dim() != q0.dim() || v0.base.coords != q0.coords) {
    throw DimensionError("initial velocity is not based at the initial point");
  }
  const auto states = integrate_geodesic_states(m, q0, v0.components, t_end, n_steps);
  DiscreteCurve c;
  c.points.reserve(states.size());
  c.times.reserve(states.size());
  for (const auto& s : states) {
    c.points.push_back(s.position);
    c.times.push_back(s.time);
  }
  return c;
}

namespace {

bool lex_less(const ChartPoint& a, const ChartPoint& b) {
  for (int i = 0; i < a.dim(); ++i) {
    if (a[i] != b[i]) return a[i] < b[i];
  }
  return false;
}

// Segment length is max(midpoint-metric estimate, ambient chord), measured
// from the lexicographically smaller end so a reversed curve produces
// bit-identical terms.
double segment_length(const ImmersedManifold& m, const ChartPoint& a, const ChartPoint& b) {
  const ChartPoint& from = lex_less(b, a) ? b : a;
  const ChartPoint& to = lex_less(b, a) ? a : b;
  const ChartVector delta = m.domain().displacement(from, to);
  if (delta.isZero(0.0)) return 0.0;
  const MetricData g = metric(m, offset(from, 0.5 * delta));
  const double midpoint = std::sqrt(std::max(0.0, delta.dot(g.g * delta)));
  // The ambient chord is a strict lower bound on the true segment length.
  const double chord = (immerse(m, to) - immerse(m, from)).norm();
  return std::max(midpoint, chord);
}

}  // namespace

double curve_length(const ImmersedManifold& m, const DiscreteCurve& c) {
  if (c.points.size() < 2) throw DomainError("a curve needs at least two points");
  for (const auto& q : c.points) require_in_domain(m, q);
  std::vector<double> pieces;
  pieces.reserve(c.points.size() - 1);
  for (std::size_t i = 0; i + 1 < c.points.size(); ++i) {
    pieces.push_back(segment_length(m, c.points[i], c.points[i + 1]));
  }
  if (lex_less(c.points.back(), c.points.front())) std::reverse(pieces.begin(), pieces.end());
  double total = 0.0;
  for (double piece : pieces) total += piece;
  return total;
}

DiscreteCurve trace_flow(const DistanceFunction& field, const ChartPoint& q, const TraceOptions& options) {
  const ImmersedManifold& m = field.manifold();
  require_in_domain(m, q);
  if (!(options.step > 0.0)) throw DomainError("trace step must be positive");
  const double stop_phi = options.stop_phi < 0.0 ? options.step : options.stop_phi;
  const Domain& domain = m.domain();

  DiscreteCurve path;
  path.points.push_back(q);
  path.times.push_back(0.0);
  double phi = field.phi(q);
  std::deque<double> recent_decrease;
  double window_sum = 0.0;

  auto velocity = [&](const ChartPoint& z, const GeodesicState& last) -> ChartVector {
    if (!domain.contains(z)) throw DomainExitError("flow trace left the domain of " + m.name(), last);
    return -field.evaluate(z).grad_intrinsic;
  };

  for (int k = 0; k < options.max_steps && phi >= stop_phi; ++k) {
    const ChartPoint& z = path.points.back();
    const GeodesicState last{z, ChartVector::Zero(z.dim()), path.times.back()};
    const ChartVector k1 = velocity(z, last);

    double h = options.step;
    bool accepted = false;
    for (int attempt = 0; attempt < 8 && !accepted; ++attempt, h *= 0.5) {
      const ChartVector k2 = velocity(offset(z, 0.5 * h * k1), last);
      const ChartVector k3 = velocity(offset(z, 0.5 * h * k2), last);
      const ChartVector k4 = velocity(offset(z, h * k3), last);
      const ChartPoint next = offset(z, (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
      if (!domain.contains(next)) throw DomainExitError("flow trace left the domain of " + m.name(), last);
      const ChartPoint wrapped = domain.wrap(next);
      const double next_phi = field.phi(wrapped);
      if (!std::isfinite(next_phi)) throw NonFiniteError("distance field is not finite along the trace");
      if (next_phi < phi) {
        const double decrease = phi - next_phi;
        recent_decrease.push_back(decrease);
        window_sum += decrease;
        if (recent_decrease.size() > 10) {
          window_sum -= recent_decrease.front();
          recent_decrease.pop_front();
        }
        path.points.push_back(wrapped);
        path.times.push_back(path.times.back() + h);
        phi = next_phi;
        accepted = true;
      }
    }
    if (!accepted) {
      throw StagnationError("flow trace cannot decrease phi below " + std::to_string(phi), path);
    }
    if (recent_decrease.size() == 10 && window_sum < 1e-9) {
      throw StagnationError("flow trace stagnated at phi = " + std::to_string(phi), path);
    }
  }
  return path;
}

double max_pointwise_deviation(const Domain& domain, const DiscreteCurve& a, const DiscreteCurve& b) {
  if (a.points.empty() || b.points.empty()) return 0.0;
  double worst = 0.0;
  std::size_t j = 0;
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    const double t = std::clamp(a.times[i], b.times.front(), b.times.back());
    while (j + 1 < b.times.size() && b.times[j + 1] < t) ++j;
    ChartPoint bt = b.points[j];
    if (j + 1 < b.times.size()) {
      const double span = b.times[j + 1] - b.times[j];
      const double w = span > 0.0 ? (t - b.times[j]) / span : 0.0;
      bt = ChartPoint(b.points[j].coords + w * domain.displacement(b.points[j], b.points[j + 1]));
    }
    worst = std::max(worst, domain.displacement(a.points[i], bt).norm());
  }
  return worst;
}

void write_curve_csv(std::ostream& os, const ImmersedManifold& m, const DiscreteCurve& c) {
  os << std::setprecision(15);
  os << "t";
  for (int i = 0; i < m.intrinsic_dim(); ++i) os << ",q" << i + 1;
  for (int i = 0; i < m.ambient_dim(); ++i) os << ",x" << i + 1;
  os << "\n";
  for (std::size_t k = 0; k < c.points.size(); ++k) {
    os << c.times[k];
    for (int i = 0; i < m.intrinsic_dim(); ++i) os << "," << c.points[k][i];
    const Eigen::VectorXd x = immerse(m, c.points[k]);
    for (Eigen::Index i = 0; i < x.size(); ++i) os << "," << x[i];
    os << "\n";
  }
}

}  // namespace geodesic_atlas
