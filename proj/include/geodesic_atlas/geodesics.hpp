#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "geodesic_atlas/distance_function.hpp"
#include "geodesic_atlas/errors.hpp"
#include "geodesic_atlas/manifold.hpp"

namespace geodesic_atlas {

struct GeodesicState {
  ChartPoint position;
  ChartVector velocity;
  double time = 0.0;
};

/// Ordered chart points with strictly increasing times.
struct DiscreteCurve {
  std::vector<ChartPoint> points;
  std::vector<double> times;

  std::size_t size() const { return points.size(); }
};

/// The trajectory left the chart domain; carries the last in-domain state.
class DomainExitError : public Error {
 public:
  DomainExitError(const std::string& what, GeodesicState last) : Error(what), last_(std::move(last)) {}
  const GeodesicState& last_state() const { return last_; }

 private:
  GeodesicState last_;
};

/// Flow tracing stopped making progress (typically near a cut locus).
class StagnationError : public Error {
 public:
  StagnationError(const std::string& what, DiscreteCurve partial)
      : Error(what), partial_(std::move(partial)) {}
  const DiscreteCurve& partial_path() const { return partial_; }

 private:
  DiscreteCurve partial_;
};

/// Fixed-step RK4 on γ̇ = v, v̇^k = −Γ^k_{ij} v^i v^j. Returns n_steps + 1 states.
std::vector<GeodesicState> integrate_geodesic_states(const ImmersedManifold& m, const ChartPoint& q0,
                                                     const ChartVector& v0, double t_end, int n_steps);

DiscreteCurve integrate_geodesic(const ImmersedManifold& m, const ChartPoint& q0, const TangentVector& v0,
                                 double t_end, int n_steps);

/// Σ sqrt(Δqᵀ g(midpoint) Δq) over consecutive points; each term is floored
/// at the ambient chord |ι(b) − ι(a)|.
double curve_length(const ImmersedManifold& m, const DiscreteCurve& c);

struct TraceOptions {
  double step = 1e-2;
  int max_steps = 10000;
  /// Stop once φ drops below this; negative means "use step".
  double stop_phi = -1.0;
};

/// Integrates ż = −grad φ(z) with RK4 from q towards the field's origin.
/// Steps that fail to decrease φ are retried at half length (up to 8 times).
DiscreteCurve trace_flow(const DistanceFunction& field, const ChartPoint& q, const TraceOptions& options);

/// Largest chart distance between `a` and `b`, comparing each point of `a`
/// with `b` linearly interpolated at the same time (times clamped to b's range).
double max_pointwise_deviation(const Domain& domain, const DiscreteCurve& a, const DiscreteCurve& b);

/// CSV rows `t,q1..qD,x1..xN` (no header comment).
void write_curve_csv(std::ostream& os, const ImmersedManifold& m, const DiscreteCurve& c);

}  // namespace geodesic_atlas
