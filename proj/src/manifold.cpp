#include "geodesic_atlas/manifold.hpp"

#include <cmath>
#include <numbers>

#include "geodesic_atlas/errors.hpp"

namespace geodesic_atlas {

ChartPoint::ChartPoint(std::initializer_list<double> values) {
  coords.resize(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double v : values) coords[i++] = v;
}

Domain::Domain(ChartVector lo, ChartVector hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
  if (lo_.size() != hi_.size() || lo_.size() < 1 || lo_.size() > kMaxDim) {
    throw DimensionError("domain bounds must have matching dimension in [1, 8]");
  }
  for (int i = 0; i < dim(); ++i) {
    if (!(lo_[i] < hi_[i]) || !std::isfinite(lo_[i]) || !std::isfinite(hi_[i])) {
      throw DomainError("domain bound " + std::to_string(i) + " is empty or non-finite");
    }
  }
}

Domain& Domain::set_periodic(int i, bool periodic) {
  periodic_[static_cast<std::size_t>(i)] = periodic;
  return *this;
}

bool Domain::contains(const ChartPoint& q, double tol) const {
  if (q.dim() != dim()) return false;
  for (int i = 0; i < dim(); ++i) {
    if (!std::isfinite(q[i])) return false;
    if (periodic(i)) continue;
    if (q[i] < lo_[i] - tol || q[i] > hi_[i] + tol) return false;
  }
  return true;
}

ChartPoint Domain::wrap(const ChartPoint& q) const {
  ChartPoint r = q;
  for (int i = 0; i < dim(); ++i) {
    if (!periodic(i)) continue;
    const double w = width(i);
    double t = std::fmod(q[i] - lo_[i], w);
    if (t < 0) t += w;
    r[i] = lo_[i] + t;
  }
  return r;
}

ChartVector Domain::displacement(const ChartPoint& a, const ChartPoint& b) const {
  ChartVector d = b.coords - a.coords;
  for (int i = 0; i < dim(); ++i) {
    if (!periodic(i)) continue;
    const double w = width(i);
    d[i] -= w * std::round(d[i] / w);
  }
  return d;
}

ChartPoint Domain::sample_uniform(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ChartPoint q;
  q.coords.resize(dim());
  for (int i = 0; i < dim(); ++i) q[i] = lo_[i] + unit(rng) * width(i);
  return q;
}

double Domain::volume() const {
  double v = 1.0;
  for (int i = 0; i < dim(); ++i) v *= width(i);
  return v;
}

ImmersedManifold::ImmersedManifold(std::string name, int intrinsic_dim, int ambient_dim,
                                   Domain domain, ImmersionFn immersion, double scale)
    : name_(std::move(name)),
      intrinsic_dim_(intrinsic_dim),
      ambient_dim_(ambient_dim),
      domain_(std::move(domain)),
      immersion_(std::move(immersion)),
      scale_(scale) {
  if (intrinsic_dim_ < 1 || intrinsic_dim_ > kMaxDim || ambient_dim_ < intrinsic_dim_) {
    throw DimensionError("immersion requires N >= D >= 1 and D <= 8");
  }
  if (domain_.dim() != intrinsic_dim_) {
    throw DimensionError("domain dimension does not match intrinsic dimension");
  }
}

namespace {

Domain square(double lo, double hi) {
  ChartVector l(2), h(2);
  l << lo, lo;
  h << hi, hi;
  return Domain(l, h);
}

}  // namespace

ImmersedManifold ImmersedManifold::with_domain(Domain domain) const {
  if (domain.dim() != intrinsic_dim_) throw DimensionError("domain dimension does not match the manifold");
  return ImmersedManifold(name_, intrinsic_dim_, ambient_dim_, std::move(domain), immersion_, scale_);
}

ImmersedManifold make_plane() {
  return ImmersedManifold("plane", 2, 3, square(-3.0, 3.0),
                          [](std::span<const Dual2> q, std::span<Dual2> x) {
                            x[0] = q[0];
                            x[1] = q[1];
                            x[2] = Dual2::constant(0.0, q[0].seeds());
                          });
}

ImmersedManifold make_unit_sphere() {
  ChartVector lo(2), hi(2);
  lo << -std::numbers::pi, -1.3;
  hi << std::numbers::pi, 1.3;
  Domain domain(lo, hi);
  domain.set_periodic(0);
  return ImmersedManifold("unit-sphere", 2, 3, domain,
                          [](std::span<const Dual2> q, std::span<Dual2> x) {
                            const Dual2 cv = cos(q[1]);
                            x[0] = cos(q[0]) * cv;
                            x[1] = sin(q[0]) * cv;
                            x[2] = sin(q[1]);
                          });
}

ImmersedManifold make_peaks(double scale) {
  if (!std::isfinite(scale)) throw DomainError("peaks scale must be finite");
  return ImmersedManifold(
      "peaks", 2, 3, square(-3.0, 3.0),
      [scale](std::span<const Dual2> q, std::span<Dual2> x) {
        x[0] = q[0];
        x[1] = q[1];
        x[2] = scale * peaks_height(q[0], q[1]);
      },
      scale);
}

ImmersedManifold make_manifold(const std::string& name, double scale) {
  if (name == "plane") return make_plane();
  if (name == "unit-sphere") return make_unit_sphere();
  if (name == "peaks") return make_peaks(scale);
  throw ConfigError("unknown manifold '" + name + "' (expected plane, unit-sphere or peaks)");
}

}  // namespace geodesic_atlas
