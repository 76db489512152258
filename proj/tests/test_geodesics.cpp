#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "geodesic_atlas/geodesics.hpp"
#include "geodesic_atlas/geometry.hpp"
#include "geodesic_atlas/oracle.hpp"

using namespace geodesic_atlas;

namespace {

TangentVector at(const ChartPoint& q, double a, double b) {
  TangentVector v{q, ChartVector(2)};
  v.components << a, b;
  return v;
}

double speed2(const ImmersedManifold& m, const GeodesicState& s) {
  const MetricData g = metric(m, s.position);
  return s.velocity.dot(g.g * s.velocity);
}

// Quarter of the great circle through (1,0,0) tilted by `tilt` out of the equator.
DiscreteCurve tilted_quarter(int n, double tilt) {
  DiscreteCurve c;
  for (int k = 0; k < n; ++k) {
    const double t = (std::numbers::pi / 2) * k / (n - 1);
    const double x = std::cos(t), y = std::sin(t) * std::cos(tilt), z = std::sin(t) * std::sin(tilt);
    c.points.push_back(ChartPoint{std::atan2(y, x), std::asin(z)});
    c.times.push_back(t);
  }
  return c;
}

}  // namespace

TEST_CASE("integrate_geodesic: straight line on the plane") {
  const ImmersedManifold plane = make_plane();
  const ChartPoint q0{0.0, 0.0};
  const DiscreteCurve c = integrate_geodesic(plane, q0, at(q0, 1.0, 0.0), 1.0, 100);
  REQUIRE(c.size() == 101);
  CHECK(c.times.front() == 0.0);
  CHECK(c.times.back() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(c.points.back()[0] - 1.0) < 1e-12);
  CHECK(std::abs(c.points.back()[1]) < 1e-12);
}

TEST_CASE("integrate_geodesic: sphere great circle closes after 2π") {
  const ImmersedManifold sphere = make_unit_sphere();
  const ChartPoint q0{0.0, 0.0};
  const DiscreteCurve c = integrate_geodesic(sphere, q0, at(q0, 1.0, 0.0), 2 * std::numbers::pi, 1000);
  CHECK(sphere.domain().displacement(q0, c.points.back()).norm() < 1e-6);
}

TEST_CASE("integrate_geodesic: speed is conserved") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const ImmersedManifold sphere = make_unit_sphere();
  const ImmersedManifold peaks = make_peaks(0.3);
  for (int s = 0; s < 5; ++s) {
    const ChartPoint q0{u(rng) * 0.5, u(rng) * 0.5};
    const auto states = integrate_geodesic_states(sphere, q0, at(q0, u(rng), 0.3 * u(rng)).components, 1.0, 1000);
    const double v0 = speed2(sphere, states.front());
    for (const auto& st : states) CHECK(std::abs(speed2(sphere, st) - v0) / v0 < 1e-6);
  }
  const ChartPoint q0{0.3, -0.4};
  const auto states = integrate_geodesic_states(peaks, q0, at(q0, 0.4, 0.5).components, 1.0, 1000);
  const double v0 = speed2(peaks, states.front());
  for (const auto& st : states) CHECK(std::abs(speed2(peaks, st) - v0) / v0 < 1e-6);
}

TEST_CASE("integrate_geodesic: RK4 order under step halving") {
  const ImmersedManifold sphere = make_unit_sphere();
  const ChartPoint q0{0.0, 0.2};
  const double alpha = 0.4;  // heading measured from the u axis
  const ChartVector v0 = at(q0, std::cos(alpha) / std::cos(0.2), std::sin(alpha)).components;
  const double t_end = 1.5;
  // Analytic endpoint: rotate within the great-circle plane.
  const Eigen::Vector3d x0 = immerse(sphere, q0);
  const Eigen::Vector3d xdot = jacobian(sphere, q0) * Eigen::Vector2d(v0[0], v0[1]);
  const Eigen::Vector3d xe = std::cos(t_end) * x0 + std::sin(t_end) * xdot;
  const ChartPoint exact{std::atan2(xe[1], xe[0]), std::asin(xe[2])};
  auto error = [&](int n) {
    const auto c = integrate_geodesic_states(sphere, q0, v0, t_end, n);
    return sphere.domain().displacement(exact, c.back().position).norm();
  };
  const double e1 = error(20), e2 = error(40);
  CHECK(e1 / e2 >= 12.0);
}

TEST_CASE("integrate_geodesic: errors") {
  const ImmersedManifold plane = make_plane();
  const ChartPoint q0{2.5, 0.0};
  try {
    integrate_geodesic(plane, q0, at(q0, 1.0, 0.0), 2.0, 100);
    FAIL("expected DomainExitError");
  } catch (const DomainExitError& e) {
    CHECK(plane.domain().contains(e.last_state().position));
    CHECK(e.last_state().position[0] > 2.9);
  }
  CHECK_THROWS_AS(integrate_geodesic(plane, q0, at(q0, 1.0, 0.0), 1.0, 0), DomainError);
  CHECK_THROWS_AS(integrate_geodesic(plane, q0, at(q0, 1.0, 0.0), -1.0, 10), DomainError);
  CHECK_THROWS_AS(integrate_geodesic(plane, q0, at(q0, std::nan(""), 0.0), 1.0, 10), NonFiniteError);
  CHECK_THROWS_AS(integrate_geodesic(plane, ChartPoint{4.0, 0.0}, at(ChartPoint{4.0, 0.0}, 1, 0), 1.0, 10),
                  DomainError);
}

TEST_CASE("curve_length") {
  const ImmersedManifold plane = make_plane();
  // Δq = (3, 4), shifted to fit inside [−3, 3]².
  DiscreteCurve diag;
  diag.points = {ChartPoint{-1.5, -2.0}, ChartPoint{1.5, 2.0}};
  diag.times = {0.0, 1.0};
  CHECK(std::abs(curve_length(plane, diag) - 5.0) < 1e-12);

  // Midpoint insertion on a straight plane segment.
  DiscreteCurve refined;
  for (int k = 0; k <= 8; ++k) {
    refined.points.push_back(ChartPoint{-1.5 + 3.0 * k / 8, -2.0 + 4.0 * k / 8});
    refined.times.push_back(k / 8.0);
  }
  CHECK(std::abs(curve_length(plane, refined) - 5.0) < 1e-12);

  const ImmersedManifold sphere = make_unit_sphere();
  const DiscreteCurve quarter = tilted_quarter(100, 0.6);
  CHECK(std::abs(curve_length(sphere, quarter) - std::numbers::pi / 2) < 1e-4);

  double previous = std::numeric_limits<double>::infinity();
  for (int n : {10, 20, 40, 80, 160}) {
    const double err = std::abs(curve_length(sphere, tilted_quarter(n, 0.6)) - std::numbers::pi / 2);
    CHECK(err <= previous);
    previous = err;
  }

  // Reversal invariance is exact.
  const ImmersedManifold peaks = make_peaks();
  DiscreteCurve wiggly, reversed;
  for (int k = 0; k < 50; ++k) {
    wiggly.points.push_back(ChartPoint{-2.0 + 0.08 * k, std::sin(0.3 * k)});
    wiggly.times.push_back(k);
  }
  reversed.points.assign(wiggly.points.rbegin(), wiggly.points.rend());
  reversed.times = wiggly.times;
  CHECK(curve_length(peaks, reversed) == curve_length(peaks, wiggly));

  DiscreteCurve still;
  still.points = {ChartPoint{0.5, 0.5}, ChartPoint{0.5, 0.5}, ChartPoint{0.5, 0.5}};
  still.times = {0.0, 1.0, 2.0};
  CHECK(curve_length(peaks, still) == 0.0);

  DiscreteCurve outside;
  outside.points = {ChartPoint{0.0, 0.0}, ChartPoint{3.5, 0.0}};
  outside.times = {0.0, 1.0};
  CHECK_THROWS_AS(curve_length(plane, outside), DomainError);
}

TEST_CASE("trace_flow: exact plane field traces the straight segment") {
  const ImmersedManifold plane = make_plane();
  const ChartPoint p{0.5, -0.5};
  const AnalyticDistance field = plane_exact_distance(plane, p);
  const ChartPoint q{2.0, 1.5};
  TraceOptions opts;
  opts.step = 0.01;
  const DiscreteCurve path = trace_flow(field, q, opts);
  CHECK((path.points.back().coords - p.coords).norm() < opts.step);
  const ChartVector dir = (p.coords - q.coords).normalized();
  for (std::size_t k = 1; k < path.size(); ++k) {
    const ChartVector d = path.points[k].coords - q.coords;
    CHECK(std::abs(d[0] * dir[1] - d[1] * dir[0]) < 1e-12);
    CHECK(field.phi(path.points[k]) < field.phi(path.points[k - 1]));
  }
  CHECK(std::abs(curve_length(plane, path) - (field.phi(q) - field.phi(path.points.back()))) < 1e-9);

  // The flow and the geodesic ODE from the same initial vector coincide.
  const FieldSample s = field.evaluate(q);
  const TangentVector v0{q, -s.grad_intrinsic};
  const DiscreteCurve ode = integrate_geodesic(plane, q, v0, path.times.back(), static_cast<int>(path.size() - 1));
  CHECK(max_pointwise_deviation(plane.domain(), path, ode) < 1e-3);
}

TEST_CASE("trace_flow: sphere field follows the great circle") {
  const ImmersedManifold sphere = make_unit_sphere();
  const ChartPoint p{0.0, 0.0};
  const AnalyticDistance field = sphere_exact_distance(sphere, p);
  const ChartPoint q{1.0, 0.6};
  TraceOptions opts;
  opts.step = 0.01;
  const DiscreteCurve path = trace_flow(field, q, opts);
  CHECK(std::abs(curve_length(sphere, path) - (field.phi(q) - field.phi(path.points.back()))) < 1e-4);
  const TangentVector v0{q, -field.evaluate(q).grad_intrinsic};
  const DiscreteCurve ode = integrate_geodesic(sphere, q, v0, path.times.back(), static_cast<int>(path.size() - 1));
  CHECK(max_pointwise_deviation(sphere.domain(), path, ode) < 1e-6);
}

TEST_CASE("trace_flow: stagnation on a field with a stationary point") {
  const ImmersedManifold plane = make_plane();
  const ChartPoint p{0.0, 0.0};
  // φ has a spurious local minimum at (2, 0) where the flow stalls.
  const AnalyticDistance bad(
      plane, p, [](const ChartPoint& q) { return 1.0 + (q[0] - 2.0) * (q[0] - 2.0) + q[1] * q[1]; },
      [](const ChartPoint& q) -> ChartVector {
        ChartVector g(2);
        g << 2.0 * (q[0] - 2.0), 2.0 * q[1];
        return g;
      });
  TraceOptions opts;
  opts.step = 0.05;
  try {
    trace_flow(bad, ChartPoint{2.5, 0.5}, opts);
    FAIL("expected StagnationError");
  } catch (const StagnationError& e) {
    CHECK(e.partial_path().size() > 1);
    CHECK((e.partial_path().points.back().coords - ChartVector(ChartPoint{2.0, 0.0}.coords)).norm() < 0.05);
  }
}

TEST_CASE("write_curve_csv") {
  const ImmersedManifold peaks = make_peaks();
  DiscreteCurve c;
  c.points = {ChartPoint{0.0, 0.0}, ChartPoint{0.5, 0.0}};
  c.times = {0.0, 0.5};
  std::ostringstream os;
  write_curve_csv(os, peaks, c);
  const std::string text = os.str();
  CHECK(text.rfind("t,q1,q2,x1,x2,x3\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 3);
}
