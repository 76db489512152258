// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance [--work DIR] [criterion ...]
//
// With no criterion numbers all ten run. The exit status is the number of
// failing criteria.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "geodesic_atlas/cli.hpp"
#include "geodesic_atlas/errors.hpp"
#include "geodesic_atlas/geodesics.hpp"
#include "geodesic_atlas/geometry.hpp"
#include "geodesic_atlas/model.hpp"
#include "geodesic_atlas/oracle.hpp"
#include "geodesic_atlas/sampling.hpp"
#include "geodesic_atlas/stats.hpp"
#include "geodesic_atlas/training.hpp"

using namespace geodesic_atlas;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

fs::path g_work = "acceptance_work";

std::string fmt(double v, int precision = 3) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

void require_cli(const std::vector<std::string>& args) {
  std::ostringstream out;
  const int code = run_cli(args, out, std::cerr);
  std::cout << out.str();
  if (code != 0) {
    std::string joined;
    for (const auto& a : args) joined += a + " ";
    throw std::runtime_error("geodesic-atlas " + joined + "exited with " + std::to_string(code));
  }
}

std::string slurp(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

ChartPoint random_point(const Domain& d, std::mt19937_64& rng, double inset) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ChartPoint q;
  q.coords.resize(d.dim());
  for (int i = 0; i < d.dim(); ++i) q[i] = d.lo()[i] + inset + u(rng) * (d.width(i) - 2 * inset);
  return q;
}

// ---- 1 ---------------------------------------------------------------------

Outcome geometry_exactness() {
  std::mt19937_64 rng(101);
  const ImmersedManifold plane = make_plane();
  double g_err = 0, gamma_err = 0, r_err = 0;
  for (int s = 0; s < 100; ++s) {
    const ChartPoint q = random_point(plane.domain(), rng, 1e-3);
    const MetricData md = christoffel(plane, q);
    g_err = std::max(g_err, (md.g - ChartMatrix::Identity(2, 2)).cwiseAbs().maxCoeff());
    for (int k = 0; k < 2; ++k)
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) gamma_err = std::max(gamma_err, std::abs(md.christoffel(k, i, j)));
    r_err = std::max(r_err, std::abs(ricci_scalar(plane, q)));
  }

  const ImmersedManifold sphere = make_unit_sphere();
  double sphere_err = 0;
  for (int s = 0; s < 100; ++s) {
    const ChartPoint q = random_point(sphere.domain(), rng, 1e-3);
    sphere_err = std::max(sphere_err, std::abs(ricci_scalar(sphere, q) - 2.0));
  }

  double fd_err = 0;
  for (const auto& m : {make_plane(), make_unit_sphere(), make_peaks(), make_peaks(0.3)}) {
    for (int s = 0; s < 20; ++s) {
      const ChartPoint q = random_point(m.domain(), rng, 1e-3);
      const Eigen::MatrixXd j = jacobian(m, q);
      for (int a = 0; a < m.ambient_dim(); ++a) {
        auto comp = [&](const ChartVector& v) { return immerse(m, ChartPoint(v))[a]; };
        const ChartVector row = finite_diff_grad(comp, q.coords, 1e-5);
        for (int i = 0; i < m.intrinsic_dim(); ++i) {
          fd_err = std::max(fd_err, std::abs(j(a, i) - row[i]) / std::max(1.0, std::abs(row[i])));
        }
      }
    }
  }
  const bool pass = g_err < 1e-6 && gamma_err < 1e-6 && r_err < 1e-6 && sphere_err < 1e-4 && fd_err < 1e-6;
  return {pass, "plane max|g-I| " + fmt(g_err) + ", max|Gamma| " + fmt(gamma_err) + ", max|R| " + fmt(r_err) +
                    " (100 pts); sphere max|R-2| " + fmt(sphere_err) + " (100 pts); dual vs FD Jacobian max rel " +
                    fmt(fd_err)};
}

// ---- 2 ---------------------------------------------------------------------

TangentVector tangent(const ChartPoint& q, double a, double b) {
  TangentVector v{q, ChartVector(2)};
  v.components << a, b;
  return v;
}

Outcome geodesic_integrator() {
  const ImmersedManifold sphere = make_unit_sphere();
  const ChartPoint q0{0.0, 0.0};
  const DiscreteCurve loop = integrate_geodesic(sphere, q0, tangent(q0, 1.0, 0.0), 2 * std::numbers::pi, 1000);
  const double closure = sphere.domain().displacement(q0, loop.points.back()).norm();

  // Tilted great circle for speed conservation and the order study.
  const ChartPoint q1{0.0, 0.2};
  const double heading = 0.4;
  const ChartVector v1 = tangent(q1, std::cos(heading) / std::cos(0.2), std::sin(heading)).components;
  const auto states = integrate_geodesic_states(sphere, q1, v1, 1.5, 1000);
  auto speed2 = [&](const GeodesicState& s) { return s.velocity.dot(metric(sphere, s.position).g * s.velocity); };
  const double s0 = speed2(states.front());
  double speed_err = 0;
  for (const auto& st : states) speed_err = std::max(speed_err, std::abs(speed2(st) - s0) / s0);

  const double t_end = 1.5;
  const Eigen::Vector3d x0 = immerse(sphere, q1);
  const Eigen::Vector3d xdot = jacobian(sphere, q1) * Eigen::Vector2d(v1[0], v1[1]);
  const Eigen::Vector3d xe = std::cos(t_end) * x0 + std::sin(t_end) * xdot;
  const ChartPoint exact{std::atan2(xe[1], xe[0]), std::asin(xe[2])};
  auto endpoint_error = [&](int n) {
    return sphere.domain().displacement(exact, integrate_geodesic_states(sphere, q1, v1, t_end, n).back().position).norm();
  };
  const double factor = endpoint_error(20) / endpoint_error(40);
  const bool pass = closure < 1e-6 && speed_err < 1e-6 && factor >= 12.0;
  return {pass, "great-circle closure " + fmt(closure) + ", speed drift " + fmt(speed_err) +
                    " rel, RK4 halving factor " + fmt(factor, 4)};
}

// ---- 3 ---------------------------------------------------------------------

Outcome exact_residual() {
  std::mt19937_64 rng(303);
  const ImmersedManifold plane = make_plane();
  const AnalyticDistance euclid = plane_exact_distance(plane, ChartPoint{0.5, -0.5});
  double plane_err = 0;
  for (int s = 0; s < 20; ++s) {
    const ChartPoint q = plane.domain().sample_uniform(rng);
    plane_err = std::max(plane_err, std::abs(eikonal_residual(euclid, q)));
  }
  const ImmersedManifold sphere = make_unit_sphere();
  const AnalyticDistance arccos = sphere_exact_distance(sphere, ChartPoint{0.2, 0.1});
  double sphere_err = 0;
  for (int checked = 0; checked < 20;) {
    const ChartPoint q = random_point(sphere.domain(), rng, 0.05);
    const double d = arccos.phi(q);
    if (d < 0.1 || d > std::numbers::pi - 0.3) continue;  // origin and cut locus
    sphere_err = std::max(sphere_err, std::abs(eikonal_residual(arccos, q)));
    ++checked;
  }
  return {plane_err < 1e-6 && sphere_err < 1e-6,
          "max |residual|: plane Euclidean " + fmt(plane_err) + ", sphere arccos " + fmt(sphere_err) + " (20 pts each)"};
}

// ---- 4 ---------------------------------------------------------------------

Outcome plane_training() {
  const fs::path dir = g_work / "plane";
  const auto start = std::chrono::steady_clock::now();
  require_cli({"train", "plane", "--preset", "desk", "--origin", "0,0", "-o", dir.string()});
  const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / 60;

  const ImmersedManifold plane = make_plane();
  const DistanceField field = load_checkpoint(dir / "checkpoint.json", plane);
  std::vector<double> rel;
  double min_gap = std::numeric_limits<double>::infinity();
  const int n = 21;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const ChartPoint q{-3.0 + 6.0 * i / (n - 1), -3.0 + 6.0 * j / (n - 1)};
      const double phi = field.phi(q);
      const double d = std::hypot(q[0], q[1]);
      min_gap = std::min(min_gap, phi - d);
      if (d > 0) rel.push_back(std::abs(phi - d) / d);
    }
  }
  const double med = median(rel);
  const double mx = *std::max_element(rel.begin(), rel.end());
  return {med < 1e-2 && mx < 5e-2 && min_gap >= 0.0,
          "21x21 held-out grid: median rel err " + fmt(med) + ", max " + fmt(mx) + ", min(phi - d_E) " + fmt(min_gap) +
              "; wall clock " + fmt(minutes) + " min"};
}

// ---- 5 ---------------------------------------------------------------------

const ChartPoint kPeaksOrigin{0.0, 0.0};

ImmersedManifold peaks_desk() { return make_peaks(0.3); }

fs::path peaks_checkpoint() {
  const fs::path dir = g_work / "peaks";
  if (!fs::exists(dir / "checkpoint.json")) {
    require_cli({"train", "peaks", "--scale", "0.3", "--preset", "desk", "--origin", "0,0", "-o", dir.string()});
  }
  return dir / "checkpoint.json";
}

double oracle_median_rel(const DistanceFunction& field, const GridDistance& oracle) {
  std::vector<double> rel;
  for (int k = 0; k < static_cast<int>(oracle.size()); ++k) {
    if (k == oracle.source()) continue;
    const double d = oracle.at(k);
    rel.push_back(std::abs(field.phi(oracle.node(k)) - d) / d);
  }
  return median(rel);
}

Outcome peaks_training() {
  const auto start = std::chrono::steady_clock::now();
  const ImmersedManifold peaks = peaks_desk();
  const DistanceField field = load_checkpoint(peaks_checkpoint(), peaks);
  const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / 60;

  const ResidualStats audit = residual_audit(field, 33);
  const GridDistance oracle = grid_distance(peaks, field.origin(), 128);
  const double vs_oracle = oracle_median_rel(field, oracle);

  // Context only: the same comparison for the exact plane distance.
  const ImmersedManifold plane = make_plane();
  const double metrication = oracle_median_rel(plane_exact_distance(plane, field.origin()),
                                               grid_distance(plane, field.origin(), 128));
  return {audit.p90 < 0.05 && vs_oracle < 0.07,
          "scale 0.3: p90 |residual| on 33x33 " + fmt(audit.p90) + "; median |phi - D|/D vs 128x128 Dijkstra " +
              fmt(vs_oracle) + " (plane metrication alone: " + fmt(metrication) + "); wall clock " + fmt(minutes) + " min"};
}

// ---- 6 ---------------------------------------------------------------------

// Largest distance from a point of `a` to the polyline `b`, symmetrised.
// Unlike max_pointwise_deviation this ignores how each curve is timed.
double path_distance(const Domain& d, const DiscreteCurve& a, const DiscreteCurve& b) {
  auto one_way = [&](const DiscreteCurve& from, const DiscreteCurve& to) {
    double worst = 0;
    for (const auto& q : from.points) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k + 1 < to.size(); ++k) {
        const ChartVector seg = d.displacement(to.points[k], to.points[k + 1]);
        const ChartVector rel = d.displacement(to.points[k], q);
        const double t = std::clamp(rel.dot(seg) / std::max(seg.squaredNorm(), 1e-300), 0.0, 1.0);
        best = std::min(best, (rel - t * seg).norm());
      }
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(one_way(a, b), one_way(b, a));
}

Outcome flow_ode_overlap() {
  const ImmersedManifold peaks = peaks_desk();
  const DistanceField field = load_checkpoint(peaks_checkpoint(), peaks);
  std::mt19937_64 rng(606);
  double worst_dev = 0, worst_len = 0, worst_path = 0, worst_miss = 0;
  int failures = 0;
  std::string notes;
  for (int started = 0; started < 10;) {
    const ChartPoint q = random_point(peaks.domain(), rng, 0.3);
    if (std::hypot(q[0] - kPeaksOrigin[0], q[1] - kPeaksOrigin[1]) < 0.5) continue;
    ++started;
    try {
      TraceOptions options;
      options.step = 1e-2;
      const DiscreteCurve flow = trace_flow(field, q, options);
      const FieldSample s = field.evaluate(q);
      const double t_end = flow.times.back();
      const int steps = std::max(1, static_cast<int>(std::ceil(t_end / options.step)));
      const DiscreteCurve ode = integrate_geodesic(peaks, q, TangentVector{q, ChartVector(-s.grad_intrinsic)}, t_end, steps);
      const double dev = max_pointwise_deviation(peaks.domain(), flow, ode);
      const double len = std::abs(curve_length(peaks, flow) - s.phi) / s.phi;
      worst_dev = std::max(worst_dev, dev);
      worst_len = std::max(worst_len, len);
      worst_path = std::max(worst_path, path_distance(peaks.domain(), flow, ode));
      worst_miss = std::max(worst_miss, peaks.domain().displacement(field.origin(), ode.points.back()).norm());
      if (dev >= 0.05 || len >= 0.05) {
        ++failures;
        notes += " [q=(" + fmt(q[0]) + "," + fmt(q[1]) + ") dev " + fmt(dev) + " len " + fmt(len) + "]";
      }
    } catch (const Error& e) {
      ++failures;
      notes += " [q=(" + fmt(q[0]) + "," + fmt(q[1]) + ") " + e.what() + "]";
    }
  }
  return {failures == 0, "10 starts: max deviation " + fmt(worst_dev) + " chart units, max |length - phi|/phi " +
                             fmt(worst_len) + ", failing starts " + std::to_string(failures) + notes +
                             "; diagnostics (not gated): max time-free path distance " + fmt(worst_path) +
                             ", max ODE endpoint miss of the origin " + fmt(worst_miss)};
}

// ---- 7 ---------------------------------------------------------------------

double curvature_rank_correlation(const ImmersedManifold& m, const std::vector<ChartPoint>& pts, int n) {
  const Domain& d = m.domain();
  std::vector<double> counts(static_cast<std::size_t>(n * n), 0.0), curvature;
  for (const auto& q : pts) {
    const int i = std::min(n - 1, static_cast<int>((q[0] - d.lo()[0]) / d.width(0) * n));
    const int j = std::min(n - 1, static_cast<int>((q[1] - d.lo()[1]) / d.width(1) * n));
    counts[static_cast<std::size_t>(j * n + i)] += 1;
  }
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      double sum = 0;
      for (int b = 0; b < 4; ++b)
        for (int a = 0; a < 4; ++a)
          sum += std::abs(ricci_scalar(m, ChartPoint{d.lo()[0] + d.width(0) * (i + (a + 0.5) / 4) / n,
                                                      d.lo()[1] + d.width(1) * (j + (b + 0.5) / 4) / n}));
      curvature.push_back(sum / 16);
    }
  }
  return spearman(counts, curvature);
}

Outcome curvature_sampling() {
  std::string detail;
  bool pass = true;
  for (double scale : {1.0, 0.3}) {
    const ImmersedManifold peaks = make_peaks(scale);
    const LogDensity ld = [&](const ChartPoint& q) { return curvature_logdensity(peaks, q); };
    const double rho = curvature_rank_correlation(peaks, pool(run_chains(ld, peaks.domain(), ChainConfig::desk())), 20);
    pass = pass && rho > 0.5;
    detail += "Spearman(count, |R|) peaks scale " + fmt(scale) + ": " + fmt(rho) + "; ";
  }

  ChartVector lo(1), hi(1);
  lo << -10.0;
  hi << 10.0;
  ChainConfig cfg;
  cfg.n_chains = 1;
  cfg.burn_in = 5000;
  cfg.n_keep = 50000;
  cfg.proposal_std = 2.4;
  cfg.thin = 10;
  cfg.seed = 707;
  const ChainResult normal =
      mh_chain([](const ChartPoint& q) { return -0.5 * q[0] * q[0]; }, Domain(lo, hi), cfg, 0);
  std::vector<double> xs;
  for (const auto& q : normal.samples) xs.push_back(q[0]);
  const double ks = ks_statistic(xs, [](double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); });
  pass = pass && ks < 0.01;
  detail += "1-D normal KS " + fmt(ks) + " at " + std::to_string(xs.size()) + " samples";
  return {pass, detail};
}

// ---- 8 ---------------------------------------------------------------------

Outcome symmetry_study() {
  const fs::path dir = g_work / "symmetry";
  const auto start = std::chrono::steady_clock::now();
  require_cli({"symmetry", "peaks", "--scale", "0.3", "--preset", "desk", "-o", dir.string()});
  const double hours = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / 3600;

  std::ifstream is(dir / "symmetry_pairs.csv");
  std::string line;
  int rows = 0, complete = 0;
  std::set<std::pair<int, int>> seen;
  std::vector<double> asym, mean, rel;
  bool header_seen = false;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    std::vector<double> v;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
    ++rows;
    const int a = static_cast<int>(v[0]), b = static_cast<int>(v[1]);
    seen.insert({a, b});
    if (std::isfinite(v[9])) {
      ++complete;
      if (a < b) {
        asym.push_back(v[9]);
        mean.push_back(v[10]);
        rel.push_back(v[9] / v[10]);
      }
    }
  }
  const int k = 3, n = k * k;
  const bool all_pairs = rows == n * (n - 1) && static_cast<int>(seen.size()) == n * (n - 1) && complete == rows;
  const double rho = asym.size() >= 3 ? spearman(asym, mean) : std::nan("");
  double mean_rel = 0;
  for (double r : rel) mean_rel += r / static_cast<double>(rel.size());
  return {all_pairs && rho > 0,
          std::to_string(rows) + "/" + std::to_string(n * (n - 1)) + " ordered pairs (" + std::to_string(complete) +
              " complete); Spearman(asymmetry, mean distance) " + fmt(rho) + "; mean relative asymmetry " +
              fmt(100 * mean_rel) + "% (reported, target < 10%); wall clock " + fmt(hours) + " h"};
}

// ---- 9 ---------------------------------------------------------------------

double worst_fd_error(const DistanceField& field, const std::vector<ChartPoint>& batch, std::uint64_t seed) {
  const BatchGeometry geo = prepare_batch(field, batch);
  Eigen::VectorXd grad;
  batch_loss(field.params(), geo, &grad);
  FieldParams probe = field.params();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Eigen::Index> pick(0, probe.size() - 1);
  const double h = 1e-6;
  double worst = 0.0;
  for (int n = 0; n < 20; ++n) {
    const Eigen::Index k = pick(rng);
    const double w = probe.values[k];
    probe.values[k] = w + h;
    const double up = batch_loss(probe, geo, nullptr);
    probe.values[k] = w - h;
    const double down = batch_loss(probe, geo, nullptr);
    probe.values[k] = w;
    const double fd = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(fd - grad[k]) / std::max({std::abs(fd), std::abs(grad[k]), 1e-8}));
  }
  return worst;
}

Outcome nested_gradient() {
  const ImmersedManifold peaks = make_peaks(0.3);
  const ChartPoint p{-0.6, 0.9};
  std::mt19937_64 rng(909);
  std::vector<ChartPoint> batch;
  for (int i = 0; i < 64; ++i) batch.push_back(peaks.domain().sample_uniform(rng));
  DistanceField field(peaks, init_params(peaks, p, Architecture{}, 99));
  const double fresh = worst_fd_error(field, batch, 1);

  TrainConfig cfg;
  AdamState adam;
  for (int step = 0; step < 100; ++step) {
    std::vector<ChartPoint> train_batch;
    for (int i = 0; i < 128; ++i) train_batch.push_back(peaks.domain().sample_uniform(rng));
    adam_step(field.mutable_params().values, adam, loss_grad(field, train_batch), lr_schedule(cfg, step), cfg);
  }
  const double mid = worst_fd_error(field, batch, 2);
  return {fresh < 1e-4 && mid < 1e-4, "worst relative error over 20 coordinates: fresh " + fmt(fresh) +
                                          ", after 100 Adam steps " + fmt(mid)};
}

// ---- 10 --------------------------------------------------------------------

Outcome determinism() {
  ::setenv("GEODESIC_ATLAS_THREADS", "1", 1);
  const fs::path dir = g_work / "determinism";
  const fs::path keep = g_work / "determinism_first";
  fs::remove_all(keep);
  fs::create_directories(keep);

  auto run_all = [&] {
    require_cli({"train", "plane", "--preset", "desk", "--origin", "0,0", "--adam-steps", "500", "--lbfgs-steps", "0",
                 "-o", dir.string()});
    require_cli({"field", (dir / "checkpoint.json").string(), "--grid", "64", "-o", dir.string()});
    require_cli({"sample", "peaks", "--scale", "0.3", "--keep", "2000", "-o", dir.string()});
  };
  const std::vector<std::string> files = {"checkpoint.json", "field.csv", "samples.csv", "kde_grid.csv"};
  run_all();
  for (const auto& f : files) fs::copy_file(dir / f, keep / f, fs::copy_options::overwrite_existing);
  run_all();
  std::string detail;
  bool pass = true;
  for (const auto& f : files) {
    const bool same = slurp(dir / f) == slurp(keep / f);
    pass = pass && same;
    detail += f + (same ? " identical" : " DIFFERS") + "; ";
  }
  ::unsetenv("GEODESIC_ATLAS_THREADS");
  return {pass, detail + "single-threaded, 500 Adam steps of the desk plane run"};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--work" && i + 1 < argc) {
      g_work = argv[++i];
    } else {
      try {
        selected.insert(std::stoi(arg));
      } catch (const std::exception&) {
        std::cerr << "usage: acceptance [--work DIR] [criterion ...]\n";
        return 64;
      }
    }
  }
  fs::create_directories(g_work);

  const std::map<int, std::pair<std::string, std::function<Outcome()>>> criteria = {
      {1, {"geometry exactness", geometry_exactness}},
      {2, {"geodesic integrator", geodesic_integrator}},
      {3, {"exact-solution residual", exact_residual}},
      {9, {"nested-gradient correctness", nested_gradient}},
      {7, {"curvature sampling", curvature_sampling}},
      {10, {"determinism", determinism}},
      {4, {"plane training", plane_training}},
      {5, {"peaks training", peaks_training}},
      {6, {"flow/ODE overlap", flow_ode_overlap}},
      {8, {"symmetry study", symmetry_study}},
  };
  // Cheap criteria first; 6 reuses the field trained for 5.
  const std::vector<int> order = {1, 2, 3, 9, 7, 10, 4, 5, 6, 8};

  std::vector<std::string> lines;
  int failed = 0;
  for (int id : order) {
    if (!selected.empty() && !selected.count(id)) continue;
    const auto& [name, run] = criteria.at(id);
    std::cout << "running criterion " << id << " (" << name << ")" << std::endl;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ostringstream line;
    line << (outcome.pass ? "PASS" : "FAIL") << "  criterion " << std::setw(2) << id << "  " << name << ": "
         << outcome.detail << "  [" << std::fixed << std::setprecision(1) << secs << " s]";
    std::cout << line.str() << std::endl;
    lines.push_back(line.str());
    if (!outcome.pass) ++failed;
  }
  std::cout << "\n==== acceptance summary ====\n";
  for (const auto& l : lines) std::cout << l << '\n';
  std::cout << (lines.size() - failed) << "/" << lines.size() << " criteria passed" << std::endl;
  return failed;
}
