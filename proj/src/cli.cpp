#include "geodesic_atlas/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>

#include "geodesic_atlas/errors.hpp"
#include "geodesic_atlas/geodesics.hpp"
#include "geodesic_atlas/geometry.hpp"
#include "geodesic_atlas/model.hpp"
#include "geodesic_atlas/oracle.hpp"
#include "geodesic_atlas/parallel.hpp"
#include "geodesic_atlas/stats.hpp"

namespace geodesic_atlas {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

namespace {

// ---- config parsing -------------------------------------------------------

[[noreturn]] void bad_value(const std::string& key, const std::string& expected) {
  throw ConfigError("config key '" + key + "' must be " + expected);
}

int as_int(const Json& v, const std::string& key) {
  if (!v.is_number_integer()) bad_value(key, "an integer");
  return v.get<int>();
}

double as_double(const Json& v, const std::string& key) {
  if (!v.is_number()) bad_value(key, "a number");
  return v.get<double>();
}

std::string as_string(const Json& v, const std::string& key) {
  if (!v.is_string()) bad_value(key, "a string");
  return v.get<std::string>();
}

std::uint64_t as_seed(const Json& v, const std::string& key) {
  if (!v.is_number_unsigned()) bad_value(key, "a non-negative integer");
  return v.get<std::uint64_t>();
}

std::vector<double> as_vector(const Json& v, const std::string& key) {
  if (!v.is_array()) bad_value(key, "an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) out.push_back(as_double(x, key));
  return out;
}

std::optional<std::vector<double>> as_optional_vector(const Json& v, const std::string& key) {
  if (v.is_null()) return std::nullopt;
  return as_vector(v, key);
}

template <typename Fn>
void for_each_key(const Json& doc, const std::string& section, Fn&& fn) {
  if (!doc.is_object()) bad_value(section.empty() ? "<root>" : section, "an object");
  for (const auto& [key, value] : doc.items()) fn(key, value, section.empty() ? key : section + "." + key);
}

[[noreturn]] void unknown_key(const std::string& path) { throw ConfigError("unknown config key '" + path + "'"); }

void apply_train(TrainConfig& t, const Json& doc) {
  for_each_key(doc, "train", [&](const std::string& k, const Json& v, const std::string& path) {
    if (k == "adam_steps") t.adam_steps = as_int(v, path);
    else if (k == "lbfgs_steps") t.lbfgs_steps = as_int(v, path);
    else if (k == "batch_size") t.batch_size = as_int(v, path);
    else if (k == "lr0") t.lr0 = as_double(v, path);
    else if (k == "decay_factor") t.decay_factor = as_double(v, path);
    else if (k == "decay_every") t.decay_every = as_int(v, path);
    else if (k == "warmup_steps") t.warmup_steps = as_int(v, path);
    else if (k == "beta1") t.beta1 = as_double(v, path);
    else if (k == "beta2") t.beta2 = as_double(v, path);
    else if (k == "eps") t.eps = as_double(v, path);
    else if (k == "lbfgs_history") t.lbfgs_history = as_int(v, path);
    else if (k == "holdout_grid") t.holdout_grid = as_int(v, path);
    else if (k == "width") t.arch.width = as_int(v, path);
    else if (k == "depth") t.arch.depth = as_int(v, path);
    else if (k == "backbone") t.arch.backbone = backbone_from_string(as_string(v, path));
    else unknown_key(path);
  });
}

void apply_chains(ChainConfig& c, const Json& doc) {
  for_each_key(doc, "chains", [&](const std::string& k, const Json& v, const std::string& path) {
    if (k == "n_chains") c.n_chains = as_int(v, path);
    else if (k == "burn_in") c.burn_in = as_int(v, path);
    else if (k == "n_keep") c.n_keep = as_int(v, path);
    else if (k == "proposal_std") c.proposal_std = as_double(v, path);
    else if (k == "thin") c.thin = as_int(v, path);
    else unknown_key(path);
  });
}

std::vector<double> parse_point(const std::string& text, const std::string& what) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw ConfigError(what + " expects comma-separated numbers, got '" + text + "'");
    values.push_back(v);
  }
  if (values.empty()) throw ConfigError(what + " expects comma-separated numbers, got '" + text + "'");
  return values;
}

void validate(const RunConfig& cfg) {
  cfg.train.validate();
  cfg.chains.validate();
  if (cfg.sampler != "curvature" && cfg.sampler != "uniform") {
    throw ConfigError("sampler.kind must be 'curvature' or 'uniform', got '" + cfg.sampler + "'");
  }
  if (!(cfg.mix_weight >= 0 && cfg.mix_weight <= 1)) throw ConfigError("sampler.mix_weight must lie in [0, 1]");
  if (cfg.curvature_grid < 0 || cfg.curvature_grid == 1) throw ConfigError("describe.grid must be 0 or >= 2");
  if (cfg.kde_grid < 2 || cfg.field_grid < 2) throw ConfigError("grid sizes must be >= 2");
  if (!(cfg.trace_step > 0) || cfg.trace_max_steps < 1) throw ConfigError("trace.step must be positive and trace.max_steps >= 1");
  if (cfg.symmetry_k < 2) throw ConfigError("symmetry.grid_k must be >= 2");
  if (cfg.oracle_resolution < 8) throw ConfigError("symmetry.oracle_resolution must be >= 8");
}

// ---- output helpers -------------------------------------------------------

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

std::string vec(const ChartVector& v) {
  std::string s = "(";
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + num(v[i]);
  return s + ")";
}

std::string mat(const ChartMatrix& m) {
  std::string s = "[";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    s += r ? ", [" : "[";
    for (Eigen::Index c = 0; c < m.cols(); ++c) s += (c ? ", " : "") + num(m(r, c));
    s += "]";
  }
  return s + "]";
}

std::filesystem::path prepare_output(const RunConfig& cfg, const std::string& file) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.output_dir, ec);
  if (ec) throw IoError("cannot create output directory " + cfg.output_dir.string() + ": " + ec.message());
  return cfg.output_dir / file;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  return os;
}

void finish_output(std::ofstream& os, const std::filesystem::path& path, std::ostream& out) {
  os.close();
  if (!os) throw IoError("failed writing " + path.string());
  out << "wrote " << path.string() << '\n';
}

ChartPoint to_point(const std::vector<double>& values, const ImmersedManifold& m, const std::string& what) {
  if (static_cast<int>(values.size()) != m.intrinsic_dim()) {
    throw ConfigError(what + " needs " + std::to_string(m.intrinsic_dim()) + " coordinates, got " +
                      std::to_string(values.size()));
  }
  ChartVector v(m.intrinsic_dim());
  for (int i = 0; i < m.intrinsic_dim(); ++i) v[i] = values[static_cast<std::size_t>(i)];
  const ChartPoint q = m.domain().wrap(ChartPoint(v));
  if (!q.is_finite() || !m.domain().contains(q)) throw ConfigError(what + " " + vec(v) + " lies outside the domain of " + m.name());
  return q;
}

double node_coord(const Domain& d, int axis, int i, int n) { return d.lo()[axis] + d.width(axis) * i / (n - 1); }

TrainOptions progress_options(std::ostream& err, const std::string& label) {
  static std::mutex mutex;
  TrainOptions options;
  options.progress = [&err, label](const std::string& phase, int step, double loss) {
    std::lock_guard lock(mutex);
    err << label << phase << " step " << step << " loss " << std::setprecision(6) << loss << '\n';
  };
  return options;
}

std::string provenance(const std::string& artifact, const RunConfig& cfg) {
  OrderedJson doc;
  doc["tool"] = "geodesic-atlas";
  doc["version"] = kToolVersion;
  doc["artifact"] = artifact;
  doc["format"] = kArtifactFormat;
  doc["seed"] = cfg.seed;
  doc["config"] = cfg.to_json();
  return doc.dump();
}

// Also records the checkpoint's manifold, domain and origin in cfg so the
// artifact headers describe the field that was evaluated.
DistanceField load_field(RunConfig& cfg) {
  if (!cfg.checkpoint) throw ConfigError("a checkpoint path is required");
  const FieldParams params = read_params(*cfg.checkpoint);
  const ImmersedManifold m = make_manifold(params.manifold_name, params.manifold_scale).with_domain(params.domain);
  auto as_vector = [](const ChartVector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  cfg.manifold = params.manifold_name;
  cfg.scale = params.manifold_scale;
  cfg.domain_lo = as_vector(params.domain.lo());
  cfg.domain_hi = as_vector(params.domain.hi());
  cfg.origin = as_vector(params.origin.coords);
  return load_checkpoint(*cfg.checkpoint, m);
}

// ---- commands -------------------------------------------------------------

int cmd_describe(const RunConfig& cfg, std::ostream& out) {
  const ImmersedManifold m = resolve_manifold(cfg);
  out << "manifold " << m.name() << ": D = " << m.intrinsic_dim() << ", N = " << m.ambient_dim()
      << ", scale = " << num(m.scale()) << ", domain " << vec(m.domain().lo()) << " .. " << vec(m.domain().hi()) << '\n';
  for (const auto& at : cfg.describe_at) {
    const ChartPoint q = to_point(at, m, "--at");
    const MetricData md = christoffel(m, q);
    out << "\nat " << vec(q.coords) << '\n';
    const Eigen::VectorXd x = immerse(m, q);
    out << "  ambient  " << vec(ChartVector(x)) << '\n';
    out << "  g        " << mat(md.g) << '\n';
    out << "  g^-1     " << mat(md.g_inv) << '\n';
    for (int k = 0; k < m.intrinsic_dim(); ++k) {
      ChartMatrix gk(m.intrinsic_dim(), m.intrinsic_dim());
      for (int i = 0; i < m.intrinsic_dim(); ++i)
        for (int j = 0; j < m.intrinsic_dim(); ++j) gk(i, j) = md.christoffel(k, i, j);
      out << "  Gamma^" << k + 1 << "  " << mat(gk) << '\n';
    }
    out << "  R        " << num(ricci_scalar(m, q)) << '\n';
  }
  if (cfg.curvature_grid > 0) {
    if (m.intrinsic_dim() != 2) throw ConfigError("the curvature grid needs a 2-D manifold");
    const int n = cfg.curvature_grid;
    const Domain& d = m.domain();
    const auto path = prepare_output(cfg, "curvature_grid.csv");
    auto os = open_output(path);
    write_artifact_header(os, "curvature_grid", cfg);
    os << "x,y,ricci\n" << std::setprecision(15);
    // Cell centres keep the curvature stencil inside the domain.
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        const ChartPoint q{d.lo()[0] + d.width(0) * (i + 0.5) / n, d.lo()[1] + d.width(1) * (j + 0.5) / n};
        os << q[0] << ',' << q[1] << ',' << ricci_scalar(m, q) << '\n';
      }
    }
    finish_output(os, path, out);
  }
  return 0;
}

int cmd_sample(const RunConfig& cfg, std::ostream& out) {
  const ImmersedManifold m = resolve_manifold(cfg);
  const LogDensity target = [&m](const ChartPoint& q) { return curvature_logdensity(m, q); };
  const std::vector<ChainResult> chains = run_chains(target, m.domain(), cfg.chains);
  for (std::size_t c = 0; c < chains.size(); ++c) {
    out << "chain " << c << ": " << chains[c].samples.size() << " samples, acceptance "
        << num(chains[c].acceptance_rate()) << '\n';
  }
  const auto samples_path = prepare_output(cfg, "samples.csv");
  auto os = open_output(samples_path);
  write_artifact_header(os, "samples", cfg);
  write_samples_csv(os, chains);
  finish_output(os, samples_path, out);

  std::optional<ChartVector> bw;
  if (cfg.bandwidth) bw = ChartVector(Eigen::Map<const Eigen::VectorXd>(cfg.bandwidth->data(), static_cast<Eigen::Index>(cfg.bandwidth->size())));
  const CurvatureKde kde = CurvatureKde(pool(chains), bw).bound_to(m.domain());
  out << "KDE bandwidth " << vec(kde.bandwidth()) << '\n';
  const auto grid_path = prepare_output(cfg, "kde_grid.csv");
  auto gs = open_output(grid_path);
  write_artifact_header(gs, "kde_grid", cfg);
  write_kde_grid_csv(gs, kde, m.domain(), cfg.kde_grid);
  finish_output(gs, grid_path, out);
  return 0;
}

OrderedJson exact_comparison(const DistanceField& field, int n) {
  const ImmersedManifold& m = field.manifold();
  std::optional<AnalyticDistance> exact;
  if (m.name() == "plane") exact = plane_exact_distance(m, field.origin());
  if (m.name() == "unit-sphere") exact = sphere_exact_distance(m, field.origin());
  if (!exact) return nullptr;
  std::vector<double> rel;
  double min_gap = std::numeric_limits<double>::infinity();
  const Domain& d = m.domain();
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const ChartPoint q{node_coord(d, 0, i, n), node_coord(d, 1, j, n)};
      const double truth = exact->phi(q);
      if (truth < 1e-9) continue;
      const FieldSample s = field.evaluate(q);
      rel.push_back(std::abs(s.phi - truth) / truth);
      min_gap = std::min(min_gap, s.phi - (immerse(m, q) - field.origin_ambient()).norm());
    }
  }
  OrderedJson doc;
  doc["grid"] = n;
  doc["median_rel_error"] = median(rel);
  doc["max_rel_error"] = *std::max_element(rel.begin(), rel.end());
  doc["min_phi_minus_chordal"] = min_gap;
  return doc;
}

int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const ImmersedManifold m = resolve_manifold(cfg);
  const ChartPoint p = resolve_origin(cfg, m);
  const PointSampler sampler = make_training_sampler(cfg, m);
  TrainOptions options = progress_options(err, "");
  options.divergence_checkpoint = prepare_output(cfg, "checkpoint.diverged.json");
  TrainResult result = train(m, p, cfg.train, sampler, options);

  const auto ckpt = prepare_output(cfg, "checkpoint.json");
  save_checkpoint(result.field, ckpt, provenance("checkpoint", cfg));
  out << "wrote " << ckpt.string() << '\n';

  OrderedJson report = OrderedJson::parse(result.report.to_json());
  report["exact_comparison"] = exact_comparison(result.field, cfg.train.holdout_grid);
  report["provenance"] = OrderedJson::parse(provenance("train_report", cfg));
  const auto report_path = prepare_output(cfg, "report.json");
  auto os = open_output(report_path);
  os << report.dump(1) << '\n';
  finish_output(os, report_path, out);

  const ResidualStats& r = result.report.residuals;
  out << "residual |r| on " << r.points << " held-out points: median " << num(r.median) << ", p90 " << num(r.p90)
      << ", max " << num(r.max) << '\n';
  if (!report["exact_comparison"].is_null()) {
    out << "vs exact distance: median rel. error " << num(report["exact_comparison"]["median_rel_error"])
        << ", max " << num(report["exact_comparison"]["max_rel_error"]) << '\n';
  }
  out << "L-BFGS: " << result.report.lbfgs_stop << "; wall clock " << num(result.report.wall_clock_seconds) << " s\n";
  return 0;
}

int cmd_field(RunConfig cfg, std::ostream& out) {
  const DistanceField field = load_field(cfg);
  const ImmersedManifold& m = field.manifold();
  if (m.intrinsic_dim() != 2) throw ConfigError("field export needs a 2-D manifold");
  const Domain& d = m.domain();
  const int n = cfg.field_grid;
  const auto path = prepare_output(cfg, "field.csv");
  auto os = open_output(path);
  write_artifact_header(os, "field", cfg);
  os << "x,y,phi,gradx,grady,flowx,flowy\n" << std::setprecision(15);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const ChartPoint q{node_coord(d, 0, i, n), node_coord(d, 1, j, n)};
      const FieldSample s = field.evaluate(q);
      os << q[0] << ',' << q[1] << ',' << s.phi << ',' << s.grad_chart[0] << ',' << s.grad_chart[1] << ','
         << s.grad_intrinsic[0] << ',' << s.grad_intrinsic[1] << '\n';
    }
  }
  finish_output(os, path, out);
  return 0;
}

void write_curve(const RunConfig& cfg, const std::string& artifact, const ImmersedManifold& m,
                 const DiscreteCurve& c, std::ostream& out) {
  const auto path = prepare_output(cfg, artifact + ".csv");
  auto os = open_output(path);
  write_artifact_header(os, artifact, cfg);
  write_curve_csv(os, m, c);
  finish_output(os, path, out);
}

int cmd_trace(RunConfig cfg, std::ostream& out, std::ostream& err) {
  const DistanceField field = load_field(cfg);
  const ImmersedManifold& m = field.manifold();
  if (!cfg.trace_from) throw ConfigError("trace needs a start point (--from)");
  const ChartPoint q = to_point(*cfg.trace_from, m, "--from");
  const FieldSample start = field.evaluate(q);

  TraceOptions options;
  options.step = cfg.trace_step;
  options.max_steps = cfg.trace_max_steps;
  DiscreteCurve flow;
  try {
    flow = trace_flow(field, q, options);
  } catch (const StagnationError& e) {
    write_curve(cfg, "trace_flow", m, e.partial_path(), out);
    err << "error: " << e.what() << " (partial path of " << e.partial_path().size() << " points written)\n";
    return 2;
  }
  write_curve(cfg, "trace_flow", m, flow, out);

  // Geodesic launched from q with the flow's initial velocity, run for the
  // same parameter time so both curves can be compared pointwise.
  const double t_end = flow.times.back();
  const int steps = std::max(1, static_cast<int>(std::ceil(t_end / cfg.trace_step)));
  const DiscreteCurve geodesic =
      integrate_geodesic(m, q, TangentVector{q, ChartVector(-start.grad_intrinsic)}, t_end, steps);
  write_curve(cfg, "trace_geodesic", m, geodesic, out);

  const double deviation = max_pointwise_deviation(m.domain(), flow, geodesic);
  const double flow_length = curve_length(m, flow);
  const double geodesic_length = curve_length(m, geodesic);
  const auto path = prepare_output(cfg, "trace_summary.csv");
  auto os = open_output(path);
  write_artifact_header(os, "trace_summary", cfg);
  os << "q1,q2,phi,flow_points,flow_length,geodesic_length,max_deviation\n" << std::setprecision(15);
  os << q[0] << ',' << q[1] << ',' << start.phi << ',' << flow.size() << ',' << flow_length << ',' << geodesic_length
     << ',' << deviation << '\n';
  finish_output(os, path, out);
  out << "phi(q) " << num(start.phi) << ", flow length " << num(flow_length) << " ("
      << num(100.0 * (flow_length - start.phi) / start.phi) << "% of phi), max flow/geodesic deviation "
      << num(deviation) << '\n';
  return 0;
}

std::vector<ChartPoint> symmetry_origins(const Domain& d, int k) {
  // k × k nodes spanning the middle two thirds of each axis.
  std::vector<ChartPoint> origins;
  for (int j = 0; j < k; ++j) {
    for (int i = 0; i < k; ++i) {
      origins.push_back(ChartPoint{d.lo()[0] + d.width(0) * (1.0 + 4.0 * i / (k - 1)) / 6.0,
                                   d.lo()[1] + d.width(1) * (1.0 + 4.0 * j / (k - 1)) / 6.0});
    }
  }
  return origins;
}

int cmd_symmetry(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const ImmersedManifold m = resolve_manifold(cfg);
  if (m.intrinsic_dim() != 2) throw ConfigError("the symmetry study needs a 2-D manifold");
  const std::vector<ChartPoint> origins = symmetry_origins(m.domain(), cfg.symmetry_k);
  const int n = static_cast<int>(origins.size());
  const PointSampler sampler = make_training_sampler(cfg, m);

  std::vector<std::optional<DistanceField>> fields(static_cast<std::size_t>(n));
  std::vector<std::string> status(static_cast<std::size_t>(n), "ok");
  std::vector<std::optional<GridDistance>> oracles(static_cast<std::size_t>(n));
  parallel_for(n, [&](int o) {
    const auto idx = static_cast<std::size_t>(o);
    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed + static_cast<std::uint64_t>(o);
    try {
      TrainResult r = train(m, origins[idx], tc, sampler, progress_options(err, "origin " + std::to_string(o) + " "));
      RunConfig per_origin = cfg;
      per_origin.origin = std::vector<double>{origins[idx][0], origins[idx][1]};
      per_origin.train.seed = tc.seed;
      save_checkpoint(r.field, prepare_output(cfg, "origin_" + std::to_string(o) + ".json"),
                      provenance("checkpoint", per_origin));
      fields[idx].emplace(std::move(r.field));
    } catch (const Error& e) {
      status[idx] = std::string("failed: ") + e.what();
    }
    oracles[idx].emplace(grid_distance(m, origins[idx], cfg.oracle_resolution));
  });

  const auto origins_path = prepare_output(cfg, "symmetry_origins.csv");
  auto os_o = open_output(origins_path);
  write_artifact_header(os_o, "symmetry_origins", cfg);
  os_o << "index,x,y,seed,status\n" << std::setprecision(15);
  for (int o = 0; o < n; ++o) {
    const auto idx = static_cast<std::size_t>(o);
    os_o << o << ',' << origins[idx][0] << ',' << origins[idx][1] << ',' << cfg.seed + static_cast<std::uint64_t>(o)
         << ",\"" << status[idx] << "\"\n";
  }
  finish_output(os_o, origins_path, out);

  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> asym, mean_dist, rel_asym;
  const auto pairs_path = prepare_output(cfg, "symmetry_pairs.csv");
  auto os = open_output(pairs_path);
  write_artifact_header(os, "symmetry_pairs", cfg);
  os << "p_index,q_index,px,py,qx,qy,phi_q_from_p,phi_p_from_q,oracle,asymmetry,mean_distance\n" << std::setprecision(15);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      if (a == b) continue;
      const auto ia = static_cast<std::size_t>(a), ib = static_cast<std::size_t>(b);
      const double fwd = fields[ia] ? fields[ia]->phi(origins[ib]) : nan;
      const double back = fields[ib] ? fields[ib]->phi(origins[ia]) : nan;
      const double oracle = oracles[ia]->nearest(origins[ib]);
      const double dif = std::abs(fwd - back), mean = 0.5 * (fwd + back);
      os << a << ',' << b << ',' << origins[ia][0] << ',' << origins[ia][1] << ',' << origins[ib][0] << ','
         << origins[ib][1] << ',' << fwd << ',' << back << ',' << oracle << ',' << dif << ',' << mean << '\n';
      // Each unordered pair enters the statistics once.
      if (a < b && std::isfinite(dif)) {
        asym.push_back(dif);
        mean_dist.push_back(mean);
        rel_asym.push_back(dif / mean);
      }
    }
  }
  finish_output(os, pairs_path, out);

  const int failed = static_cast<int>(std::count_if(status.begin(), status.end(), [](const auto& s) { return s != "ok"; }));
  out << "origins " << n << " (" << failed << " failed), ordered pairs " << n * (n - 1) << '\n';
  if (asym.size() >= 3) {
    const double rho = spearman(asym, mean_dist);
    const double mean_rel = std::accumulate(rel_asym.begin(), rel_asym.end(), 0.0) / static_cast<double>(rel_asym.size());
    out << "Spearman(|phi(q;p) - phi(p;q)|, mean pair distance) = " << num(rho) << (rho > 0 ? " (positive)" : " (not positive)")
        << "\nmean relative asymmetry " << num(100.0 * mean_rel) << "%\n";
  } else {
    out << "too few complete pairs for the rank correlation\n";
  }
  return failed == n ? 2 : 0;
}

// ---- flag plumbing --------------------------------------------------------

// Collects flags that were given on the command line into a JSON overlay
// with the same layout as a config file.
class FlagOverlay {
 public:
  template <typename T>
  void add(CLI::App* app, const std::string& flag, const std::string& pointer, const std::string& help) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(flag, *value, help);
    setters_.push_back([opt, value, pointer](Json& doc) {
      if (opt->count() > 0) doc[Json::json_pointer(pointer)] = *value;
    });
  }

  void add_point(CLI::App* app, const std::string& flag, const std::string& pointer, const std::string& help) {
    auto value = std::make_shared<std::string>();
    CLI::Option* opt = app->add_option(flag, *value, help);
    setters_.push_back([opt, value, pointer, flag](Json& doc) {
      if (opt->count() > 0) doc[Json::json_pointer(pointer)] = parse_point(*value, flag);
    });
  }

  Json collect() const {
    Json doc = Json::object();
    for (const auto& set : setters_) set(doc);
    return doc;
  }

 private:
  std::vector<std::function<void(Json&)>> setters_;
};

void add_common(CLI::App* sub, FlagOverlay& flags, std::string& config_path) {
  sub->add_option("--config", config_path, "JSON config file (flags override its values)");
  flags.add<std::string>(sub, "--preset", "/preset", "desk or paper");
  flags.add<std::uint64_t>(sub, "--seed", "/seed", "Base random seed");
  flags.add<std::string>(sub, "-o,--out", "/output_dir", "Output directory");
}

void add_manifold(CLI::App* sub, FlagOverlay& flags) {
  flags.add<std::string>(sub, "manifold", "/manifold", "plane, unit-sphere or peaks");
  flags.add<double>(sub, "--scale", "/scale", "Height scale of the peaks surface");
  flags.add_point(sub, "--lo", "/domain/lo", "Lower chart corner, e.g. -3,-3");
  flags.add_point(sub, "--hi", "/domain/hi", "Upper chart corner, e.g. 3,3");
}

void add_chain_flags(CLI::App* sub, FlagOverlay& flags) {
  flags.add<int>(sub, "--chains", "/chains/n_chains", "Number of MH chains");
  flags.add<int>(sub, "--burn-in", "/chains/burn_in", "Discarded initial steps per chain");
  flags.add<int>(sub, "--keep", "/chains/n_keep", "Samples kept per chain");
  flags.add<double>(sub, "--proposal-std", "/chains/proposal_std", "Random-walk proposal std (chart units)");
  flags.add<int>(sub, "--thin", "/chains/thin", "Keep every n-th post-burn-in state");
  flags.add_point(sub, "--bandwidth", "/sampler/bandwidth", "KDE bandwidth per axis (default Scott's rule)");
}

void add_train_flags(CLI::App* sub, FlagOverlay& flags) {
  flags.add<int>(sub, "--adam-steps", "/train/adam_steps", "Adam steps");
  flags.add<int>(sub, "--lbfgs-steps", "/train/lbfgs_steps", "L-BFGS steps");
  flags.add<int>(sub, "--batch-size", "/train/batch_size", "Points per batch");
  flags.add<double>(sub, "--lr", "/train/lr0", "Initial learning rate");
  flags.add<int>(sub, "--width", "/train/width", "Hidden width");
  flags.add<int>(sub, "--depth", "/train/depth", "Hidden layers");
  flags.add<std::string>(sub, "--backbone", "/train/backbone", "modified-mlp or mlp");
  flags.add<int>(sub, "--holdout-grid", "/train/holdout_grid", "Nodes per axis of the residual audit grid");
  flags.add<std::string>(sub, "--sampler", "/sampler/kind", "Training distribution: curvature or uniform");
  flags.add<double>(sub, "--mix-weight", "/sampler/mix_weight", "Weight of the curvature KDE in the mixture");
  add_chain_flags(sub, flags);
}

Json read_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  try {
    return Json::parse(is);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
}

}  // namespace

// ---- public API -----------------------------------------------------------

RunConfig preset_config(const std::string& preset) {
  RunConfig cfg;
  if (preset == "desk") {
    cfg.train = TrainConfig::desk();
    cfg.chains = ChainConfig::desk();
    cfg.symmetry_k = 3;
  } else if (preset == "paper") {
    cfg.train = TrainConfig::paper();
    cfg.chains = ChainConfig::paper();
    cfg.symmetry_k = 7;
  } else {
    throw ConfigError("unknown preset '" + preset + "' (expected desk or paper)");
  }
  cfg.preset = preset;
  return cfg;
}

void apply_config(RunConfig& cfg, const Json& doc) {
  for_each_key(doc, "", [&](const std::string& k, const Json& v, const std::string& path) {
    if (k == "preset") {
      if (as_string(v, path) != cfg.preset) throw ConfigError("preset '" + v.get<std::string>() + "' conflicts with the selected preset '" + cfg.preset + "'");
    } else if (k == "manifold") {
      cfg.manifold = as_string(v, path);
    } else if (k == "scale") {
      cfg.scale = as_double(v, path);
    } else if (k == "domain") {
      for_each_key(v, path, [&](const std::string& dk, const Json& dv, const std::string& dpath) {
        if (dk == "lo") cfg.domain_lo = as_optional_vector(dv, dpath);
        else if (dk == "hi") cfg.domain_hi = as_optional_vector(dv, dpath);
        else unknown_key(dpath);
      });
    } else if (k == "origin") {
      cfg.origin = as_optional_vector(v, path);
    } else if (k == "seed") {
      cfg.seed = as_seed(v, path);
    } else if (k == "output_dir") {
      cfg.output_dir = as_string(v, path);
    } else if (k == "checkpoint") {
      if (v.is_null()) cfg.checkpoint.reset();
      else cfg.checkpoint = as_string(v, path);
    } else if (k == "train") {
      apply_train(cfg.train, v);
    } else if (k == "chains") {
      apply_chains(cfg.chains, v);
    } else if (k == "sampler") {
      for_each_key(v, path, [&](const std::string& sk, const Json& sv, const std::string& spath) {
        if (sk == "kind") cfg.sampler = as_string(sv, spath);
        else if (sk == "mix_weight") cfg.mix_weight = as_double(sv, spath);
        else if (sk == "bandwidth") cfg.bandwidth = as_optional_vector(sv, spath);
        else unknown_key(spath);
      });
    } else if (k == "describe") {
      for_each_key(v, path, [&](const std::string& sk, const Json& sv, const std::string& spath) {
        if (sk == "grid") {
          cfg.curvature_grid = as_int(sv, spath);
        } else if (sk == "at") {
          if (!sv.is_array()) bad_value(spath, "an array of points");
          cfg.describe_at.clear();
          for (const auto& pt : sv) cfg.describe_at.push_back(as_vector(pt, spath));
        } else {
          unknown_key(spath);
        }
      });
    } else if (k == "sample") {
      for_each_key(v, path, [&](const std::string& sk, const Json& sv, const std::string& spath) {
        if (sk == "kde_grid") cfg.kde_grid = as_int(sv, spath);
        else unknown_key(spath);
      });
    } else if (k == "field") {
      for_each_key(v, path, [&](const std::string& sk, const Json& sv, const std::string& spath) {
        if (sk == "grid") cfg.field_grid = as_int(sv, spath);
        else unknown_key(spath);
      });
    } else if (k == "trace") {
      for_each_key(v, path, [&](const std::string& sk, const Json& sv, const std::string& spath) {
        if (sk == "from") cfg.trace_from = as_optional_vector(sv, spath);
        else if (sk == "step") cfg.trace_step = as_double(sv, spath);
        else if (sk == "max_steps") cfg.trace_max_steps = as_int(sv, spath);
        else unknown_key(spath);
      });
    } else if (k == "symmetry") {
      for_each_key(v, path, [&](const std::string& sk, const Json& sv, const std::string& spath) {
        if (sk == "grid_k") cfg.symmetry_k = as_int(sv, spath);
        else if (sk == "oracle_resolution") cfg.oracle_resolution = as_int(sv, spath);
        else unknown_key(spath);
      });
    } else {
      unknown_key(path);
    }
  });
  cfg.train.seed = cfg.seed;
  cfg.chains.seed = cfg.seed;
}

OrderedJson RunConfig::to_json() const {
  auto opt = [](const std::optional<std::vector<double>>& v) { return v ? OrderedJson(*v) : OrderedJson(nullptr); };
  OrderedJson doc;
  doc["preset"] = preset;
  doc["manifold"] = manifold;
  doc["scale"] = scale;
  doc["domain"] = {{"lo", opt(domain_lo)}, {"hi", opt(domain_hi)}};
  doc["origin"] = opt(origin);
  doc["seed"] = seed;
  doc["output_dir"] = output_dir.string();
  doc["checkpoint"] = checkpoint ? OrderedJson(checkpoint->string()) : OrderedJson(nullptr);
  doc["train"] = {{"adam_steps", train.adam_steps},
                  {"lbfgs_steps", train.lbfgs_steps},
                  {"batch_size", train.batch_size},
                  {"lr0", train.lr0},
                  {"decay_factor", train.decay_factor},
                  {"decay_every", train.decay_every},
                  {"warmup_steps", train.warmup_steps},
                  {"beta1", train.beta1},
                  {"beta2", train.beta2},
                  {"eps", train.eps},
                  {"lbfgs_history", train.lbfgs_history},
                  {"holdout_grid", train.holdout_grid},
                  {"width", train.arch.width},
                  {"depth", train.arch.depth},
                  {"backbone", to_string(train.arch.backbone)}};
  doc["chains"] = {{"n_chains", chains.n_chains},
                   {"burn_in", chains.burn_in},
                   {"n_keep", chains.n_keep},
                   {"proposal_std", chains.proposal_std},
                   {"thin", chains.thin}};
  doc["sampler"] = {{"kind", sampler}, {"mix_weight", mix_weight}, {"bandwidth", opt(bandwidth)}};
  doc["describe"] = {{"at", describe_at}, {"grid", curvature_grid}};
  doc["sample"] = {{"kde_grid", kde_grid}};
  doc["field"] = {{"grid", field_grid}};
  doc["trace"] = {{"from", opt(trace_from)}, {"step", trace_step}, {"max_steps", trace_max_steps}};
  doc["symmetry"] = {{"grid_k", symmetry_k}, {"oracle_resolution", oracle_resolution}};
  return doc;
}

ImmersedManifold resolve_manifold(const RunConfig& cfg) {
  const ImmersedManifold base = make_manifold(cfg.manifold, cfg.scale);
  if (!cfg.domain_lo && !cfg.domain_hi) return base;
  const Domain& d = base.domain();
  ChartVector lo = d.lo(), hi = d.hi();
  auto fill = [&](const std::optional<std::vector<double>>& src, ChartVector& dst, const char* what) {
    if (!src) return;
    if (static_cast<int>(src->size()) != d.dim()) {
      throw ConfigError(std::string("domain.") + what + " needs " + std::to_string(d.dim()) + " entries");
    }
    for (int i = 0; i < d.dim(); ++i) dst[i] = (*src)[static_cast<std::size_t>(i)];
  };
  fill(cfg.domain_lo, lo, "lo");
  fill(cfg.domain_hi, hi, "hi");
  if (!(lo.array() < hi.array()).all() || !lo.allFinite() || !hi.allFinite()) {
    throw ConfigError("domain.lo must lie strictly below domain.hi");
  }
  Domain custom(lo, hi);
  for (int i = 0; i < d.dim(); ++i) custom.set_periodic(i, d.periodic(i));
  return base.with_domain(custom);
}

ChartPoint resolve_origin(const RunConfig& cfg, const ImmersedManifold& m) {
  if (!cfg.origin) return ChartPoint(m.domain().centre());
  return to_point(*cfg.origin, m, "origin");
}

PointSampler make_training_sampler(const RunConfig& cfg, const ImmersedManifold& m) {
  if (cfg.sampler == "uniform") return uniform_sampler(m.domain());
  const LogDensity target = [&m](const ChartPoint& q) { return curvature_logdensity(m, q); };
  std::optional<ChartVector> bw;
  if (cfg.bandwidth) {
    bw = ChartVector(Eigen::Map<const Eigen::VectorXd>(cfg.bandwidth->data(), static_cast<Eigen::Index>(cfg.bandwidth->size())));
  }
  auto mixture = std::make_shared<MixtureSampler>(CurvatureKde(pool(run_chains(target, m.domain(), cfg.chains)), bw),
                                                  m.domain(), cfg.mix_weight);
  return [mixture](std::mt19937_64& rng) { return (*mixture)(rng); };
}

void write_artifact_header(std::ostream& os, const std::string& artifact, const RunConfig& cfg) {
  os << "# geodesic-atlas " << kToolVersion << "\n# artifact: " << artifact << " (format " << kArtifactFormat
     << ")\n# seed: " << cfg.seed << "\n# config: " << cfg.to_json().dump() << '\n';
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Distance fields and geodesics on immersed manifolds", "geodesic-atlas"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  std::string config_path;
  FlagOverlay flags;

  CLI::App* describe = app.add_subcommand("describe", "Metric, Christoffel symbols and scalar curvature");
  add_common(describe, flags, config_path);
  add_manifold(describe, flags);
  auto at = std::make_shared<std::vector<std::string>>();
  describe->add_option("--at", *at, "Chart point to describe, e.g. 0,0 (repeatable)");
  flags.add<int>(describe, "--grid", "/describe/grid", "Write an n x n curvature_grid.csv (x,y,ricci)");

  CLI::App* sample = app.add_subcommand("sample", "Curvature-weighted MH samples and their KDE grid");
  add_common(sample, flags, config_path);
  add_manifold(sample, flags);
  add_chain_flags(sample, flags);
  flags.add<int>(sample, "--kde-grid", "/sample/kde_grid", "Nodes per axis of kde_grid.csv");

  CLI::App* train_cmd = app.add_subcommand("train", "Train a distance field from one origin");
  add_common(train_cmd, flags, config_path);
  add_manifold(train_cmd, flags);
  flags.add_point(train_cmd, "--origin", "/origin", "Origin p, e.g. 0,0 (default: domain centre)");
  add_train_flags(train_cmd, flags);

  CLI::App* field_cmd = app.add_subcommand("field", "Export phi, its gradient and the flow on a grid");
  add_common(field_cmd, flags, config_path);
  flags.add<std::string>(field_cmd, "checkpoint", "/checkpoint", "Checkpoint written by train");
  flags.add<int>(field_cmd, "--grid", "/field/grid", "Nodes per axis of field.csv");

  CLI::App* trace = app.add_subcommand("trace", "Trace the geodesic flow and compare with the geodesic ODE");
  add_common(trace, flags, config_path);
  flags.add<std::string>(trace, "checkpoint", "/checkpoint", "Checkpoint written by train");
  flags.add_point(trace, "--from", "/trace/from", "Start point q, e.g. 1.5,-2");
  flags.add<double>(trace, "--step", "/trace/step", "Integration step");
  flags.add<int>(trace, "--max-steps", "/trace/max_steps", "Maximum flow steps");

  CLI::App* symmetry = app.add_subcommand("symmetry", "Pairwise distance symmetry over a grid of origins");
  add_common(symmetry, flags, config_path);
  add_manifold(symmetry, flags);
  add_train_flags(symmetry, flags);
  flags.add<int>(symmetry, "--grid-k", "/symmetry/grid_k", "Origins per axis");
  flags.add<int>(symmetry, "--oracle-resolution", "/symmetry/oracle_resolution", "Dijkstra grid nodes per axis");

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? 0 : 1;
  }

  try {
    Json overlay = flags.collect();
    if (!at->empty()) {
      Json points = Json::array();
      for (const auto& s : *at) points.push_back(parse_point(s, "--at"));
      overlay["describe"]["at"] = points;
    }
    const Json file = config_path.empty() ? Json::object() : read_config_file(config_path);
    if (!file.is_object()) throw ConfigError("config file must contain a JSON object");
    std::string preset = "desk";
    if (file.contains("preset")) preset = as_string(file["preset"], "preset");
    if (overlay.contains("preset")) preset = overlay["preset"].get<std::string>();
    RunConfig cfg = preset_config(preset);
    Json file_rest = file, overlay_rest = overlay;
    file_rest.erase("preset");
    overlay_rest.erase("preset");
    apply_config(cfg, file_rest);
    apply_config(cfg, overlay_rest);
    validate(cfg);

    if (describe->parsed()) return cmd_describe(cfg, out);
    if (sample->parsed()) return cmd_sample(cfg, out);
    if (train_cmd->parsed()) return cmd_train(cfg, out, err);
    if (field_cmd->parsed()) return cmd_field(cfg, out);
    if (trace->parsed()) return cmd_trace(cfg, out, err);
    if (symmetry->parsed()) return cmd_symmetry(cfg, out, err);
    return 1;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace geodesic_atlas
