#include "geodesic_atlas/training.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>

#include "geodesic_atlas/errors.hpp"
#include "geodesic_atlas/geometry.hpp"
#include "geodesic_atlas/network.hpp"
#include "geodesic_atlas/stats.hpp"

namespace geodesic_atlas {

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("invalid training config: " + what); };
  if (adam_steps < 0 || lbfgs_steps < 0) fail("step counts must be >= 0");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(lr0 > 0)) fail("lr0 must be positive");
  if (!(decay_factor > 0 && decay_factor <= 1)) fail("decay_factor must lie in (0, 1]");
  if (decay_every < 1) fail("decay_every must be >= 1");
  if (warmup_steps < 0) fail("warmup_steps must be >= 0");
  if (!(beta1 > 0 && beta1 < 1) || !(beta2 > 0 && beta2 < 1)) fail("beta1 and beta2 must lie in (0, 1)");
  if (!(eps > 0)) fail("eps must be positive");
  if (lbfgs_history < 1) fail("lbfgs_history must be >= 1");
  if (holdout_grid < 2) fail("holdout_grid must be >= 2");
}

TrainConfig TrainConfig::desk() { return TrainConfig{}; }

TrainConfig TrainConfig::paper() {
  TrainConfig cfg;
  cfg.adam_steps = 100000;
  cfg.batch_size = 8192;
  cfg.lbfgs_steps = 1000;
  return cfg;
}

double lr_schedule(const TrainConfig& cfg, int step) {
  if (step < 0) throw ConfigError("negative step");
  if (step < cfg.warmup_steps) return cfg.lr0;
  return cfg.lr0 * std::pow(cfg.decay_factor, (step - cfg.warmup_steps) / cfg.decay_every);
}

void adam_step(Eigen::VectorXd& params, AdamState& state, const Eigen::VectorXd& grad, double lr,
               const TrainConfig& cfg) {
  if (state.m.size() == 0) {
    state.m = Eigen::VectorXd::Zero(params.size());
    state.v = Eigen::VectorXd::Zero(params.size());
  }
  if (grad.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw DimensionError("adam_step: gradient has " + std::to_string(grad.size()) + " entries, parameters " +
                         std::to_string(params.size()));
  }
  ++state.step;
  state.m = cfg.beta1 * state.m + (1 - cfg.beta1) * grad;
  state.v = cfg.beta2 * state.v + (1 - cfg.beta2) * grad.cwiseAbs2();
  const double c1 = 1 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1 - std::pow(cfg.beta2, static_cast<double>(state.step));
  params.array() -= lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + cfg.eps);
}

LbfgsStepResult lbfgs_step(Eigen::VectorXd& w, LbfgsState& state, const Objective& objective) {
  Eigen::VectorXd g;
  LbfgsStepResult r;
  r.loss_before = objective(w, &g);
  r.loss_after = r.loss_before;
  if (g.squaredNorm() == 0.0) return r;

  // Two-loop recursion.
  Eigen::VectorXd d = -g;
  const std::size_t k = state.pairs.size();
  std::vector<double> alpha(k), rho(k);
  for (std::size_t n = k; n-- > 0;) {
    const auto& [s, y] = state.pairs[n];
    rho[n] = 1.0 / y.dot(s);
    alpha[n] = rho[n] * s.dot(d);
    d -= alpha[n] * y;
  }
  if (k > 0) {
    const auto& [s, y] = state.pairs.back();
    d *= s.dot(y) / y.squaredNorm();
  }
  for (std::size_t n = 0; n < k; ++n) {
    const auto& [s, y] = state.pairs[n];
    const double beta = rho[n] * y.dot(d);
    d += (alpha[n] - beta) * s;
  }
  double slope = g.dot(d);
  if (!(slope < 0)) {
    state.pairs.clear();
    d = -g;
    slope = -g.squaredNorm();
  }

  double t = 1.0;
  Eigen::VectorXd trial_grad;
  for (int b = 0;; ++b) {
    const Eigen::VectorXd trial = w + t * d;
    const double f = objective(trial, &trial_grad);
    if (std::isfinite(f) && f <= r.loss_before + kArmijoC * t * slope) {
      const Eigen::VectorXd s = trial - w;
      const Eigen::VectorXd y = trial_grad - g;
      if (y.dot(s) > 1e-12) {
        state.pairs.emplace_back(s, y);
        while (static_cast<int>(state.pairs.size()) > state.history) state.pairs.pop_front();
      }
      w = trial;
      r.loss_after = f;
      r.step_length = t;
      r.backtracks = b;
      return r;
    }
    if (b == kMaxBacktracks) {
      throw LineSearchFailure("Armijo line search failed after " + std::to_string(kMaxBacktracks) +
                              " backtracks");
    }
    t *= 0.5;
  }
}

BatchGeometry prepare_batch(const DistanceField& field, const std::vector<ChartPoint>& batch) {
  if (batch.empty()) throw EmptyBatchError("empty batch");
  const ImmersedManifold& m = field.manifold();
  const int d = m.intrinsic_dim();
  const auto n = static_cast<Eigen::Index>(batch.size());
  BatchGeometry geo;
  geo.chart.resize(d, n);
  geo.d_e.resize(n);
  geo.grad_e.resize(d, n);
  geo.g_inv.resize(batch.size());
  for (Eigen::Index b = 0; b < n; ++b) {
    const ChartPoint& q = batch[static_cast<std::size_t>(b)];
    const ImmersionJet jet = immersion_jet(m, q, false);
    const ChartMatrix g = jet.jacobian.transpose() * jet.jacobian;
    if (!(g.determinant() >= 1e-14)) throw SingularMetricError("degenerate metric in training batch");
    geo.g_inv[static_cast<std::size_t>(b)] = g.inverse();
    geo.chart.col(b) = q.coords;
    const Eigen::VectorXd diff = jet.position - field.origin_ambient();
    const double de = diff.norm();
    geo.d_e[b] = de;
    if (de > 0) {
      geo.grad_e.col(b) = jet.jacobian.transpose() * diff / de;
    } else {
      geo.grad_e.col(b).setZero();
    }
  }
  return geo;
}

double batch_loss(const FieldParams& params, const BatchGeometry& geo, Eigen::VectorXd* grad) {
  const Eigen::Index n = geo.d_e.size();
  if (n == 0) throw EmptyBatchError("empty batch");
  const int d = static_cast<int>(geo.chart.rows());
  if (grad != nullptr) grad->setZero(params.size());

  // Points are independent, so the network runs over cache-sized chunks.
  Eigen::VectorXd sq(n);
  TangentForward net;
  for (Eigen::Index start = 0; start < n; start += kLossChunk) {
    const Eigen::Index len = std::min<Eigen::Index>(kLossChunk, n - start);
    forward_tangent(params, geo.chart.middleCols(start, len), net);
    Eigen::VectorXd raw_bar(len);
    Eigen::MatrixXd raw_grad_bar(d, len);
    for (Eigen::Index c = 0; c < len; ++c) {
      const Eigen::Index b = start + c;
      const double raw = net.raw()[c];
      const double s = softplus(raw);
      const double s1 = logistic(raw);
      const double s2 = s1 * (1 - s1);
      const double de = geo.d_e[b];
      const ChartVector draw = net.raw_grad().col(c);
      const ChartVector ge = geo.grad_e.col(b);
      const ChartVector phi = ge * (1 + s) + de * s1 * draw;
      const ChartVector gphi = geo.g_inv[static_cast<std::size_t>(b)] * phi;
      const double r = phi.dot(gphi) - 1.0;
      sq[b] = r * r;
      // ∂(r²/n)/∂φ = (2r/n)·2g⁻¹φ
      const ChartVector phi_bar = (4.0 * r / static_cast<double>(n)) * gphi;
      raw_bar[c] = phi_bar.dot(ge * s1 + de * s2 * draw);
      raw_grad_bar.col(c) = phi_bar * (de * s1);
    }
    if (grad != nullptr) backward_tangent(params, net, raw_bar, raw_grad_bar, *grad);
  }
  double total = 0.0;
  for (Eigen::Index b = 0; b < n; ++b) total += sq[b];
  return total / static_cast<double>(n);
}

double eikonal_residual(const DistanceFunction& field, const ChartPoint& q) {
  const FieldSample s = field.evaluate(q);
  return s.grad_chart.dot(s.grad_intrinsic) - 1.0;
}

double loss(const DistanceFunction& field, const std::vector<ChartPoint>& batch) {
  if (batch.empty()) throw EmptyBatchError("empty batch");
  double total = 0.0;
  for (const auto& q : batch) {
    const double r = eikonal_residual(field, q);
    total += r * r;
  }
  return total / static_cast<double>(batch.size());
}

double loss(const DistanceField& field, const std::vector<ChartPoint>& batch) {
  return batch_loss(field.params(), prepare_batch(field, batch), nullptr);
}

Eigen::VectorXd loss_grad(const DistanceField& field, const std::vector<ChartPoint>& batch) {
  Eigen::VectorXd grad;
  batch_loss(field.params(), prepare_batch(field, batch), &grad);
  return grad;
}

LbfgsStepResult lbfgs_step(DistanceField& field, const std::vector<ChartPoint>& batch, LbfgsState& state) {
  const BatchGeometry geo = prepare_batch(field, batch);
  FieldParams scratch = field.params();
  Eigen::VectorXd w = scratch.values;
  const Objective objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    scratch.values = x;
    return batch_loss(scratch, geo, g);
  };
  const LbfgsStepResult r = lbfgs_step(w, state, objective);
  field.mutable_params().values = w;
  return r;
}

PointSampler uniform_sampler(const Domain& domain) {
  return [domain](std::mt19937_64& rng) { return domain.sample_uniform(rng); };
}

std::uint64_t parameter_hash(const Eigen::VectorXd& values) {
  std::uint64_t h = 1469598103934665603ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(values.data());
  for (std::size_t i = 0; i < static_cast<std::size_t>(values.size()) * sizeof(double); ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  return h;
}

ResidualStats residual_audit(const DistanceField& field, int n) {
  const Domain& dom = field.manifold().domain();
  if (dom.dim() != 2 || n < 2) throw DimensionError("residual audit needs a 2-D chart and n >= 2");
  std::vector<ChartPoint> points;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      ChartPoint q{dom.lo()[0] + dom.width(0) * i / (n - 1), dom.lo()[1] + dom.width(1) * j / (n - 1)};
      if ((q.coords - field.origin().coords).norm() < 1e-12) continue;
      points.push_back(q);
    }
  }
  const BatchGeometry geo = prepare_batch(field, points);
  std::vector<double> abs_r;
  TangentForward net;
  forward_tangent(field.params(), geo.chart, net);
  for (Eigen::Index b = 0; b < geo.d_e.size(); ++b) {
    const double raw = net.raw()[b];
    const ChartVector phi = ChartVector(geo.grad_e.col(b)) * (1 + softplus(raw)) +
                            geo.d_e[b] * logistic(raw) * ChartVector(net.raw_grad().col(b));
    abs_r.push_back(std::abs(phi.dot(geo.g_inv[static_cast<std::size_t>(b)] * phi) - 1.0));
  }
  ResidualStats st;
  st.points = static_cast<int>(abs_r.size());
  st.median = percentile(abs_r, 0.5);
  st.p90 = percentile(abs_r, 0.9);
  st.p99 = percentile(abs_r, 0.99);
  st.max = *std::max_element(abs_r.begin(), abs_r.end());
  return st;
}

std::string TrainReport::to_json() const {
  nlohmann::ordered_json doc;
  doc["manifold"] = manifold;
  doc["origin"] = origin;
  doc["seed"] = config.seed;
  doc["config"] = {{"adam_steps", config.adam_steps},
                   {"lbfgs_steps", config.lbfgs_steps},
                   {"batch_size", config.batch_size},
                   {"lr0", config.lr0},
                   {"decay_factor", config.decay_factor},
                   {"decay_every", config.decay_every},
                   {"warmup_steps", config.warmup_steps},
                   {"beta1", config.beta1},
                   {"beta2", config.beta2},
                   {"eps", config.eps},
                   {"lbfgs_history", config.lbfgs_history},
                   {"holdout_grid", config.holdout_grid},
                   {"width", config.arch.width},
                   {"depth", config.arch.depth},
                   {"backbone", to_string(config.arch.backbone)}};
  nlohmann::ordered_json schedule = nlohmann::ordered_json::object();
  for (int step : {0, 5000, 7000}) schedule[std::to_string(step)] = lr_schedule(config, step);
  doc["lr_schedule"] = schedule;
  doc["adam_loss"] = adam_loss;
  doc["lbfgs_loss_before"] = lbfgs_loss_before;
  doc["lbfgs_loss_after"] = lbfgs_loss_after;
  doc["lbfgs_stop"] = lbfgs_stop;
  doc["residual_abs"] = {{"grid", config.holdout_grid},
                         {"points", residuals.points},
                         {"median", residuals.median},
                         {"p90", residuals.p90},
                         {"p99", residuals.p99},
                         {"max", residuals.max}};
  doc["wall_clock_seconds"] = wall_clock_seconds;
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(parameter_hash));
  doc["parameter_hash"] = hash;
  return doc.dump(1);
}

TrainResult train(const ImmersedManifold& m, const ChartPoint& p, const TrainConfig& cfg,
                  const PointSampler& sampler, const TrainOptions& options) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  Architecture arch = cfg.arch;
  arch.input_dim = m.intrinsic_dim();
  DistanceField field(m, init_params(m, p, arch, cfg.seed));

  TrainReport report;
  report.config = cfg;
  report.config.arch = arch;
  report.manifold = m.name();
  report.origin.assign(p.coords.begin(), p.coords.end());

  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  auto draw_batch = [&] {
    std::vector<ChartPoint> batch;
    batch.reserve(static_cast<std::size_t>(cfg.batch_size));
    for (int b = 0; b < cfg.batch_size; ++b) batch.push_back(sampler(rng));
    return batch;
  };
  auto diverged = [&](const std::string& phase, int step, const Eigen::VectorXd& last_good) {
    std::string msg = "training diverged: non-finite loss at " + phase + " step " + std::to_string(step);
    if (options.divergence_checkpoint) {
      DistanceField dump = field;
      dump.mutable_params().values = last_good;
      save_checkpoint(dump, *options.divergence_checkpoint);
      msg += "; last finite parameters written to " + options.divergence_checkpoint->string();
    }
    throw TrainingDivergedError(msg);
  };

  AdamState adam;
  Eigen::VectorXd grad;
  report.adam_loss.reserve(static_cast<std::size_t>(cfg.adam_steps));
  for (int step = 0; step < cfg.adam_steps; ++step) {
    const BatchGeometry geo = prepare_batch(field, draw_batch());
    const double value = batch_loss(field.params(), geo, &grad);
    if (!std::isfinite(value) || !grad.allFinite()) diverged("adam", step, field.params().values);
    report.adam_loss.push_back(value);
    const Eigen::VectorXd last_good = field.params().values;
    adam_step(field.mutable_params().values, adam, grad, lr_schedule(cfg, step), cfg);
    if (!field.params().values.allFinite()) diverged("adam", step, last_good);
    if (options.progress && (step % options.progress_every == 0 || step + 1 == cfg.adam_steps)) {
      options.progress("adam", step, value);
    }
  }

  LbfgsState lbfgs;
  lbfgs.history = cfg.lbfgs_history;
  for (int step = 0; step < cfg.lbfgs_steps; ++step) {
    const Eigen::VectorXd last_good = field.params().values;
    LbfgsStepResult r;
    try {
      r = lbfgs_step(field, draw_batch(), lbfgs);
    } catch (const LineSearchFailure& e) {
      report.lbfgs_stop = std::string("line search stalled at step ") + std::to_string(step);
      break;
    }
    if (!std::isfinite(r.loss_before) || !field.params().values.allFinite()) diverged("lbfgs", step, last_good);
    report.lbfgs_loss_before.push_back(r.loss_before);
    report.lbfgs_loss_after.push_back(r.loss_after);
    if (options.progress) options.progress("lbfgs", step, r.loss_after);
  }

  if (m.intrinsic_dim() == 2) report.residuals = residual_audit(field, cfg.holdout_grid);
  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report.parameter_hash = parameter_hash(field.params().values);
  return {std::move(field), std::move(report)};
}

}  // namespace geodesic_atlas
