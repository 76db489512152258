#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "geodesic_atlas/model.hpp"

namespace geodesic_atlas {

struct TrainConfig {
  int adam_steps = 20000;
  int lbfgs_steps = 200;
  int batch_size = 1024;
  double lr0 = 1e-3;
  double decay_factor = 0.9;
  int decay_every = 2000;
  int warmup_steps = 5000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int lbfgs_history = 10;
  std::uint64_t seed = 0;
  Architecture arch;
  int holdout_grid = 21;  // nodes per axis of the residual audit grid

  /// Throws ConfigError on out-of-range values.
  void validate() const;

  static TrainConfig desk();
  static TrainConfig paper();
};

double lr_schedule(const TrainConfig& cfg, int step);

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step = 0;
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(Eigen::VectorXd& params, AdamState& state, const Eigen::VectorXd& grad, double lr,
               const TrainConfig& cfg);

struct LbfgsState {
  int history = 10;
  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> pairs;  // (s, y)
};

/// Value of the objective at w; writes the gradient when `grad` is non-null.
using Objective = std::function<double(const Eigen::VectorXd& w, Eigen::VectorXd* grad)>;

struct LbfgsStepResult {
  double loss_before = 0.0;
  double loss_after = 0.0;
  double step_length = 0.0;
  int backtracks = 0;
};

inline constexpr int kMaxBacktracks = 30;
inline constexpr double kArmijoC = 1e-4;

/// Two-loop recursion direction plus Armijo backtracking. Throws
/// LineSearchFailure after kMaxBacktracks halvings.
LbfgsStepResult lbfgs_step(Eigen::VectorXd& w, LbfgsState& state, const Objective& objective);

/// Per-point geometry that does not depend on the network parameters.
struct BatchGeometry {
  Eigen::MatrixXd chart;            // D × B
  Eigen::VectorXd d_e;              // chordal distance to the origin
  Eigen::MatrixXd grad_e;           // ∂d_E/∂q, D × B (zero at the origin)
  std::vector<ChartMatrix> g_inv;
};

BatchGeometry prepare_batch(const DistanceField& field, const std::vector<ChartPoint>& batch);

/// Points per network pass inside batch_loss.
inline constexpr Eigen::Index kLossChunk = 64;

/// Mean squared Eikonal residual on a prepared batch; adds the parameter
/// gradient to `grad` (resized and zeroed first) when non-null.
double batch_loss(const FieldParams& params, const BatchGeometry& geometry, Eigen::VectorXd* grad);

/// φ^{,i} φ_{,i} − 1.
double eikonal_residual(const DistanceFunction& field, const ChartPoint& q);

double loss(const DistanceFunction& field, const std::vector<ChartPoint>& batch);
double loss(const DistanceField& field, const std::vector<ChartPoint>& batch);
Eigen::VectorXd loss_grad(const DistanceField& field, const std::vector<ChartPoint>& batch);

/// One L-BFGS update of the field's parameters on a fixed batch.
LbfgsStepResult lbfgs_step(DistanceField& field, const std::vector<ChartPoint>& batch, LbfgsState& state);

using PointSampler = std::function<ChartPoint(std::mt19937_64&)>;

PointSampler uniform_sampler(const Domain& domain);

/// FNV-1a over the raw bytes of the parameter vector.
std::uint64_t parameter_hash(const Eigen::VectorXd& values);

struct ResidualStats {
  int points = 0;
  double median = 0.0;
  double p90 = 0.0;
  double p99 = 0.0;
  double max = 0.0;
};

/// |residual| percentiles over an n × n grid of the domain, skipping the origin node.
ResidualStats residual_audit(const DistanceField& field, int n);

struct TrainReport {
  TrainConfig config;
  std::string manifold;
  std::vector<double> origin;
  std::vector<double> adam_loss;
  std::vector<double> lbfgs_loss_before;
  std::vector<double> lbfgs_loss_after;
  std::string lbfgs_stop = "completed";
  ResidualStats residuals;
  double wall_clock_seconds = 0.0;
  std::uint64_t parameter_hash = 0;

  std::string to_json() const;
};

struct TrainOptions {
  /// Called every `progress_every` Adam steps and after each L-BFGS step.
  std::function<void(const std::string& phase, int step, double loss)> progress;
  int progress_every = 1000;
  /// Where to dump the last finite parameters if the loss turns non-finite.
  std::optional<std::filesystem::path> divergence_checkpoint;
};

struct TrainResult {
  DistanceField field;
  TrainReport report;
};

/// Adam then L-BFGS, each step on a fresh batch drawn from `sampler`.
TrainResult train(const ImmersedManifold& m, const ChartPoint& p, const TrainConfig& cfg,
                  const PointSampler& sampler, const TrainOptions& options = {});

}  // namespace geodesic_atlas
