#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "geodesic_atlas/distance_function.hpp"
#include "geodesic_atlas/manifold.hpp"

namespace geodesic_atlas {

inline constexpr int kCheckpointFormatVersion = 1;

enum class Backbone {
  kModifiedMlp,  // gated by two input encoders: h' = (1 − Z) ⊙ U + Z ⊙ V
  kPlainMlp,
};

std::string to_string(Backbone b);
Backbone backbone_from_string(const std::string& name);

struct Architecture {
  int input_dim = 2;
  int width = 128;
  int depth = 4;  // hidden layers
  Backbone backbone = Backbone::kModifiedMlp;

  bool operator==(const Architecture&) const = default;
};

/// Location of one named tensor inside the flat parameter vector. Tensors are
/// stored column-major; checkpoints write them row by row.
struct TensorSlot {
  std::string name;
  int rows = 0;
  int cols = 0;
  Eigen::Index offset = 0;

  Eigen::Index size() const { return static_cast<Eigen::Index>(rows) * cols; }
};

/// Ordered tensor slots for an architecture (encoders first, output last).
std::vector<TensorSlot> parameter_layout(const Architecture& arch);

/// All network weights plus the metadata needed to evaluate φ_θ(·; p).
struct FieldParams {
  Architecture arch;
  Eigen::VectorXd values;
  ChartPoint origin;
  Domain domain;  // defines the standardisation map
  std::string manifold_name;
  double manifold_scale = 1.0;
  std::uint64_t seed = 0;
  int format_version = kCheckpointFormatVersion;

  Eigen::Index size() const { return values.size(); }
  const TensorSlot& slot(const std::string& name) const;
  Eigen::Map<const Eigen::MatrixXd> tensor(const std::string& name) const;
  Eigen::Map<Eigen::MatrixXd> tensor(const std::string& name);

 private:
  friend FieldParams init_params(const ImmersedManifold&, const ChartPoint&, const Architecture&, std::uint64_t);
  friend FieldParams read_params(const std::filesystem::path&);
  std::vector<TensorSlot> layout_;
};

/// Glorot-uniform weights, zero biases.
FieldParams init_params(const ImmersedManifold& m, const ChartPoint& origin, const Architecture& arch,
                        std::uint64_t seed);

/// Affine map of each coordinate from [lo, hi] to [−1, 1].
ChartVector standardise(const Domain& domain, const ChartPoint& q);

/// Per-coordinate slope of `standardise`, 2 / (hi − lo).
ChartVector standardise_slope(const Domain& domain);

/// Network output for one standardised input.
double mlp_forward(const FieldParams& params, const ChartVector& q_std);

double softplus(double x);
double logistic(double x);

/// d_E(ι(p), ι(q)) · (1 + softplus(raw)).
double distance_head(double raw, const ImmersedManifold& m, const ChartPoint& p, const ChartPoint& q);

/// Trained (or freshly initialised) distance field φ_θ(·; p).
class DistanceField final : public DistanceFunction {
 public:
  DistanceField(ImmersedManifold manifold, FieldParams params);

  const ImmersedManifold& manifold() const override { return manifold_; }
  const ChartPoint& origin() const override { return params_.origin; }
  const FieldParams& params() const { return params_; }
  FieldParams& mutable_params() { return params_; }
  const Eigen::VectorXd& origin_ambient() const { return origin_ambient_; }

  /// φ, ∂φ/∂q (forward-mode through network, head and chordal distance) and
  /// g⁻¹∂φ/∂q. At q = p both gradients are reported as zero.
  FieldSample evaluate(const ChartPoint& q) const override;

 private:
  ImmersedManifold manifold_;
  FieldParams params_;
  Eigen::VectorXd origin_ambient_;
};

/// `provenance`, when non-empty, must be a JSON document; it is stored under
/// the "provenance" key and ignored on load.
void save_checkpoint(const DistanceField& field, const std::filesystem::path& path,
                     const std::string& provenance = {});
DistanceField load_checkpoint(const std::filesystem::path& path, const ImmersedManifold& m);

/// Parses and validates a checkpoint without binding it to a manifold.
FieldParams read_params(const std::filesystem::path& path);

}  // namespace geodesic_atlas
