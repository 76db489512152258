#pragma once

// Batched evaluation of the distance network that carries, next to every
// activation, its derivative with respect to each chart coordinate, plus the
// matching reverse pass. Activations for a batch of B points are stored as
// H × B(1 + D) matrices: block 0 holds values, block 1 + i the derivatives
// along chart coordinate i.

#include <Eigen/Dense>

#include <vector>

#include "geodesic_atlas/model.hpp"

namespace geodesic_atlas {

struct TangentLayerCache {
  Eigen::MatrixXd input;     // layer input, stacked
  Eigen::MatrixXd out;       // tanh output Z, stacked
  Eigen::MatrixXd pre_dot;   // tangent blocks of the pre-activation
};

/// Forward-pass state reused by `backward_tangent`.
class TangentForward {
 public:
  int batch() const { return batch_; }
  int dim() const { return dim_; }

  /// Network outputs, B entries.
  const Eigen::VectorXd& raw() const { return raw_; }
  /// ∂raw/∂q^i (chart coordinates, standardisation slope included), D × B.
  const Eigen::MatrixXd& raw_grad() const { return raw_grad_; }

 private:
  friend void forward_tangent(const FieldParams&, const Eigen::MatrixXd&, TangentForward&);
  friend void backward_tangent(const FieldParams&, const TangentForward&, const Eigen::VectorXd&,
                               const Eigen::MatrixXd&, Eigen::VectorXd&);

  int batch_ = 0;
  int dim_ = 0;
  TangentLayerCache enc_u_, enc_v_;
  std::vector<TangentLayerCache> hidden_;
  Eigen::MatrixXd last_;  // final hidden state, stacked
  Eigen::VectorXd raw_;
  Eigen::MatrixXd raw_grad_;
};

/// Plain forward pass on D × B standardised inputs; returns B outputs.
Eigen::VectorXd forward_values(const FieldParams& params, const Eigen::MatrixXd& x_std);

/// `chart` is D × B raw chart coordinates (standardised internally).
void forward_tangent(const FieldParams& params, const Eigen::MatrixXd& chart, TangentForward& state);

/// Accumulates into `grad` (size params.size()) the parameter gradient of
/// Σ_b raw_bar[b]·raw[b] + Σ_{i,b} raw_grad_bar(i, b)·raw_grad(i, b).
void backward_tangent(const FieldParams& params, const TangentForward& state, const Eigen::VectorXd& raw_bar,
                      const Eigen::MatrixXd& raw_grad_bar, Eigen::VectorXd& grad);

}  // namespace geodesic_atlas
