#include "geodesic_atlas/network.hpp"

#include "geodesic_atlas/errors.hpp"

namespace geodesic_atlas {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// tanh through the vectorised exp; absolute error within a few ulp of 1.
template <typename Derived>
Eigen::ArrayXXd tanh_array(const Eigen::ArrayBase<Derived>& x) {
  const Eigen::ArrayXXd e = (-2.0 * x.abs()).exp();
  return (1.0 - e) / (1.0 + e) * x.sign();
}

struct Shape {
  Eigen::Index batch;
  int dim;
  Eigen::Index value_cols() const { return batch; }
  Eigen::Index cols() const { return batch * (1 + dim); }
  Eigen::Index tangent(int i) const { return batch * (1 + i); }
};

// Z = tanh(W·in + b) on the value block, Ż_i = (1 − Z²) ⊙ (W·iṅ_i).
void tanh_layer(const Eigen::Map<const MatrixXd>& w, const Eigen::Map<const MatrixXd>& b, MatrixXd input,
                const Shape& s, TangentLayerCache& cache) {
  const MatrixXd a = w * input;
  cache.input = std::move(input);
  cache.out.resize(a.rows(), s.cols());
  cache.out.leftCols(s.batch) = tanh_array((a.leftCols(s.batch).colwise() + b.col(0)).array()).matrix();
  cache.pre_dot = a.rightCols(s.batch * s.dim);
  const auto z = cache.out.leftCols(s.batch).array();
  const Eigen::ArrayXXd slope = 1.0 - z.square();
  for (int i = 0; i < s.dim; ++i) {
    cache.out.middleCols(s.tangent(i), s.batch) =
        (slope * cache.pre_dot.middleCols(s.batch * i, s.batch).array()).matrix();
  }
}

// h' = U + Z ⊙ (V − U) together with its tangents.
MatrixXd mix(const MatrixXd& u, const MatrixXd& v, const MatrixXd& z, const Shape& s) {
  MatrixXd h(z.rows(), s.cols());
  const Eigen::ArrayXXd gap = v.leftCols(s.batch).array() - u.leftCols(s.batch).array();
  const auto z0 = z.leftCols(s.batch).array();
  h.leftCols(s.batch) = (u.leftCols(s.batch).array() + z0 * gap).matrix();
  for (int i = 0; i < s.dim; ++i) {
    const Eigen::Index c = s.tangent(i);
    h.middleCols(c, s.batch) =
        (u.middleCols(c, s.batch).array() + z.middleCols(c, s.batch).array() * gap +
         z0 * (v.middleCols(c, s.batch).array() - u.middleCols(c, s.batch).array()))
            .matrix();
  }
  return h;
}

// Adjoint of tanh_layer: returns the pre-activation adjoint Ā given Z̄.
MatrixXd tanh_backward(const TangentLayerCache& cache, const MatrixXd& out_bar, const Shape& s) {
  const auto z = cache.out.leftCols(s.batch).array();
  const Eigen::ArrayXXd slope = 1.0 - z.square();
  MatrixXd a_bar(out_bar.rows(), s.cols());
  Eigen::ArrayXXd acc = out_bar.leftCols(s.batch).array();
  for (int i = 0; i < s.dim; ++i) {
    const auto zt_bar = out_bar.middleCols(s.tangent(i), s.batch).array();
    acc -= 2.0 * z * zt_bar * cache.pre_dot.middleCols(s.batch * i, s.batch).array();
    a_bar.middleCols(s.tangent(i), s.batch) = (zt_bar * slope).matrix();
  }
  a_bar.leftCols(s.batch) = (acc * slope).matrix();
  return a_bar;
}

void linear_backward(const FieldParams& params, const std::string& name, const TangentLayerCache& cache,
                     const MatrixXd& a_bar, const Shape& s, VectorXd& grad) {
  const TensorSlot& ws = params.slot(name + ".weight");
  const TensorSlot& bs = params.slot(name + ".bias");
  Eigen::Map<MatrixXd> gw(grad.data() + ws.offset, ws.rows, ws.cols);
  Eigen::Map<VectorXd> gb(grad.data() + bs.offset, bs.rows);
  gw.noalias() += a_bar * cache.input.transpose();
  gb += a_bar.leftCols(s.batch).rowwise().sum();
}

std::string hidden_name(int l) { return "hidden." + std::to_string(l); }

}  // namespace

VectorXd forward_values(const FieldParams& params, const MatrixXd& x_std) {
  const Architecture& arch = params.arch;
  auto layer = [&](const std::string& name, const MatrixXd& in) -> MatrixXd {
    return tanh_array(((params.tensor(name + ".weight") * in).colwise() + params.tensor(name + ".bias").col(0))
                          .array())
        .matrix();
  };
  MatrixXd u, v;
  const bool modified = arch.backbone == Backbone::kModifiedMlp;
  if (modified) {
    u = layer("encoder_u", x_std);
    v = layer("encoder_v", x_std);
  }
  MatrixXd h = x_std;
  for (int l = 0; l < arch.depth; ++l) {
    MatrixXd z = layer(hidden_name(l), h);
    h = modified ? MatrixXd((u.array() + z.array() * (v - u).array()).matrix()) : std::move(z);
  }
  const VectorXd out = (params.tensor("output.weight") * h).transpose();
  return (out.array() + params.tensor("output.bias")(0, 0)).matrix();
}

void forward_tangent(const FieldParams& params, const MatrixXd& chart, TangentForward& state) {
  const Architecture& arch = params.arch;
  if (chart.rows() != arch.input_dim) {
    throw DimensionError("batch has " + std::to_string(chart.rows()) + " coordinates, network expects " +
                         std::to_string(arch.input_dim));
  }
  if (chart.cols() == 0) throw EmptyBatchError("empty batch");
  const Shape s{chart.cols(), arch.input_dim};
  state.batch_ = static_cast<int>(s.batch);
  state.dim_ = s.dim;

  const ChartVector lo = params.domain.lo();
  const ChartVector slope = standardise_slope(params.domain);
  MatrixXd x = MatrixXd::Zero(s.dim, s.cols());
  x.leftCols(s.batch) = ((chart.colwise() - VectorXd(lo)).array().colwise() * slope.array()).matrix();
  x.leftCols(s.batch).array() -= 1.0;
  for (int i = 0; i < s.dim; ++i) x.row(i).segment(s.tangent(i), s.batch).setConstant(slope[i]);

  const bool modified = arch.backbone == Backbone::kModifiedMlp;
  if (modified) {
    tanh_layer(params.tensor("encoder_u.weight"), params.tensor("encoder_u.bias"), x, s, state.enc_u_);
    tanh_layer(params.tensor("encoder_v.weight"), params.tensor("encoder_v.bias"), x, s, state.enc_v_);
  }
  state.hidden_.resize(static_cast<std::size_t>(arch.depth));
  MatrixXd h = std::move(x);
  for (int l = 0; l < arch.depth; ++l) {
    TangentLayerCache& cache = state.hidden_[static_cast<std::size_t>(l)];
    const std::string name = hidden_name(l);
    tanh_layer(params.tensor(name + ".weight"), params.tensor(name + ".bias"), std::move(h), s, cache);
    h = modified ? mix(state.enc_u_.out, state.enc_v_.out, cache.out, s) : cache.out;
  }
  state.last_ = std::move(h);

  const Eigen::RowVectorXd out = params.tensor("output.weight") * state.last_;
  state.raw_ = (out.head(s.batch).array() + params.tensor("output.bias")(0, 0)).matrix().transpose();
  state.raw_grad_.resize(s.dim, s.batch);
  for (int i = 0; i < s.dim; ++i) state.raw_grad_.row(i) = out.segment(s.tangent(i), s.batch);
}

void backward_tangent(const FieldParams& params, const TangentForward& state, const VectorXd& raw_bar,
                      const MatrixXd& raw_grad_bar, VectorXd& grad) {
  const Architecture& arch = params.arch;
  const Shape s{state.batch_, state.dim_};
  if (raw_bar.size() != s.batch || raw_grad_bar.rows() != s.dim || raw_grad_bar.cols() != s.batch ||
      grad.size() != params.size()) {
    throw DimensionError("backward_tangent: adjoint shapes do not match the forward pass");
  }

  Eigen::RowVectorXd seed(s.cols());
  seed.head(s.batch) = raw_bar.transpose();
  for (int i = 0; i < s.dim; ++i) seed.segment(s.tangent(i), s.batch) = raw_grad_bar.row(i);

  {
    const TensorSlot& ws = params.slot("output.weight");
    Eigen::Map<Eigen::RowVectorXd>(grad.data() + ws.offset, ws.cols).noalias() +=
        seed * state.last_.transpose();
    grad[params.slot("output.bias").offset] += raw_bar.sum();
  }
  MatrixXd h_bar = params.tensor("output.weight").transpose() * seed;

  const bool modified = arch.backbone == Backbone::kModifiedMlp;
  const Eigen::Index width = arch.width;
  MatrixXd u_bar, v_bar;
  Eigen::ArrayXXd gap;
  if (modified) {
    u_bar = MatrixXd::Zero(width, s.cols());
    v_bar = MatrixXd::Zero(width, s.cols());
    gap = state.enc_v_.out.leftCols(s.batch).array() - state.enc_u_.out.leftCols(s.batch).array();
  }

  for (int l = arch.depth - 1; l >= 0; --l) {
    const TangentLayerCache& cache = state.hidden_[static_cast<std::size_t>(l)];
    MatrixXd z_bar;
    if (modified) {
      const auto& u = state.enc_u_.out;
      const auto& v = state.enc_v_.out;
      const auto z0 = cache.out.leftCols(s.batch).array();
      const auto hb0 = h_bar.leftCols(s.batch).array();
      z_bar.resize(width, s.cols());
      Eigen::ArrayXXd z0_bar = hb0 * gap;
      Eigen::ArrayXXd cross = Eigen::ArrayXXd::Zero(width, s.batch);  // Σ_i H̄̇_i ⊙ Ż_i
      for (int i = 0; i < s.dim; ++i) {
        const Eigen::Index c = s.tangent(i);
        const auto hbi = h_bar.middleCols(c, s.batch).array();
        z0_bar += hbi * (v.middleCols(c, s.batch).array() - u.middleCols(c, s.batch).array());
        cross += hbi * cache.out.middleCols(c, s.batch).array();
        z_bar.middleCols(c, s.batch) = (hbi * gap).matrix();
        u_bar.middleCols(c, s.batch).array() += hbi * (1.0 - z0);
        v_bar.middleCols(c, s.batch).array() += hbi * z0;
      }
      z_bar.leftCols(s.batch) = z0_bar.matrix();
      u_bar.leftCols(s.batch).array() += hb0 * (1.0 - z0) - cross;
      v_bar.leftCols(s.batch).array() += hb0 * z0 + cross;
    } else {
      z_bar = std::move(h_bar);
    }
    const MatrixXd a_bar = tanh_backward(cache, z_bar, s);
    linear_backward(params, hidden_name(l), cache, a_bar, s, grad);
    if (l > 0) h_bar.noalias() = params.tensor(hidden_name(l) + ".weight").transpose() * a_bar;
  }

  if (modified) {
    linear_backward(params, "encoder_u", state.enc_u_, tanh_backward(state.enc_u_, u_bar, s), s, grad);
    linear_backward(params, "encoder_v", state.enc_v_, tanh_backward(state.enc_v_, v_bar, s), s, grad);
  }
}

}  // namespace geodesic_atlas
