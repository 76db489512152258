#include "geodesic_atlas/model.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "geodesic_atlas/errors.hpp"
#include "geodesic_atlas/geometry.hpp"
#include "geodesic_atlas/network.hpp"

namespace geodesic_atlas {

namespace {

using Json = nlohmann::ordered_json;

std::string shape(int rows, int cols) { return std::to_string(rows) + "x" + std::to_string(cols); }

}  // namespace

std::string to_string(Backbone b) { return b == Backbone::kModifiedMlp ? "modified-mlp" : "mlp"; }

Backbone backbone_from_string(const std::string& name) {
  if (name == "modified-mlp") return Backbone::kModifiedMlp;
  if (name == "mlp") return Backbone::kPlainMlp;
  throw ConfigError("unknown backbone '" + name + "' (expected modified-mlp or mlp)");
}

std::vector<TensorSlot> parameter_layout(const Architecture& arch) {
  if (arch.input_dim < 1 || arch.input_dim > kMaxDim) {
    throw DimensionError("network input width " + std::to_string(arch.input_dim) + " outside [1, " +
                         std::to_string(kMaxDim) + "]");
  }
  if (arch.width < 1 || arch.depth < 1) throw ConfigError("network width and depth must be positive");
  std::vector<TensorSlot> slots;
  Eigen::Index offset = 0;
  auto add = [&](std::string name, int rows, int cols) {
    slots.push_back({std::move(name), rows, cols, offset});
    offset += slots.back().size();
  };
  const int h = arch.width;
  if (arch.backbone == Backbone::kModifiedMlp) {
    add("encoder_u.weight", h, arch.input_dim);
    add("encoder_u.bias", h, 1);
    add("encoder_v.weight", h, arch.input_dim);
    add("encoder_v.bias", h, 1);
  }
  for (int l = 0; l < arch.depth; ++l) {
    const std::string prefix = "hidden." + std::to_string(l);
    add(prefix + ".weight", h, l == 0 ? arch.input_dim : h);
    add(prefix + ".bias", h, 1);
  }
  add("output.weight", 1, h);
  add("output.bias", 1, 1);
  return slots;
}

const TensorSlot& FieldParams::slot(const std::string& name) const {
  for (const auto& s : layout_) {
    if (s.name == name) return s;
  }
  throw FormatError("no parameter tensor named '" + name + "'");
}

Eigen::Map<const Eigen::MatrixXd> FieldParams::tensor(const std::string& name) const {
  const TensorSlot& s = slot(name);
  return {values.data() + s.offset, s.rows, s.cols};
}

Eigen::Map<Eigen::MatrixXd> FieldParams::tensor(const std::string& name) {
  const TensorSlot& s = slot(name);
  return {values.data() + s.offset, s.rows, s.cols};
}

FieldParams init_params(const ImmersedManifold& m, const ChartPoint& origin, const Architecture& arch,
                        std::uint64_t seed) {
  if (arch.input_dim != m.intrinsic_dim()) {
    throw DimensionError("network input width " + std::to_string(arch.input_dim) +
                         " does not match manifold dimension " + std::to_string(m.intrinsic_dim()));
  }
  require_in_domain(m, origin);
  FieldParams p;
  p.arch = arch;
  p.layout_ = parameter_layout(arch);
  p.values = Eigen::VectorXd::Zero(p.layout_.back().offset + p.layout_.back().size());
  p.origin = origin;
  p.domain = m.domain();
  p.manifold_name = m.name();
  p.manifold_scale = m.scale();
  p.seed = seed;

  std::mt19937_64 rng(seed);
  for (const auto& s : p.layout_) {
    if (s.cols == 1 && s.name.ends_with(".bias")) continue;
    const double limit = std::sqrt(6.0 / (s.rows + s.cols));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (Eigen::Index k = 0; k < s.size(); ++k) p.values[s.offset + k] = u(rng);
  }
  return p;
}

ChartVector standardise(const Domain& domain, const ChartPoint& q) {
  if (q.dim() != domain.dim()) throw DimensionError("point dimension does not match domain");
  if (!q.is_finite()) throw NonFiniteError("non-finite chart point");
  if (!domain.contains(q)) throw DomainError("point outside the chart domain");
  return (2.0 * (q.coords - domain.lo()).array() / (domain.hi() - domain.lo()).array() - 1.0).matrix();
}

ChartVector standardise_slope(const Domain& domain) {
  return (2.0 / (domain.hi() - domain.lo()).array()).matrix();
}

double mlp_forward(const FieldParams& params, const ChartVector& q_std) {
  if (q_std.size() != params.arch.input_dim) {
    throw DimensionError("input has " + std::to_string(q_std.size()) + " coordinates, network expects " +
                         std::to_string(params.arch.input_dim));
  }
  if (!q_std.allFinite()) throw NonFiniteError("non-finite network input");
  Eigen::MatrixXd x = q_std;
  return forward_values(params, x)[0];
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double distance_head(double raw, const ImmersedManifold& m, const ChartPoint& p, const ChartPoint& q) {
  require_in_domain(m, p);
  require_in_domain(m, q);
  if (!std::isfinite(raw)) throw NonFiniteError("non-finite network output");
  const double d_e = (immerse(m, q) - immerse(m, p)).norm();
  return d_e * (1.0 + softplus(raw));
}

DistanceField::DistanceField(ImmersedManifold manifold, FieldParams params)
    : manifold_(std::move(manifold)), params_(std::move(params)) {
  if (params_.arch.input_dim != manifold_.intrinsic_dim()) {
    throw DimensionError("network input width " + std::to_string(params_.arch.input_dim) +
                         " does not match manifold dimension " + std::to_string(manifold_.intrinsic_dim()));
  }
  origin_ambient_ = immerse(manifold_, params_.origin);
}

FieldSample DistanceField::evaluate(const ChartPoint& q) const {
  const MetricData g = metric_inverse(manifold_, q);
  const ImmersionJet jet = immersion_jet(manifold_, q, false);
  const Eigen::VectorXd diff = jet.position - origin_ambient_;
  const double d_e = diff.norm();

  TangentForward net;
  forward_tangent(params_, Eigen::MatrixXd(q.coords), net);
  const double raw = net.raw()[0];
  const double s = softplus(raw);

  FieldSample out;
  out.phi = d_e * (1.0 + s);
  if (d_e == 0.0) {
    out.grad_chart = ChartVector::Zero(q.dim());
  } else {
    const ChartVector grad_e = jet.jacobian.transpose() * diff / d_e;
    out.grad_chart = grad_e * (1.0 + s) + d_e * logistic(raw) * ChartVector(net.raw_grad().col(0));
  }
  out.grad_intrinsic = g.g_inv * out.grad_chart;
  return out;
}

void save_checkpoint(const DistanceField& field, const std::filesystem::path& path, const std::string& provenance) {
  const FieldParams& p = field.params();
  Json doc;
  doc["format_version"] = p.format_version;
  doc["manifold"] = {{"name", p.manifold_name},
                     {"scale", p.manifold_scale},
                     {"intrinsic_dim", p.arch.input_dim},
                     {"domain",
                      {{"lo", std::vector<double>(p.domain.lo().begin(), p.domain.lo().end())},
                       {"hi", std::vector<double>(p.domain.hi().begin(), p.domain.hi().end())}}}};
  std::vector<bool> periodic;
  for (int i = 0; i < p.domain.dim(); ++i) periodic.push_back(p.domain.periodic(i));
  doc["manifold"]["domain"]["periodic"] = periodic;
  doc["origin"] = std::vector<double>(p.origin.coords.begin(), p.origin.coords.end());
  doc["architecture"] = {{"input_dim", p.arch.input_dim},
                         {"width", p.arch.width},
                         {"depth", p.arch.depth},
                         {"backbone", to_string(p.arch.backbone)},
                         {"activation", "tanh"},
                         {"head", "softplus"}};
  doc["seed"] = p.seed;
  Json tensors = Json::object();
  for (const auto& s : parameter_layout(p.arch)) {
    const auto t = p.tensor(s.name);
    Json rows = Json::array();
    for (int r = 0; r < s.rows; ++r) {
      Json row = Json::array();
      for (int c = 0; c < s.cols; ++c) row.push_back(t(r, c));
      rows.push_back(std::move(row));
    }
    tensors[s.name] = std::move(rows);
  }
  doc["parameters"] = std::move(tensors);
  if (!provenance.empty()) doc["provenance"] = Json::parse(provenance);

  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << doc.dump(1) << '\n';
  if (!os) throw IoError("failed writing " + path.string());
}

FieldParams read_params(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::stringstream buffer;
  buffer << is.rdbuf();

  Json doc;
  try {
    doc = Json::parse(buffer.str());
  } catch (const Json::parse_error& e) {
    throw FormatError(path.string() + ": malformed or truncated checkpoint (" + e.what() + ")");
  }

  try {
    FieldParams p;
    p.format_version = doc.at("format_version").get<int>();
    if (p.format_version != kCheckpointFormatVersion) {
      throw FormatError("unsupported checkpoint format_version " + std::to_string(p.format_version) +
                        " (expected " + std::to_string(kCheckpointFormatVersion) + ")");
    }
    const Json& arch = doc.at("architecture");
    p.arch.input_dim = arch.at("input_dim").get<int>();
    p.arch.width = arch.at("width").get<int>();
    p.arch.depth = arch.at("depth").get<int>();
    p.arch.backbone = backbone_from_string(arch.at("backbone").get<std::string>());
    if (arch.at("activation").get<std::string>() != "tanh") throw FormatError("unsupported activation");
    if (arch.at("head").get<std::string>() != "softplus") throw FormatError("unsupported distance head");

    const Json& man = doc.at("manifold");
    p.manifold_name = man.at("name").get<std::string>();
    p.manifold_scale = man.at("scale").get<double>();
    const int dim = man.at("intrinsic_dim").get<int>();
    if (dim != p.arch.input_dim) {
      throw FormatError("checkpoint manifold dimension " + std::to_string(dim) +
                        " does not match network input width " + std::to_string(p.arch.input_dim));
    }
    const auto lo = man.at("domain").at("lo").get<std::vector<double>>();
    const auto hi = man.at("domain").at("hi").get<std::vector<double>>();
    const auto periodic = man.at("domain").at("periodic").get<std::vector<bool>>();
    const auto origin = doc.at("origin").get<std::vector<double>>();
    const auto d = static_cast<std::size_t>(dim);
    if (dim < 1 || dim > kMaxDim || lo.size() != d || hi.size() != d || periodic.size() != d ||
        origin.size() != d) {
      throw FormatError("checkpoint domain/origin sizes disagree with dimension " + std::to_string(dim));
    }
    p.domain = Domain(Eigen::Map<const ChartVector>(lo.data(), dim), Eigen::Map<const ChartVector>(hi.data(), dim));
    for (int i = 0; i < dim; ++i) p.domain.set_periodic(i, periodic[static_cast<std::size_t>(i)]);
    p.origin = ChartPoint(Eigen::Map<const ChartVector>(origin.data(), dim));
    p.seed = doc.at("seed").get<std::uint64_t>();

    p.layout_ = parameter_layout(p.arch);
    p.values = Eigen::VectorXd::Zero(p.layout_.back().offset + p.layout_.back().size());
    const Json& tensors = doc.at("parameters");
    if (tensors.size() != p.layout_.size()) {
      throw FormatError("checkpoint has " + std::to_string(tensors.size()) + " tensors, architecture needs " +
                        std::to_string(p.layout_.size()));
    }
    for (const auto& s : p.layout_) {
      if (!tensors.contains(s.name)) throw FormatError("missing parameter tensor '" + s.name + "'");
      const Json& rows = tensors.at(s.name);
      const int nr = static_cast<int>(rows.size());
      const int nc = nr > 0 ? static_cast<int>(rows.at(0).size()) : 0;
      if (nr != s.rows || nc != s.cols) {
        throw FormatError("tensor '" + s.name + "' has shape " + shape(nr, nc) + ", expected " +
                          shape(s.rows, s.cols));
      }
      auto t = p.tensor(s.name);
      for (int r = 0; r < s.rows; ++r) {
        const Json& row = rows.at(r);
        if (static_cast<int>(row.size()) != s.cols) throw FormatError("ragged tensor '" + s.name + "'");
        for (int c = 0; c < s.cols; ++c) t(r, c) = row.at(c).get<double>();
      }
    }
    if (!p.values.allFinite()) throw FormatError("checkpoint contains non-finite parameters");
    return p;
  } catch (const Json::exception& e) {
    throw FormatError(path.string() + ": invalid checkpoint (" + e.what() + ")");
  }
}

DistanceField load_checkpoint(const std::filesystem::path& path, const ImmersedManifold& m) {
  FieldParams p = read_params(path);
  if (p.arch.input_dim != m.intrinsic_dim()) {
    throw FormatError("checkpoint intrinsic dimension " + std::to_string(p.arch.input_dim) +
                      " does not match manifold '" + m.name() + "' dimension " +
                      std::to_string(m.intrinsic_dim()));
  }
  if (p.manifold_name != m.name()) {
    throw FormatError("checkpoint was trained on '" + p.manifold_name + "', not '" + m.name() + "'");
  }
  if (p.manifold_scale != m.scale()) {
    throw FormatError("checkpoint manifold scale " + std::to_string(p.manifold_scale) + " differs from " +
                      std::to_string(m.scale()));
  }
  if (p.domain.lo() != m.domain().lo() || p.domain.hi() != m.domain().hi()) {
    throw FormatError("checkpoint domain bounds differ from manifold '" + m.name() + "'");
  }
  if (!m.domain().contains(p.origin)) throw FormatError("checkpoint origin lies outside the manifold domain");
  return DistanceField(m, std::move(p));
}

}  // namespace geodesic_atlas
