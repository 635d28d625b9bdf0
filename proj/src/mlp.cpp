#include "ntklab/mlp.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace ntklab {

namespace {

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

std::string to_string(Activation act) {
  switch (act) {
    case Activation::SiLU: return "silu";
    case Activation::ReLU: return "relu";
    case Activation::Erf: return "erf";
  }
  throw std::logic_error("unknown activation");
}

Activation activation_from_string(const std::string& name) {
  if (name == "silu" || name == "SiLU") return Activation::SiLU;
  if (name == "relu" || name == "ReLU") return Activation::ReLU;
  if (name == "erf" || name == "Erf") return Activation::Erf;
  throw std::invalid_argument("unknown activation: " + name);
}

double activate(Activation act, double z) {
  switch (act) {
    case Activation::SiLU: return z * logistic(z);
    case Activation::ReLU: return z > 0.0 ? z : 0.0;
    case Activation::Erf: return std::erf(z);
  }
  throw std::logic_error("unknown activation");
}

double activate_grad(Activation act, double z) {
  switch (act) {
    case Activation::SiLU: {
      const double s = logistic(z);
      return s * (1.0 + z * (1.0 - s));
    }
    case Activation::ReLU: return z > 0.0 ? 1.0 : 0.0;
    case Activation::Erf: return 2.0 / std::sqrt(M_PI) * std::exp(-z * z);
  }
  throw std::logic_error("unknown activation");
}

Eigen::MatrixXd activate(Activation act, const Eigen::MatrixXd& z) {
  return z.unaryExpr([act](double v) { return activate(act, v); });
}

Eigen::MatrixXd activate_grad(Activation act, const Eigen::MatrixXd& z) {
  return z.unaryExpr([act](double v) { return activate_grad(act, v); });
}

std::vector<int> Architecture::layer_sizes() const {
  std::vector<int> sizes;
  sizes.reserve(hidden_widths.size() + 2);
  sizes.push_back(input_dim);
  sizes.insert(sizes.end(), hidden_widths.begin(), hidden_widths.end());
  sizes.push_back(num_heads);
  return sizes;
}

long long Architecture::param_count() const {
  const auto sizes = layer_sizes();
  long long count = 0;
  for (std::size_t l = 1; l < sizes.size(); ++l)
    count += static_cast<long long>(sizes[l]) * sizes[l - 1] + sizes[l];
  return count;
}

void Architecture::validate(bool require_hidden) const {
  if (input_dim < 1) throw std::invalid_argument("input_dim must be positive");
  if (num_heads < 1) throw std::invalid_argument("num_heads must be positive");
  for (int w : hidden_widths)
    if (w < 1) throw std::invalid_argument("hidden widths must be positive");
  if (require_hidden && hidden_widths.empty())
    throw std::invalid_argument("network needs at least one hidden layer");
  if (!(sigma_w > 0.0)) throw std::invalid_argument("sigma_w must be positive");
  if (sigma_b < 0.0) throw std::invalid_argument("sigma_b must be nonnegative");
}

Eigen::VectorXd MlpParams::flatten() const {
  Eigen::VectorXd flat(arch.param_count());
  long long at = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const auto& w = weights[l];
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) flat[at++] = w(i, j);
    flat.segment(at, biases[l].size()) = biases[l];
    at += biases[l].size();
  }
  return flat;
}

MlpParams MlpParams::from_flat(const Architecture& arch, const Eigen::VectorXd& flat) {
  if (flat.size() != arch.param_count())
    throw std::invalid_argument("flat vector length does not match architecture");
  MlpParams params;
  params.arch = arch;
  const auto sizes = arch.layer_sizes();
  long long at = 0;
  for (std::size_t l = 1; l < sizes.size(); ++l) {
    Eigen::MatrixXd w(sizes[l], sizes[l - 1]);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = flat[at++];
    params.weights.push_back(std::move(w));
    params.biases.emplace_back(flat.segment(at, sizes[l]));
    at += sizes[l];
  }
  return params;
}

long long MlpParams::param_offset(int layer) const {
  const auto sizes = arch.layer_sizes();
  if (layer < 0 || layer >= arch.depth())
    throw std::invalid_argument("layer index out of range");
  long long at = 0;
  for (int l = 0; l < layer; ++l)
    at += static_cast<long long>(sizes[l + 1]) * sizes[l] + sizes[l + 1];
  return at;
}

void MlpParams::validate() const {
  arch.validate(false);
  const auto sizes = arch.layer_sizes();
  if (weights.size() != sizes.size() - 1 || biases.size() != weights.size())
    throw std::invalid_argument("layer count does not match architecture");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != sizes[l + 1] || weights[l].cols() != sizes[l])
      throw std::invalid_argument("weight shape mismatch");
    if (biases[l].size() != sizes[l + 1])
      throw std::invalid_argument("bias shape mismatch");
    if (!weights[l].allFinite() || !biases[l].allFinite())
      throw std::invalid_argument("parameters contain non-finite entries");
  }
}

MlpParams init_params(const Architecture& arch, Rng rng) {
  arch.validate(false);
  MlpParams params;
  params.arch = arch;
  const auto sizes = arch.layer_sizes();
  for (std::size_t l = 1; l < sizes.size(); ++l) {
    params.weights.push_back(rng.normal_matrix(sizes[l], sizes[l - 1]));
    params.biases.push_back(rng.normal_vector(sizes[l]));
  }
  return params;
}

MlpParams init_params(const Architecture& arch, std::uint64_t seed) {
  return init_params(arch, Rng(seed));
}

ForwardTrace forward(const MlpParams& params, const Eigen::MatrixXd& inputs) {
  if (inputs.cols() != params.arch.input_dim)
    throw std::invalid_argument("input width does not match architecture");
  const int depth = params.arch.depth();
  const double sw = params.arch.sigma_w;
  const double sb = params.arch.sigma_b;

  ForwardTrace trace;
  trace.inputs = inputs;
  trace.pre.reserve(depth);
  trace.post.reserve(depth - 1);

  const Eigen::MatrixXd* activations = &trace.inputs;
  for (int l = 0; l < depth; ++l) {
    const double scale = sw / std::sqrt(static_cast<double>(params.weights[l].cols()));
    Eigen::MatrixXd z = scale * (*activations * params.weights[l].transpose());
    z.rowwise() += sb * params.biases[l].transpose();
    trace.pre.push_back(std::move(z));
    if (l + 1 < depth) {
      trace.post.push_back(activate(params.arch.activation, trace.pre.back()));
      activations = &trace.post.back();
    }
  }
  return trace;
}

Eigen::MatrixXd forward_outputs(const MlpParams& params, const Eigen::MatrixXd& inputs) {
  return forward(params, inputs).outputs();
}

namespace {

// Per-layer gradient blocks of one head's scalar output at one input.
// The final layer only touches row `head`, so just that row is stored.
struct HeadGradient {
  std::vector<Eigen::MatrixXd> w;  // layers 1..L-1
  std::vector<Eigen::VectorXd> b;
  Eigen::VectorXd last_row;        // d out / d W^L(head, :)
  double last_bias = 0.0;

  double dot(const HeadGradient& other) const {
    double acc = last_row.dot(other.last_row) + last_bias * other.last_bias;
    for (std::size_t l = 0; l < w.size(); ++l)
      acc += w[l].cwiseProduct(other.w[l]).sum() + b[l].dot(other.b[l]);
    return acc;
  }

  double dot_last_layer(const HeadGradient& other) const {
    return last_row.dot(other.last_row) + last_bias * other.last_bias;
  }
};

HeadGradient head_gradient(const MlpParams& params, const Eigen::VectorXd& input, int head) {
  const int depth = params.arch.depth();
  if (head < 0 || head >= params.arch.num_heads)
    throw std::invalid_argument("head index out of range");
  const double sw = params.arch.sigma_w;
  const double sb = params.arch.sigma_b;

  const ForwardTrace trace = forward(params, input.transpose());

  HeadGradient grad;
  grad.w.resize(depth - 1);
  grad.b.resize(depth - 1);

  // Final linear layer: d f_head / d W^L(head,:) = scale * x^L.
  const Eigen::VectorXd last_in =
      depth > 1 ? trace.post[depth - 2].row(0).transpose() : Eigen::VectorXd(input);
  const double last_scale = sw / std::sqrt(static_cast<double>(params.weights[depth - 1].cols()));
  grad.last_row = last_scale * last_in;
  grad.last_bias = sb;

  // Backpropagate delta = d f_head / d z^l.
  Eigen::VectorXd delta = last_scale * params.weights[depth - 1].row(head).transpose();
  for (int l = depth - 2; l >= 0; --l) {
    delta = delta.cwiseProduct(
        activate_grad(params.arch.activation, trace.pre[l]).row(0).transpose());
    const Eigen::VectorXd& layer_in =
        l == 0 ? input : Eigen::VectorXd(trace.post[l - 1].row(0).transpose());
    const double scale = sw / std::sqrt(static_cast<double>(params.weights[l].cols()));
    grad.w[l] = scale * delta * layer_in.transpose();
    grad.b[l] = sb * delta;
    if (l > 0) delta = scale * (params.weights[l].transpose() * delta);
  }
  return grad;
}

}  // namespace

Eigen::VectorXd grad_params(const MlpParams& params, const Eigen::VectorXd& input, int head) {
  const HeadGradient grad = head_gradient(params, input, head);
  const int depth = params.arch.depth();
  const auto sizes = params.arch.layer_sizes();

  Eigen::VectorXd flat = Eigen::VectorXd::Zero(params.arch.param_count());
  long long at = 0;
  for (int l = 0; l < depth - 1; ++l) {
    const auto& w = grad.w[l];
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) flat[at++] = w(i, j);
    flat.segment(at, grad.b[l].size()) = grad.b[l];
    at += grad.b[l].size();
  }
  // Final layer: only row `head` of W^L and bias entry `head` are nonzero.
  const long long ncols = sizes[depth - 1];
  flat.segment(at + head * ncols, ncols) = grad.last_row;
  at += static_cast<long long>(sizes[depth]) * ncols;
  flat[at + head] = grad.last_bias;
  return flat;
}

Eigen::VectorXd jvp(const MlpParams& params, const Eigen::VectorXd& input,
                    const Eigen::VectorXd& tangent) {
  if (tangent.size() != params.arch.param_count())
    throw std::invalid_argument("tangent length does not match parameter count");
  const MlpParams dir = MlpParams::from_flat(params.arch, tangent);
  const int depth = params.arch.depth();
  const double sw = params.arch.sigma_w;
  const double sb = params.arch.sigma_b;

  Eigen::VectorXd x = input;        // current activations
  Eigen::VectorXd dx = Eigen::VectorXd::Zero(input.size());
  Eigen::VectorXd z, dz;
  for (int l = 0; l < depth; ++l) {
    const double scale = sw / std::sqrt(static_cast<double>(params.weights[l].cols()));
    z = scale * (params.weights[l] * x) + sb * params.biases[l];
    dz = scale * (dir.weights[l] * x + params.weights[l] * dx) + sb * dir.biases[l];
    if (l + 1 < depth) {
      dx = dz.cwiseProduct(z.unaryExpr(
          [act = params.arch.activation](double v) { return activate_grad(act, v); }));
      x = z.unaryExpr([act = params.arch.activation](double v) { return activate(act, v); });
    }
  }
  return dz;
}

MlpParams zero_last_layer(const MlpParams& params) {
  MlpParams out = params;
  out.weights.back().setZero();
  out.biases.back().setZero();
  return out;
}

namespace {

Eigen::MatrixXd ntk_gram(const MlpParams& params, const Eigen::MatrixXd& xs,
                         const Eigen::MatrixXd& ys, int head, bool last_layer_only) {
  const bool aliased = xs.data() == ys.data() && xs.rows() == ys.rows();
  std::vector<HeadGradient> gx;
  gx.reserve(xs.rows());
  for (Eigen::Index i = 0; i < xs.rows(); ++i)
    gx.push_back(head_gradient(params, xs.row(i).transpose(), head));

  std::vector<HeadGradient> gy_store;
  const std::vector<HeadGradient>* gy = &gx;
  if (!aliased) {
    gy_store.reserve(ys.rows());
    for (Eigen::Index j = 0; j < ys.rows(); ++j)
      gy_store.push_back(head_gradient(params, ys.row(j).transpose(), head));
    gy = &gy_store;
  }

  Eigen::MatrixXd gram(xs.rows(), ys.rows());
  for (Eigen::Index i = 0; i < xs.rows(); ++i) {
    const Eigen::Index jstart = aliased ? i : 0;
    for (Eigen::Index j = jstart; j < ys.rows(); ++j) {
      const double v = last_layer_only ? gx[i].dot_last_layer((*gy)[j]) : gx[i].dot((*gy)[j]);
      gram(i, j) = v;
      if (aliased) gram(j, i) = v;
    }
  }
  return gram;
}

}  // namespace

Eigen::MatrixXd empirical_ntk(const MlpParams& params, const Eigen::MatrixXd& xs,
                              const Eigen::MatrixXd& ys, int head) {
  return ntk_gram(params, xs, ys, head, false);
}

Eigen::MatrixXd empirical_ntk_last_layer(const MlpParams& params, const Eigen::MatrixXd& xs,
                                         const Eigen::MatrixXd& ys, int head) {
  return ntk_gram(params, xs, ys, head, true);
}

ParamBlocks loss_gradient(const MlpParams& params, const Eigen::MatrixXd& inputs,
                          const Eigen::MatrixXd& residual) {
  const int depth = params.arch.depth();
  if (residual.rows() != inputs.rows() || residual.cols() != params.arch.num_heads)
    throw std::invalid_argument("residual shape mismatch");
  const double sw = params.arch.sigma_w;
  const double sb = params.arch.sigma_b;

  const ForwardTrace trace = forward(params, inputs);

  ParamBlocks grad;
  grad.weights.resize(depth);
  grad.biases.resize(depth);

  Eigen::MatrixXd delta = residual;  // N x n_l, d loss / d z^l
  for (int l = depth - 1; l >= 0; --l) {
    const Eigen::MatrixXd& layer_in = l == 0 ? inputs : trace.post[l - 1];
    const double scale = sw / std::sqrt(static_cast<double>(params.weights[l].cols()));
    grad.weights[l] = scale * (delta.transpose() * layer_in);
    grad.biases[l] = sb * delta.colwise().sum().transpose();
    if (l > 0) {
      delta = (delta * params.weights[l]) * scale;
      delta.array() *= activate_grad(params.arch.activation, trace.pre[l - 1]).array();
    }
  }
  return grad;
}

void axpy(MlpParams& params, const ParamBlocks& blocks, double scale) {
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    params.weights[l] += scale * blocks.weights[l];
    params.biases[l] += scale * blocks.biases[l];
  }
}

void save_params(const std::string& path, const MlpParams& params) {
  nlohmann::json header;
  header["format"] = "ntklab-params";
  header["version"] = 1;
  header["order"] = "layer-major;row-major-weights-then-bias";
  header["arch"] = {{"input_dim", params.arch.input_dim},
                    {"hidden_widths", params.arch.hidden_widths},
                    {"num_heads", params.arch.num_heads},
                    {"activation", to_string(params.arch.activation)},
                    {"sigma_w", params.arch.sigma_w},
                    {"sigma_b", params.arch.sigma_b}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << header.dump() << '\n';
  const Eigen::VectorXd flat = params.flatten();
  out.write(reinterpret_cast<const char*>(flat.data()),
            static_cast<std::streamsize>(flat.size() * sizeof(double)));
  if (!out) throw std::runtime_error("short write to " + path);
}

MlpParams load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("missing header in " + path);
  const nlohmann::json header = nlohmann::json::parse(line);
  if (header.at("format") != "ntklab-params" || header.at("version") != 1)
    throw std::runtime_error("unsupported checkpoint format in " + path);

  Architecture arch;
  const auto& j = header.at("arch");
  arch.input_dim = j.at("input_dim").get<int>();
  arch.hidden_widths = j.at("hidden_widths").get<std::vector<int>>();
  arch.num_heads = j.at("num_heads").get<int>();
  arch.activation = activation_from_string(j.at("activation").get<std::string>());
  arch.sigma_w = j.at("sigma_w").get<double>();
  arch.sigma_b = j.at("sigma_b").get<double>();

  Eigen::VectorXd flat(arch.param_count());
  in.read(reinterpret_cast<char*>(flat.data()),
          static_cast<std::streamsize>(flat.size() * sizeof(double)));
  if (!in) throw std::runtime_error("truncated checkpoint " + path);
  return MlpParams::from_flat(arch, flat);
}

}  // namespace ntklab
