#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "ntklab/rng.hpp"

namespace ntklab {

enum class Activation { SiLU, ReLU, Erf };

std::string to_string(Activation act);
Activation activation_from_string(const std::string& name);

double activate(Activation act, double z);
double activate_grad(Activation act, double z);
Eigen::MatrixXd activate(Activation act, const Eigen::MatrixXd& z);
Eigen::MatrixXd activate_grad(Activation act, const Eigen::MatrixXd& z);

/// Shape and scaling description of a fully connected network.
///
/// Forward computations use the NTK parametrization: parameters are stored
/// as drawn, N(0,1), and every layer applies sigma_w/sqrt(fan_in) to the
/// weights and sigma_b to the biases inside the forward pass.
struct Architecture {
  int input_dim = 1;
  std::vector<int> hidden_widths;
  int num_heads = 1;
  Activation activation = Activation::SiLU;
  double sigma_w = 1.0;
  double sigma_b = 1.0;

  int depth() const { return static_cast<int>(hidden_widths.size()) + 1; }

  /// n_0 = input_dim, n_1..n_{L-1} hidden, n_L = num_heads.
  std::vector<int> layer_sizes() const;

  long long param_count() const;

  /// Networks need at least one hidden layer; the analytic kernels accept
  /// depth 1 (pure linear model), so they validate with require_hidden=false.
  void validate(bool require_hidden = true) const;
};

/// Layered weights and biases. Immutable by convention: operations return
/// new values instead of mutating.
///
/// The canonical flattened layout, shared by flatten()/from_flat(),
/// grad_params() and jvp() tangents, is: for each layer l = 1..L, the
/// weight matrix W^l in row-major order (entry (i,j) at i*n_{l-1}+j),
/// followed by the bias vector b^l.
struct MlpParams {
  Architecture arch;
  std::vector<Eigen::MatrixXd> weights;  // W^l: n_l x n_{l-1}
  std::vector<Eigen::VectorXd> biases;   // b^l: n_l

  Eigen::VectorXd flatten() const;
  static MlpParams from_flat(const Architecture& arch, const Eigen::VectorXd& flat);

  /// Offset of layer l's block (0-based layer index) in the flat layout.
  long long param_offset(int layer) const;
  long long last_layer_offset() const { return param_offset(arch.depth() - 1); }

  void validate() const;
};

/// Per-layer pre/post activations of a forward pass. outputs() is the last
/// preactivation; there is no output nonlinearity.
struct ForwardTrace {
  Eigen::MatrixXd inputs;                 // N x d_in
  std::vector<Eigen::MatrixXd> pre;       // z^l, N x n_l, l = 1..L
  std::vector<Eigen::MatrixXd> post;      // phi(z^l) for l = 1..L-1

  const Eigen::MatrixXd& outputs() const { return pre.back(); }
};

/// Gradient (or any parameter-shaped value) kept in per-layer blocks.
struct ParamBlocks {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

/// All entries i.i.d. N(0,1); the sigma scalings live in the forward pass.
MlpParams init_params(const Architecture& arch, Rng rng);
MlpParams init_params(const Architecture& arch, std::uint64_t seed);

ForwardTrace forward(const MlpParams& params, const Eigen::MatrixXd& inputs);
Eigen::MatrixXd forward_outputs(const MlpParams& params, const Eigen::MatrixXd& inputs);

/// Exact reverse-mode gradient of output `head` at a single input,
/// flattened in the canonical layout.
Eigen::VectorXd grad_params(const MlpParams& params, const Eigen::VectorXd& input, int head);

/// Forward-mode directional derivative for all heads in one pass:
/// returns (d/ds) f(x; theta + s*tangent) at s=0 as a K-vector.
Eigen::VectorXd jvp(const MlpParams& params, const Eigen::VectorXd& input,
                    const Eigen::VectorXd& tangent);

/// Copy with final-layer weights and biases set to zero.
MlpParams zero_last_layer(const MlpParams& params);

/// Gram matrix of grad_params inner products for one head between all
/// pairs (x in xs, y in ys). Symmetric assembly when ys aliases xs.
Eigen::MatrixXd empirical_ntk(const MlpParams& params, const Eigen::MatrixXd& xs,
                              const Eigen::MatrixXd& ys, int head);

/// Same Gram restricted to final-layer parameters (the Theta^L block).
Eigen::MatrixXd empirical_ntk_last_layer(const MlpParams& params, const Eigen::MatrixXd& xs,
                                         const Eigen::MatrixXd& ys, int head);

/// Batched reverse mode for training: gradient of 1/2 sum residual^2 where
/// residual = f(X) - targets is passed in (N x K).
ParamBlocks loss_gradient(const MlpParams& params, const Eigen::MatrixXd& inputs,
                          const Eigen::MatrixXd& residual);

/// params += scale * blocks, layerwise.
void axpy(MlpParams& params, const ParamBlocks& blocks, double scale);

/// Binary checkpoint: one-line JSON header (arch + layout version tag)
/// followed by the flattened parameters as little-endian doubles.
void save_params(const std::string& path, const MlpParams& params);
MlpParams load_params(const std::string& path);

}  // namespace ntklab
