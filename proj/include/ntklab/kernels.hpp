#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "ntklab/mlp.hpp"

namespace ntklab {

/// Gauss-Hermite rule stored in probabilists' form: points and weights such
/// that E[f(Z)] for Z ~ N(0,1) is approximately sum_i weight[i] * f(point[i]).
class GaussHermite {
 public:
  explicit GaussHermite(int order);
  const Eigen::VectorXd& points() const { return points_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  int order() const { return static_cast<int>(points_.size()); }

 private:
  Eigen::VectorXd points_;
  Eigen::VectorXd weights_;
};

/// Process-wide memoized rule per order; the returned reference stays valid.
const GaussHermite& shared_gauss_hermite(int order);

enum class KernelKind { NNGP, NTK, NtkLastLayer, NtkBelowLast };

std::string to_string(KernelKind kind);

/// Infinite-width kernel description. Only depth, activation and the sigma
/// scalings of `arch` matter; hidden widths and head count are irrelevant in
/// the limit. Depth 1 (no hidden layer) is the linear-model base case.
struct KernelSpec {
  Architecture arch;
  KernelKind kind = KernelKind::NNGP;
  int quadrature_order = 64;
  /// Evaluate activation expectations by quadrature even where a closed
  /// form exists (ReLU, Erf). Diagnostic path; the closed forms are exact.
  bool force_quadrature = false;

  void validate() const { arch.validate(false); }
};

KernelSpec nngp_spec(const Architecture& arch);
KernelSpec ntk_spec(const Architecture& arch);

/// One-line description for CSV headers and law metadata.
std::string describe(const KernelSpec& spec);

struct KernelMatrix {
  Eigen::MatrixXd entries;
  Eigen::MatrixXd row_points;
  Eigen::MatrixXd col_points;
  KernelSpec spec;

  bool square() const { return entries.rows() == entries.cols(); }
  /// Symmetry and eigenvalue checks for the square case; throws naming the
  /// smallest eigenvalue on failure.
  void validate(double sym_tol = 1e-12, double eig_floor = -1e-9) const;
};

/// E[phi(z) phi(z')] and E[phi'(z) phi'(z')] under a centered bivariate
/// normal with covariance [[vxx, vxy], [vxy, vyy]].
struct ActivationMoments {
  double ee = 0.0;
  double dd = 0.0;
};

ActivationMoments bivariate_moments(Activation act, double vxx, double vxy, double vyy,
                                    const GaussHermite& gh, bool force_quadrature = false);

/// Diagonal second moment E[phi(z)^2], z ~ N(0, v).
double diag_second_moment(Activation act, double v, const GaussHermite& gh,
                          bool force_quadrature = false);

/// Recursive NNGP kernel kappa^L(x, y).
double nngp_kernel(const KernelSpec& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& y);

/// Recursive NTK Theta^L(x, y).
double ntk_kernel(const KernelSpec& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& y);

/// (Theta^L_last, Theta^{<=L-1}) with Theta^L_last = kappa (the last-layer
/// NTK block equals the NNGP kernel) and the exact sum reconstructing Theta.
std::pair<double, double> ntk_split(const KernelSpec& spec, const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& y);

/// Kernel value dispatched on spec.kind.
double kernel_value(const KernelSpec& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& y);

/// All-pairs evaluation with cached per-point diagonal recursions and a
/// symmetric fast path when ys aliases xs.
KernelMatrix gram(const KernelSpec& spec, const Eigen::MatrixXd& xs, const Eigen::MatrixXd& ys);

/// Diagonal k(x_i, x_i) for every row of xs.
Eigen::VectorXd gram_diagonal(const KernelSpec& spec, const Eigen::MatrixXd& xs);

/// CSV export: one comment header row naming the spec, then the matrix.
void write_kernel_csv(const std::string& path, const KernelMatrix& km);

}  // namespace ntklab
