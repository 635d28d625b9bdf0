#pragma once

#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "ntklab/kernels.hpp"
#include "ntklab/rng.hpp"

namespace ntklab {

struct Dataset {
  Eigen::MatrixXd train_x;  // N_D x d_in
  Eigen::MatrixXd train_y;  // N_D x K
  Eigen::MatrixXd test_x;   // N_T x d_in

  void validate() const;
};

enum class LawProvenance { Conditioned, ConvergedEnsemble, RndError, NtkPosterior, FiniteTime };

std::string to_string(LawProvenance p);

/// A Gaussian law on a finite evaluation set: K-column mean (the same scalar
/// covariance applies independently per output head) plus covariance.
struct GaussianLaw {
  Eigen::MatrixXd mean;  // N_T x K
  Eigen::MatrixXd cov;   // N_T x N_T
  Eigen::MatrixXd points;
  LawProvenance provenance = LawProvenance::Conditioned;
  double jitter_used = 0.0;
  std::string kernel_desc;

  Eigen::VectorXd variances() const { return cov.diagonal(); }
  /// Symmetry/PSD checks; throws naming the smallest eigenvalue on failure.
  void validate(double sym_tol = 1e-10, double eig_floor = -1e-8) const;
};

/// Cholesky with an escalating jitter ladder (1e-10, 1e-8, 1e-6 times the
/// mean diagonal). Throws naming the smallest eigenvalue if the ladder is
/// exhausted. jitter reports the diagonal inflation actually used.
struct RobustCholesky {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;  // diagonal inflation applied
  double level = 0.0;   // ladder level selected (jitter / mean diagonal)
};

RobustCholesky robust_cholesky(const Eigen::MatrixXd& gram_matrix);

/// Standard GP conditioning of a zero-mean prior on the training data,
/// with optional observation noise added to the train-train block.
GaussianLaw condition_gp(const KernelSpec& prior_kernel, const Dataset& data,
                         const Eigen::MatrixXd& test, double noise_variance = 0.0);

/// Law of converged, independently initialized networks trained by gradient
/// flow: mean Th_TX Th_XX^-1 Y and the kappa/Theta mixed covariance.
GaussianLaw converged_ensemble_law(const KernelSpec& kappa, const KernelSpec& theta,
                                   const Dataset& data, const Eigen::MatrixXd& test);

/// Zero-mean law of converged RND errors; the error prior is the sum of the
/// predictor and target NNGP kernels.
GaussianLaw rnd_error_law(const KernelSpec& kappa_u, const KernelSpec& kappa_g,
                          const KernelSpec& theta, const Dataset& data,
                          const Eigen::MatrixXd& test);

/// Same covariance assembly with an arbitrary error-prior kernel; with
/// eps_prior = theta this collapses to the centered NTK posterior.
GaussianLaw error_law_with_prior(const KernelSpec& eps_prior, const KernelSpec& theta,
                                 const Dataset& data, const Eigen::MatrixXd& test);

/// Bayesian posterior predictive of the NTK-GP prior; the centered version
/// is the Bayesian-RND error law.
GaussianLaw ntk_posterior(const KernelSpec& theta, const Dataset& data,
                          const Eigen::MatrixXd& test);

/// Expected linearized prediction after effective training time tau with a
/// zero-function initial condition: Th_TX Th_XX^-1 (I - exp(-tau Th_XX)) Y,
/// evaluated through the symmetric eigendecomposition of Th_XX.
Eigen::MatrixXd finite_time_mean(const KernelSpec& theta, const Dataset& data,
                                 const Eigen::MatrixXd& test, double tau);

/// Per-point posterior variances without assembling the full test-test
/// block; identical to the law diagonals, used for large test sets.
Eigen::VectorXd converged_ensemble_variances(const KernelSpec& kappa, const KernelSpec& theta,
                                             const Dataset& data, const Eigen::MatrixXd& test);
Eigen::VectorXd ntk_posterior_variances(const KernelSpec& theta, const Dataset& data,
                                        const Eigen::MatrixXd& test);

/// Draws from the law (mean column `head`), one row per draw; Cholesky of
/// the covariance with the shared jitter ladder.
Eigen::MatrixXd sample(const GaussianLaw& law, Rng rng, int count, int head = 0);

/// CSV pair (mean, covariance) plus a JSON metadata sidecar.
void write_law_csv(const std::string& path_prefix, const GaussianLaw& law);

}  // namespace ntklab
