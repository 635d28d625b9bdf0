#include "ntklab/gp.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

namespace ntklab {

void Dataset::validate() const {
  if (train_x.rows() < 1) throw std::invalid_argument("dataset needs at least one train point");
  if (train_y.rows() != train_x.rows())
    throw std::invalid_argument("train labels and inputs disagree on row count");
  if (test_x.cols() != train_x.cols())
    throw std::invalid_argument("test and train dimensions differ");
  if (!train_x.allFinite() || !train_y.allFinite() || !test_x.allFinite())
    throw std::invalid_argument("dataset contains non-finite entries");
}

std::string to_string(LawProvenance p) {
  switch (p) {
    case LawProvenance::Conditioned: return "conditioned";
    case LawProvenance::ConvergedEnsemble: return "converged-ensemble";
    case LawProvenance::RndError: return "rnd-error";
    case LawProvenance::NtkPosterior: return "ntk-posterior";
    case LawProvenance::FiniteTime: return "finite-time";
  }
  throw std::logic_error("unknown provenance");
}

void GaussianLaw::validate(double sym_tol, double eig_floor) const {
  if (cov.rows() != cov.cols() || cov.rows() != mean.rows())
    throw std::runtime_error("law shape mismatch");
  if (cov.rows() == 0) return;
  const double asym = (cov - cov.transpose()).cwiseAbs().maxCoeff();
  if (asym > sym_tol)
    throw std::runtime_error("law covariance asymmetric: max |C - C^T| = " + std::to_string(asym));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
  const double lambda_min = eig.eigenvalues().minCoeff();
  if (lambda_min < eig_floor)
    throw std::runtime_error("law covariance not PSD: smallest eigenvalue " +
                             std::to_string(lambda_min));
}

RobustCholesky robust_cholesky(const Eigen::MatrixXd& gram_matrix) {
  const double mean_diag = gram_matrix.diagonal().mean();
  const Eigen::MatrixXd identity =
      Eigen::MatrixXd::Identity(gram_matrix.rows(), gram_matrix.cols());
  for (double level : {1e-10, 1e-8, 1e-6}) {
    const double jitter = level * mean_diag;
    RobustCholesky result;
    result.llt.compute(gram_matrix + jitter * identity);
    result.jitter = jitter;
    result.level = level;
    if (result.llt.info() == Eigen::Success) return result;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram_matrix, Eigen::EigenvaluesOnly);
  throw std::runtime_error("Gram matrix not positive definite within jitter budget; "
                           "smallest eigenvalue " +
                           std::to_string(eig.eigenvalues().minCoeff()));
}

namespace {

GaussianLaw conditioned_law(const Eigen::MatrixXd& k_xx, const Eigen::MatrixXd& k_tx,
                            const Eigen::MatrixXd& k_tt, const Eigen::MatrixXd& labels,
                            double noise_variance) {
  Eigen::MatrixXd train_block = k_xx;
  if (noise_variance > 0.0) train_block.diagonal().array() += noise_variance;
  const RobustCholesky chol = robust_cholesky(train_block);

  GaussianLaw law;
  law.jitter_used = chol.jitter;
  law.mean = k_tx * chol.llt.solve(labels);
  law.cov = k_tt - k_tx * chol.llt.solve(k_tx.transpose());
  return law;
}

}  // namespace

GaussianLaw condition_gp(const KernelSpec& prior_kernel, const Dataset& data,
                         const Eigen::MatrixXd& test, double noise_variance) {
  data.validate();
  if (test.rows() == 0) {
    GaussianLaw law;
    law.mean.resize(0, data.train_y.cols());
    law.cov.resize(0, 0);
    law.provenance = LawProvenance::Conditioned;
    law.kernel_desc = describe(prior_kernel);
    return law;
  }
  const Eigen::MatrixXd k_xx = gram(prior_kernel, data.train_x, data.train_x).entries;
  const Eigen::MatrixXd k_tx = gram(prior_kernel, test, data.train_x).entries;
  const Eigen::MatrixXd k_tt = gram(prior_kernel, test, test).entries;
  GaussianLaw law = conditioned_law(k_xx, k_tx, k_tt, data.train_y, noise_variance);
  law.points = test;
  law.provenance = LawProvenance::Conditioned;
  law.kernel_desc = describe(prior_kernel);
  return law;
}

namespace {

// Covariance of an affine image of the initialization GP:
//   Keps_TT + B^T Keps_XX B - (B^T Keps_XT + h.c.),  B = Th_XX^-1 Th_XT.
// The prior train block is regularized at the same ladder level as Th_XX,
// scaled by its own mean diagonal; this keeps the assembly linear in the
// prior kernel and collapses Keps == Th onto the conditioned posterior
// exactly instead of leaving an O(jitter * ||B||^2) residue.
GaussianLaw affine_image_law(const Eigen::MatrixXd& th_xx, const Eigen::MatrixXd& th_tx,
                             const Eigen::MatrixXd& ke_xx, const Eigen::MatrixXd& ke_xt,
                             const Eigen::MatrixXd& ke_tt, const Eigen::MatrixXd& labels,
                             bool with_mean) {
  const RobustCholesky chol = robust_cholesky(th_xx);
  const Eigen::MatrixXd b = chol.llt.solve(th_tx.transpose());  // N_D x N_T
  const Eigen::MatrixXd cross = b.transpose() * ke_xt;
  Eigen::MatrixXd ke_xx_reg = ke_xx;
  ke_xx_reg.diagonal().array() += chol.level * ke_xx.diagonal().mean();

  GaussianLaw law;
  law.jitter_used = chol.jitter;
  law.cov = ke_tt + b.transpose() * ke_xx_reg * b - cross - cross.transpose();
  law.mean = with_mean ? Eigen::MatrixXd(th_tx * chol.llt.solve(labels))
                       : Eigen::MatrixXd::Zero(th_tx.rows(), labels.cols());
  return law;
}

GaussianLaw mixed_kernel_law(const KernelSpec& eps_prior, const KernelSpec& theta,
                             const Dataset& data, const Eigen::MatrixXd& test,
                             bool with_mean) {
  data.validate();
  if (test.rows() == 0) {
    GaussianLaw law;
    law.mean.resize(0, data.train_y.cols());
    law.cov.resize(0, 0);
    return law;
  }
  const Eigen::MatrixXd th_xx = gram(theta, data.train_x, data.train_x).entries;
  const Eigen::MatrixXd th_tx = gram(theta, test, data.train_x).entries;
  const Eigen::MatrixXd ke_xx = gram(eps_prior, data.train_x, data.train_x).entries;
  // evaluated (test, train) like th_tx so equal specs cancel exactly
  const Eigen::MatrixXd ke_xt = gram(eps_prior, test, data.train_x).entries.transpose();
  const Eigen::MatrixXd ke_tt = gram(eps_prior, test, test).entries;
  GaussianLaw law = affine_image_law(th_xx, th_tx, ke_xx, ke_xt, ke_tt, data.train_y, with_mean);
  law.points = test;
  return law;
}

}  // namespace

GaussianLaw converged_ensemble_law(const KernelSpec& kappa, const KernelSpec& theta,
                                   const Dataset& data, const Eigen::MatrixXd& test) {
  GaussianLaw law = mixed_kernel_law(kappa, theta, data, test, true);
  law.provenance = LawProvenance::ConvergedEnsemble;
  law.kernel_desc = "kappa=" + describe(kappa) + ";theta=" + describe(theta);
  return law;
}

GaussianLaw error_law_with_prior(const KernelSpec& eps_prior, const KernelSpec& theta,
                                 const Dataset& data, const Eigen::MatrixXd& test) {
  GaussianLaw law = mixed_kernel_law(eps_prior, theta, data, test, false);
  law.provenance = LawProvenance::RndError;
  law.kernel_desc = "eps_prior=" + describe(eps_prior) + ";theta=" + describe(theta);
  return law;
}

GaussianLaw rnd_error_law(const KernelSpec& kappa_u, const KernelSpec& kappa_g,
                          const KernelSpec& theta, const Dataset& data,
                          const Eigen::MatrixXd& test) {
  data.validate();
  GaussianLaw law;
  if (test.rows() == 0) {
    law.mean.resize(0, data.train_y.cols());
    law.cov.resize(0, 0);
    law.provenance = LawProvenance::RndError;
    return law;
  }
  const Eigen::MatrixXd th_xx = gram(theta, data.train_x, data.train_x).entries;
  const Eigen::MatrixXd th_tx = gram(theta, test, data.train_x).entries;
  const Eigen::MatrixXd ke_xx = gram(kappa_u, data.train_x, data.train_x).entries +
                                gram(kappa_g, data.train_x, data.train_x).entries;
  const Eigen::MatrixXd ke_xt = (gram(kappa_u, test, data.train_x).entries +
                                 gram(kappa_g, test, data.train_x).entries)
                                    .transpose();
  const Eigen::MatrixXd ke_tt =
      gram(kappa_u, test, test).entries + gram(kappa_g, test, test).entries;

  law = affine_image_law(th_xx, th_tx, ke_xx, ke_xt, ke_tt, data.train_y, false);
  law.points = test;
  law.provenance = LawProvenance::RndError;
  law.kernel_desc = "kappa_u=" + describe(kappa_u) + ";kappa_g=" + describe(kappa_g) +
                    ";theta=" + describe(theta);
  return law;
}

GaussianLaw ntk_posterior(const KernelSpec& theta, const Dataset& data,
                          const Eigen::MatrixXd& test) {
  GaussianLaw law = condition_gp(theta, data, test, 0.0);
  law.provenance = LawProvenance::NtkPosterior;
  law.kernel_desc = describe(theta);
  return law;
}

Eigen::MatrixXd finite_time_mean(const KernelSpec& theta, const Dataset& data,
                                 const Eigen::MatrixXd& test, double tau) {
  data.validate();
  if (tau < 0.0) throw std::invalid_argument("tau must be nonnegative");
  if (test.rows() == 0) return Eigen::MatrixXd(0, data.train_y.cols());
  const Eigen::MatrixXd th_xx = gram(theta, data.train_x, data.train_x).entries;
  const Eigen::MatrixXd th_tx = gram(theta, test, data.train_x).entries;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(th_xx);
  if (eig.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");

  // f(lambda) = (1 - exp(-tau lambda)) / lambda, continuously extended by
  // f -> tau as lambda -> 0 so singular Grams stay well-defined.
  Eigen::VectorXd factors(eig.eigenvalues().size());
  for (Eigen::Index i = 0; i < factors.size(); ++i) {
    const double lambda = eig.eigenvalues()[i];
    factors[i] = lambda > 1e-300 ? -std::expm1(-tau * lambda) / lambda : tau;
  }
  const Eigen::MatrixXd& v = eig.eigenvectors();
  return th_tx * (v * factors.asDiagonal() * v.transpose() * data.train_y);
}

Eigen::VectorXd converged_ensemble_variances(const KernelSpec& kappa, const KernelSpec& theta,
                                             const Dataset& data, const Eigen::MatrixXd& test) {
  data.validate();
  const Eigen::MatrixXd th_xx = gram(theta, data.train_x, data.train_x).entries;
  const Eigen::MatrixXd th_tx = gram(theta, test, data.train_x).entries;
  Eigen::MatrixXd ke_xx = gram(kappa, data.train_x, data.train_x).entries;
  const Eigen::MatrixXd ke_tx = gram(kappa, test, data.train_x).entries;
  const Eigen::VectorXd ke_diag = gram_diagonal(kappa, test);

  const RobustCholesky chol = robust_cholesky(th_xx);
  const Eigen::MatrixXd b = chol.llt.solve(th_tx.transpose());  // N_D x N_T
  ke_xx.diagonal().array() += chol.level * ke_xx.diagonal().mean();

  Eigen::VectorXd out(test.rows());
  for (Eigen::Index i = 0; i < test.rows(); ++i) {
    const Eigen::VectorXd bi = b.col(i);
    out[i] = ke_diag[i] + bi.dot(ke_xx * bi) - 2.0 * bi.dot(ke_tx.row(i).transpose());
  }
  return out;
}

Eigen::VectorXd ntk_posterior_variances(const KernelSpec& theta, const Dataset& data,
                                        const Eigen::MatrixXd& test) {
  data.validate();
  const Eigen::MatrixXd th_xx = gram(theta, data.train_x, data.train_x).entries;
  const Eigen::MatrixXd th_tx = gram(theta, test, data.train_x).entries;
  const Eigen::VectorXd th_diag = gram_diagonal(theta, test);

  const RobustCholesky chol = robust_cholesky(th_xx);
  const Eigen::MatrixXd b = chol.llt.solve(th_tx.transpose());

  Eigen::VectorXd out(test.rows());
  for (Eigen::Index i = 0; i < test.rows(); ++i)
    out[i] = th_diag[i] - th_tx.row(i).dot(b.col(i));
  return out;
}

Eigen::MatrixXd sample(const GaussianLaw& law, Rng rng, int count, int head) {
  if (head < 0 || head >= law.mean.cols()) throw std::invalid_argument("head out of range");
  if (count < 1) throw std::invalid_argument("sample count must be positive");
  const Eigen::Index n = law.cov.rows();
  const RobustCholesky chol = robust_cholesky(law.cov);
  const Eigen::MatrixXd l = chol.llt.matrixL();

  Eigen::MatrixXd draws(count, n);
  for (int s = 0; s < count; ++s)
    draws.row(s) = (law.mean.col(head) + l * rng.normal_vector(n)).transpose();
  return draws;
}

void write_law_csv(const std::string& path_prefix, const GaussianLaw& law) {
  char buf[32];
  {
    std::ofstream out(path_prefix + ".mean.csv");
    if (!out) throw std::runtime_error("cannot open " + path_prefix + ".mean.csv");
    for (Eigen::Index i = 0; i < law.mean.rows(); ++i) {
      for (Eigen::Index j = 0; j < law.mean.cols(); ++j) {
        std::snprintf(buf, sizeof(buf), "%.17g", law.mean(i, j));
        out << buf << (j + 1 < law.mean.cols() ? "," : "");
      }
      out << '\n';
    }
  }
  {
    std::ofstream out(path_prefix + ".cov.csv");
    if (!out) throw std::runtime_error("cannot open " + path_prefix + ".cov.csv");
    for (Eigen::Index i = 0; i < law.cov.rows(); ++i) {
      for (Eigen::Index j = 0; j < law.cov.cols(); ++j) {
        std::snprintf(buf, sizeof(buf), "%.17g", law.cov(i, j));
        out << buf << (j + 1 < law.cov.cols() ? "," : "");
      }
      out << '\n';
    }
  }
  nlohmann::json meta;
  meta["provenance"] = to_string(law.provenance);
  meta["jitter"] = law.jitter_used;
  meta["kernel"] = law.kernel_desc;
  meta["num_points"] = law.cov.rows();
  std::ofstream out(path_prefix + ".meta.json");
  if (!out) throw std::runtime_error("cannot open " + path_prefix + ".meta.json");
  out << meta.dump(2) << '\n';
}

}  // namespace ntklab
