#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "ntklab/experiment.hpp"
#include "ntklab/gp.hpp"

using namespace ntklab;

namespace {

Architecture linear_arch(double sw, double sb) {
  Architecture arch;
  arch.input_dim = 2;
  arch.num_heads = 1;
  arch.sigma_w = sw;
  arch.sigma_b = sb;
  return arch;  // depth 1: kappa(x,y) = sw^2/2 x.y + sb^2
}

Dataset toy_dataset() {
  // Appendix-style generator at small scale; silu depth-2 kernels apply.
  ExperimentConfig cfg;
  cfg.n_test = 5;
  return gen_dataset(cfg, 3);
}

ExperimentConfig cfg3() {
  ExperimentConfig cfg;
  cfg.n_test = 5;
  return cfg;
}

}  // namespace

TEST_CASE("conditioning on two points with a hand-inverted kernel") {
  // Linear kernel with sigma_w = sqrt(2), sigma_b = 1 on x1=(1,0), x2=(0,1):
  //   K_XX = [[2,1],[1,2]], K_*X = [2,2] at x*=(1,1), K_** = 3.
  // With y = (1,-1): alpha = K^-1 y = (1,-1), mean* = 0,
  // cov* = 3 - [2,2] K^-1 [2,2]^T = 3 - 8/3 = 1/3.
  Dataset data;
  data.train_x.resize(2, 2);
  data.train_x << 1.0, 0.0, 0.0, 1.0;
  data.train_y.resize(2, 1);
  data.train_y << 1.0, -1.0;
  data.test_x.resize(1, 2);
  data.test_x << 1.0, 1.0;

  const KernelSpec prior = nngp_spec(linear_arch(std::sqrt(2.0), 1.0));
  const GaussianLaw law = condition_gp(prior, data, data.test_x);
  CHECK(law.mean(0, 0) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(law.cov(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-8));

  SUBCASE("observation noise enters the train block") {
    // With sigma_n^2 = 1: K_XX + I = [[3,1],[1,3]], inverse (1/8)[[3,-1],[-1,3]]
    // alpha = (1/2, -1/2), mean* = 0, cov* = 3 - [2,2](1/8)[[3,-1],[-1,3]][2,2]^T = 1.
    const GaussianLaw noisy = condition_gp(prior, data, data.test_x, 1.0);
    CHECK(noisy.mean(0, 0) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(noisy.cov(0, 0) == doctest::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("noise-free interpolation at training points") {
  const ExperimentConfig cfg = cfg3();
  const Dataset data = toy_dataset();
  Dataset interp = data;
  interp.test_x = data.train_x;

  const GaussianLaw law = condition_gp(cfg.kappa_spec(), interp, interp.test_x);
  CHECK((law.mean - data.train_y).cwiseAbs().maxCoeff() < 1e-4);
  CHECK(law.variances().maxCoeff() < 1e-8);
}

TEST_CASE("empty test set gives an empty law") {
  const ExperimentConfig cfg = cfg3();
  Dataset data = toy_dataset();
  data.test_x.resize(0, 3);
  const GaussianLaw law = condition_gp(cfg.kappa_spec(), data, data.test_x);
  CHECK(law.mean.rows() == 0);
  CHECK(law.cov.rows() == 0);
  const GaussianLaw law2 = converged_ensemble_law(cfg.kappa_spec(), cfg.theta_spec(), data,
                                                  data.test_x);
  CHECK(law2.cov.rows() == 0);
}

TEST_CASE("converged ensemble law") {
  const ExperimentConfig cfg = cfg3();
  const Dataset data = toy_dataset();

  SUBCASE("training points collapse onto the labels") {
    Dataset interp = data;
    interp.test_x = data.train_x;
    const GaussianLaw law =
        converged_ensemble_law(cfg.kappa_spec(), cfg.theta_spec(), interp, interp.test_x);
    CHECK((law.mean - data.train_y).cwiseAbs().maxCoeff() < 1e-4);
    CHECK(law.variances().maxCoeff() < 1e-8);
  }

  SUBCASE("replacing kappa by theta collapses to the ntk posterior") {
    const GaussianLaw mixed =
        converged_ensemble_law(cfg.theta_spec(), cfg.theta_spec(), data, data.test_x);
    const GaussianLaw posterior = ntk_posterior(cfg.theta_spec(), data, data.test_x);
    CHECK((mixed.cov - posterior.cov).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((mixed.mean - posterior.mean).cwiseAbs().maxCoeff() < 1e-10);
  }

  SUBCASE("laws pass their own symmetry and psd checks") {
    const GaussianLaw law =
        converged_ensemble_law(cfg.kappa_spec(), cfg.theta_spec(), data, data.test_x);
    CHECK_NOTHROW(law.validate());
    CHECK(law.provenance == LawProvenance::ConvergedEnsemble);
  }

  SUBCASE("diagonal fast path matches the full law") {
    const GaussianLaw law =
        converged_ensemble_law(cfg.kappa_spec(), cfg.theta_spec(), data, data.test_x);
    const Eigen::VectorXd diag =
        converged_ensemble_variances(cfg.kappa_spec(), cfg.theta_spec(), data, data.test_x);
    CHECK((diag - law.variances()).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("rnd error law") {
  const ExperimentConfig cfg = cfg3();
  const Dataset data = toy_dataset();

  SUBCASE("zero mean and zero covariance at training points") {
    Dataset interp = data;
    interp.test_x = data.train_x;
    const GaussianLaw law = rnd_error_law(cfg.kappa_spec(), cfg.kappa_spec(), cfg.theta_spec(),
                                          interp, interp.test_x);
    CHECK(law.mean.cwiseAbs().maxCoeff() == 0.0);
    CHECK(law.variances().maxCoeff() < 1e-8);
  }

  SUBCASE("identical predictor and target kernels double the ensemble covariance") {
    const GaussianLaw errors = rnd_error_law(cfg.kappa_spec(), cfg.kappa_spec(),
                                             cfg.theta_spec(), data, data.test_x);
    const GaussianLaw ensemble =
        converged_ensemble_law(cfg.kappa_spec(), cfg.theta_spec(), data, data.test_x);
    CHECK((errors.cov - 2.0 * ensemble.cov).cwiseAbs().maxCoeff() < 1e-10);
  }

  SUBCASE("aligning the error prior with the ntk recovers the posterior") {
    const GaussianLaw collapsed =
        error_law_with_prior(cfg.theta_spec(), cfg.theta_spec(), data, data.test_x);
    const GaussianLaw posterior = ntk_posterior(cfg.theta_spec(), data, data.test_x);
    CHECK((collapsed.cov - posterior.cov).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(collapsed.mean.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("ntk posterior") {
  const ExperimentConfig cfg = cfg3();
  const Dataset data = toy_dataset();
  const GaussianLaw posterior = ntk_posterior(cfg.theta_spec(), data, data.test_x);

  SUBCASE("equals generic conditioning with the ntk prior") {
    const GaussianLaw generic = condition_gp(cfg.theta_spec(), data, data.test_x);
    CHECK((posterior.cov - generic.cov).cwiseAbs().maxCoeff() == 0.0);
    CHECK((posterior.mean - generic.mean).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("posterior variance never exceeds the prior diagonal") {
    const Eigen::VectorXd prior_diag = gram_diagonal(cfg.theta_spec(), data.test_x);
    CHECK(((prior_diag - posterior.variances()).array() >= -1e-10).all());
  }

  SUBCASE("diagonal fast path matches") {
    const Eigen::VectorXd diag = ntk_posterior_variances(cfg.theta_spec(), data, data.test_x);
    CHECK((diag - posterior.variances()).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("finite time mean") {
  const ExperimentConfig cfg = cfg3();
  const Dataset data = toy_dataset();

  SUBCASE("zero time gives the zero function") {
    const Eigen::MatrixXd mean = finite_time_mean(cfg.theta_spec(), data, data.test_x, 0.0);
    CHECK(mean.cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("large time converges to the kernel regression mean") {
    const Eigen::MatrixXd late = finite_time_mean(cfg.theta_spec(), data, data.test_x, 1e8);
    const GaussianLaw posterior = ntk_posterior(cfg.theta_spec(), data, data.test_x);
    CHECK((late - posterior.mean).cwiseAbs().maxCoeff() < 1e-6);
  }

  SUBCASE("negative time is rejected") {
    CHECK_THROWS_AS(finite_time_mean(cfg.theta_spec(), data, data.test_x, -1.0),
                    std::invalid_argument);
  }
}

TEST_CASE("sampling follows the law at the monte-carlo rate") {
  const ExperimentConfig cfg = cfg3();
  const Dataset data = toy_dataset();
  const GaussianLaw law = converged_ensemble_law(cfg.kappa_spec(), cfg.theta_spec(), data,
                                                 data.test_x);
  for (const int count : {100, 10000}) {
    const Eigen::MatrixXd draws = sample(law, Rng(99), count);
    const Eigen::VectorXd emp_mean = draws.colwise().mean().transpose();
    const Eigen::RowVectorXd mean_row = emp_mean.transpose();
    const Eigen::MatrixXd centered = draws.rowwise() - mean_row;
    const Eigen::MatrixXd emp_cov = centered.transpose() * centered / (count - 1);
    // per-entry tolerance ~ 5 standard errors of the estimator
    const double scale = std::sqrt(law.cov.diagonal().maxCoeff());
    const double tol = 5.0 * scale * scale / std::sqrt(static_cast<double>(count));
    CHECK((emp_mean - law.mean.col(0)).cwiseAbs().maxCoeff() <
          5.0 * scale / std::sqrt(static_cast<double>(count)));
    CHECK((emp_cov - law.cov).cwiseAbs().maxCoeff() < tol);
  }
}

TEST_CASE("robust cholesky") {
  SUBCASE("records the jitter level used") {
    Eigen::MatrixXd psd(2, 2);
    psd << 2.0, 0.5, 0.5, 1.0;
    const RobustCholesky chol = robust_cholesky(psd);
    CHECK(chol.jitter == doctest::Approx(1e-10 * 1.5).epsilon(1e-12));
  }

  SUBCASE("escalates and finally reports the smallest eigenvalue") {
    Eigen::MatrixXd indefinite(2, 2);
    indefinite << 1.0, 2.0, 2.0, 1.0;  // eigenvalues 3 and -1
    CHECK_THROWS_WITH_AS(robust_cholesky(indefinite), doctest::Contains("smallest eigenvalue"),
                         std::runtime_error);
  }
}

TEST_CASE("law validation rejects corrupted covariances") {
  GaussianLaw law;
  law.mean = Eigen::MatrixXd::Zero(2, 1);
  law.cov.resize(2, 2);
  law.cov << 1.0, 2.0, 2.0, 1.0;  // indefinite
  CHECK_THROWS_WITH_AS(law.validate(), doctest::Contains("smallest eigenvalue"),
                       std::runtime_error);
  law.cov << 1.0, 0.3, 0.300001, 1.0;  // asymmetric beyond tolerance
  CHECK_THROWS_WITH_AS(law.validate(), doctest::Contains("asymmetric"), std::runtime_error);
}

TEST_CASE("multi-output labels produce a mean column per head") {
  const ExperimentConfig cfg = cfg3();
  Dataset data = toy_dataset();
  Eigen::MatrixXd two_col(data.train_y.rows(), 2);
  two_col.col(0) = data.train_y.col(0);
  two_col.col(1) = 2.0 * data.train_y.col(0);
  data.train_y = two_col;

  const GaussianLaw law = ntk_posterior(cfg.theta_spec(), data, data.test_x);
  CHECK(law.mean.cols() == 2);
  CHECK((law.mean.col(1) - 2.0 * law.mean.col(0)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(law.cov.rows() == data.test_x.rows());
}

TEST_CASE("law export writes csv pair plus metadata") {
  const ExperimentConfig cfg = cfg3();
  const Dataset data = toy_dataset();
  const GaussianLaw law = ntk_posterior(cfg.theta_spec(), data, data.test_x);
  const std::string prefix =
      (std::filesystem::temp_directory_path() / "ntklab_law_test").string();
  write_law_csv(prefix, law);

  CHECK(std::filesystem::exists(prefix + ".mean.csv"));
  CHECK(std::filesystem::exists(prefix + ".cov.csv"));
  std::ifstream meta(prefix + ".meta.json");
  const nlohmann::json j = nlohmann::json::parse(meta);
  CHECK(j.at("provenance") == "ntk-posterior");
  CHECK(j.at("jitter").get<double>() > 0.0);
  for (const char* suffix : {".mean.csv", ".cov.csv", ".meta.json"})
    std::filesystem::remove(prefix + suffix);
}
