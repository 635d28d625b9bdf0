#include "ntklab/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include <Eigen/Dense>

#include "ntklab/experiment.hpp"
#include "ntklab/gp.hpp"
#include "ntklab/kernels.hpp"
#include "ntklab/mlp.hpp"
#include "ntklab/parallel.hpp"
#include "ntklab/stats.hpp"
#include "ntklab/trainers.hpp"

namespace ntklab {

namespace {

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), pattern, a, b, c);
  return buf;
}

std::vector<double> to_vec(const Eigen::VectorXd& v) {
  return {v.data(), v.data() + v.size()};
}

double normal_cdf(double x, double variance) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0 * std::max(variance, 1e-300)));
}

double sample_variance(const Eigen::VectorXd& v) {
  const double mean = v.mean();
  return (v.array() - mean).square().sum() / static_cast<double>(v.size() - 1);
}

// ---------------------------------------------------------------------------
// Independent closed-form oracle for the ReLU kernel recursion (arc-cosine
// family), written directly from the Gaussian integrals rather than through
// the production moment engine.

struct ReluOracle {
  double sw2, sb2;
  int depth;

  static double ee(double a, double c, double b) {
    if (a <= 0.0 || b <= 0.0) return 0.0;
    const double rho = std::clamp(c / std::sqrt(a * b), -1.0, 1.0);
    const double theta = std::acos(rho);
    return std::sqrt(a * b) * (std::sin(theta) + (M_PI - theta) * std::cos(theta)) / (2.0 * M_PI);
  }
  static double dd(double a, double c, double b) {
    if (a <= 0.0 || b <= 0.0) return 0.0;
    const double rho = std::clamp(c / std::sqrt(a * b), -1.0, 1.0);
    return (M_PI - std::acos(rho)) / (2.0 * M_PI);
  }

  std::pair<double, double> eval(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
    const double n0 = static_cast<double>(x.size());
    double kxx = sw2 / n0 * x.dot(x) + sb2;
    double kxy = sw2 / n0 * x.dot(y) + sb2;
    double kyy = sw2 / n0 * y.dot(y) + sb2;
    double theta = kxy;
    for (int l = 2; l <= depth; ++l) {
      const double kdot = sw2 * dd(kxx, kxy, kyy);
      const double nxy = sb2 + sw2 * ee(kxx, kxy, kyy);
      const double nxx = sb2 + sw2 * (kxx / 2.0);
      const double nyy = sb2 + sw2 * (kyy / 2.0);
      theta = theta * kdot + nxy;
      kxx = nxx;
      kyy = nyy;
      kxy = nxy;
    }
    return {kxy, theta};
  }
};

// ---------------------------------------------------------------------------

struct Check {
  bool ok = true;
  std::ostringstream detail;

  void require(bool cond, const std::string& note) {
    if (!cond) {
      ok = false;
      if (detail.tellp() > 0) detail << "; ";
      detail << "FAILED " << note;
    }
  }
  void note(const std::string& s) {
    if (detail.tellp() > 0) detail << "; ";
    detail << s;
  }
};

struct Battery {
  AcceptanceOptions opt;
  ExperimentConfig cfg;  // common experiment shape (SiLU, d=3, sigma=1)

  Architecture arch(int width, int heads) const { return cfg.make_arch(width, heads); }
  KernelSpec kappa() const { return cfg.kappa_spec(); }
  KernelSpec theta() const { return cfg.theta_spec(); }

  Dataset data(int n_test, std::uint64_t stream = 0) const {
    ExperimentConfig c = cfg;
    c.n_test = n_test;
    return gen_dataset(c, Rng(opt.data_seed).child(stream).stream_key());
  }

  Rng rng(int criterion) const { return Rng(opt.master_seed).child(criterion); }

  TrainConfig train_cfg(double lr, long steps, double tol) const {
    TrainConfig c;
    c.learning_rate = lr;
    c.max_steps = steps;
    c.tol = tol;
    return c;
  }
};

// --- 1: reverse-mode gradients and JVPs against central finite differences.
Check criterion_gradients(const Battery& bat) {
  Check check;
  Rng rng = bat.rng(1);
  const double h = 1e-5;
  double worst_grad = 0.0, worst_jvp = 0.0;

  for (int trial = 0; trial < 100; ++trial) {
    Rng trial_rng = rng.child(trial);
    Architecture arch;
    arch.input_dim = 1 + trial % 4;
    arch.num_heads = 1 + trial % 3;
    arch.activation = trial % 2 == 0 ? Activation::SiLU : Activation::Erf;
    arch.sigma_w = 0.8 + 0.4 * trial_rng.uniform();
    arch.sigma_b = 0.5 + 0.5 * trial_rng.uniform();
    arch.hidden_widths = {2 + static_cast<int>(trial_rng.uniform() * 62)};
    if (trial % 3 == 0)
      arch.hidden_widths.push_back(2 + static_cast<int>(trial_rng.uniform() * 14));

    const MlpParams params = init_params(arch, trial_rng.child(1));
    const Eigen::VectorXd x = trial_rng.child(2).normal_vector(arch.input_dim);
    const int head = trial % arch.num_heads;

    const Eigen::VectorXd flat = params.flatten();
    const Eigen::VectorXd grad = grad_params(params, x, head);
    Eigen::VectorXd grad_fd(flat.size());
    for (Eigen::Index p = 0; p < flat.size(); ++p) {
      Eigen::VectorXd plus = flat, minus = flat;
      plus[p] += h;
      minus[p] -= h;
      const double fp =
          forward_outputs(MlpParams::from_flat(arch, plus), x.transpose())(0, head);
      const double fm =
          forward_outputs(MlpParams::from_flat(arch, minus), x.transpose())(0, head);
      grad_fd[p] = (fp - fm) / (2.0 * h);
    }
    worst_grad = std::max(worst_grad, (grad - grad_fd).cwiseAbs().maxCoeff() /
                                          std::max(grad_fd.cwiseAbs().maxCoeff(), 1e-12));

    const Eigen::VectorXd tangent = trial_rng.child(3).normal_vector(flat.size());
    const Eigen::VectorXd j = jvp(params, x, tangent);
    const Eigen::MatrixXd xrow = x.transpose();
    const Eigen::VectorXd jp =
        forward_outputs(MlpParams::from_flat(arch, flat + h * tangent), xrow).row(0);
    const Eigen::VectorXd jm =
        forward_outputs(MlpParams::from_flat(arch, flat - h * tangent), xrow).row(0);
    const Eigen::VectorXd j_fd = (jp - jm) / (2.0 * h);
    worst_jvp = std::max(worst_jvp, (j - j_fd).cwiseAbs().maxCoeff() /
                                        std::max(j_fd.cwiseAbs().maxCoeff(), 1e-12));
  }
  check.require(worst_grad < 1e-6, fmt("grad max rel err %.2e", worst_grad));
  check.require(worst_jvp < 1e-6, fmt("jvp max rel err %.2e", worst_jvp));
  check.note(fmt("grad %.2e, jvp %.2e over 100 nets", worst_grad, worst_jvp));
  return check;
}

// --- 2: kernel recursion against the arc-cosine oracle and Monte-Carlo.
Check criterion_kernels(const Battery& bat) {
  Check check;
  Rng rng = bat.rng(2);

  // ReLU path vs the independent closed-form recursion.
  double worst = 0.0;
  for (int pair = 0; pair < 20; ++pair) {
    Rng pair_rng = rng.child(pair);
    Architecture arch = bat.arch(1, 1);
    arch.activation = Activation::ReLU;
    arch.sigma_w = 1.4;
    arch.sigma_b = pair % 2 == 0 ? 0.0 : 0.6;
    if (pair % 3 == 0) arch.hidden_widths = {1, 1};  // depth 3
    Eigen::VectorXd x = pair_rng.normal_vector(3);
    Eigen::VectorXd y = pair == 0 ? x : Eigen::VectorXd(pair_rng.normal_vector(3));

    const ReluOracle oracle{arch.sigma_w * arch.sigma_w, arch.sigma_b * arch.sigma_b,
                            arch.depth()};
    const auto [k_ref, th_ref] = oracle.eval(x, y);
    const double k = nngp_kernel(nngp_spec(arch), x, y);
    const double th = ntk_kernel(ntk_spec(arch), x, y);
    worst = std::max({worst, std::abs(k - k_ref), std::abs(th - th_ref)});
  }
  check.require(worst < 1e-10, fmt("relu kernel vs oracle max abs err %.2e", worst));
  check.note(fmt("relu vs arc-cosine oracle %.2e", worst));

  // SiLU quadrature vs 1e7-sample Monte-Carlo, three standard errors.
  const GaussHermite& gh = shared_gauss_hermite(64);
  const long n_mc = 10'000'000L;
  double worst_sigmas = 0.0;
  int config = 0;
  for (const double rho : {-0.95, -0.5, 0.0, 0.5, 0.95}) {
    const double a = 1.7, b = 0.8;
    const double c = rho * std::sqrt(a * b);
    const ActivationMoments m = bivariate_moments(Activation::SiLU, a, c, b, gh);

    Rng mc_rng = rng.child(1000 + config++);
    const double l11 = std::sqrt(a);
    const double l21 = c / l11;
    const double l22 = std::sqrt(std::max(b - l21 * l21, 0.0));
    double sum = 0.0, sum_sq = 0.0;
    for (long i = 0; i < n_mc; ++i) {
      const double u = mc_rng.normal();
      const double v = mc_rng.normal();
      const double val = activate(Activation::SiLU, l11 * u) *
                         activate(Activation::SiLU, l21 * u + l22 * v);
      sum += val;
      sum_sq += val * val;
    }
    const double mc_mean = sum / n_mc;
    const double mc_se =
        std::sqrt((sum_sq / n_mc - mc_mean * mc_mean) / static_cast<double>(n_mc - 1));
    worst_sigmas = std::max(worst_sigmas, std::abs(m.ee - mc_mean) / mc_se);
  }
  check.require(worst_sigmas < 3.0, fmt("silu quadrature vs MC: %.2f standard errors", worst_sigmas));
  check.note(fmt("silu vs 1e7 MC worst %.2f se", worst_sigmas));
  return check;
}

// --- 3: empirical NTK converges to the analytic kernel as width grows.
Check criterion_ntk_convergence(const Battery& bat) {
  Check check;
  Rng rng = bat.rng(3);
  const Eigen::MatrixXd points = rng.child(0).normal_matrix(5, 3);
  const Eigen::MatrixXd analytic = gram(bat.theta(), points, points).entries;

  const std::vector<int> widths{32, 128, 512, 2048};
  const int n_seeds = 16;
  std::vector<double> mean_dev(widths.size(), 0.0);
  Eigen::MatrixXd mean_at_widest = Eigen::MatrixXd::Zero(5, 5);

  for (std::size_t w = 0; w < widths.size(); ++w) {
    Eigen::MatrixXd mean_emp = Eigen::MatrixXd::Zero(5, 5);
    for (int s = 0; s < n_seeds; ++s) {
      const MlpParams params =
          init_params(bat.arch(widths[w], 1), rng.child(100 + 16 * w + s));
      const Eigen::MatrixXd emp = empirical_ntk(params, points, points, 0);
      mean_dev[w] += (emp - analytic).cwiseAbs().maxCoeff() / n_seeds;
      mean_emp += emp / n_seeds;
    }
    if (w + 1 == widths.size()) mean_at_widest = mean_emp;
  }
  bool monotone = true;
  for (std::size_t w = 1; w < widths.size(); ++w) monotone &= mean_dev[w] < mean_dev[w - 1];
  check.require(monotone, fmt("deviation not monotone: %.3f -> %.3f ...", mean_dev[0],
                              mean_dev[1]));
  const double rel =
      ((mean_at_widest - analytic).cwiseAbs().array() / analytic.cwiseAbs().array()).maxCoeff();
  check.require(rel < 0.05, fmt("width-2048 entrywise rel err %.3f", rel));
  check.note(fmt("dev %.3f->%.3f, rel at 2048 %.3f", mean_dev.front(), mean_dev.back(), rel));
  return check;
}

// --- 4: converged-ensemble mean and variance match the analytic law.
Check criterion_ensemble_law(const Battery& bat) {
  Check check;
  const Dataset data = bat.data(20);
  const int members = bat.opt.full_scale ? 512 : 128;
  TrainConfig tc = bat.train_cfg(0.1, 20000, 1e-9);
  tc.seed = bat.rng(4).stream_key();

  const auto ensemble = train_ensemble(bat.arch(1024, 1), data.train_x, data.train_y,
                                       members, tc);
  const Eigen::MatrixXd preds = ensemble_predictions(ensemble, data.test_x);

  const GaussianLaw law = converged_ensemble_law(bat.kappa(), bat.theta(), data, data.test_x);
  const Eigen::VectorXd emp_mean = preds.colwise().mean().transpose();
  Eigen::VectorXd emp_var(preds.cols());
  for (Eigen::Index p = 0; p < preds.cols(); ++p) emp_var[p] = sample_variance(preds.col(p));

  const double mean_err =
      discrepancy(to_vec(emp_mean), to_vec(law.mean.col(0)), DiscrepancyKind::RelErr);
  const double var_err =
      discrepancy(to_vec(emp_var), to_vec(law.variances()), DiscrepancyKind::RelErr);
  check.require(mean_err < 0.05, fmt("ensemble mean rel err %.3f", mean_err));
  check.require(var_err < 0.20, fmt("ensemble variance rel err %.3f", var_err));
  check.note(fmt("%d members: mean %.3f, var %.3f", members, mean_err, var_err));
  return check;
}

// --- 5: standard RND halved errors track ensemble-law variance, and the
// discrepancy collapses by >= 10x from width 16 to width 1024.
Check criterion_rnd_vs_ensemble(const Battery& bat) {
  Check check;
  const int heads = bat.opt.full_scale ? 512 : 128;
  double first_rel = 0.0;
  std::vector<double> ratios;

  for (int s = 0; s < 5; ++s) {
    const Dataset data = bat.data(20, static_cast<std::uint64_t>(s));
    const Eigen::VectorXd law_var =
        converged_ensemble_variances(bat.kappa(), bat.theta(), data, data.test_x);

    std::map<int, double> msd;
    for (const int width : {16, 1024}) {
      // Narrow nets need a smaller step: the empirical kernel's top
      // eigenvalue fluctuates above the 2/lr stability bound at width 16.
      TrainConfig tc = width == 16 ? bat.train_cfg(0.02, 60000, 1e-9)
                                   : bat.train_cfg(0.1, 20000, 1e-9);
      RndModel model = make_rnd_model(bat.arch(width, heads), TargetKind::StandardNet,
                                      bat.rng(5).child(100 * s + width).stream_key());
      model = train_rnd(model, data.train_x, tc);
      const Eigen::MatrixXd errors = rnd_errors(model, data.test_x);
      const Eigen::VectorXd half_msq =
          (0.5 * errors.array().square().rowwise().mean()).matrix();
      msd[width] = discrepancy(to_vec(half_msq), to_vec(law_var), DiscrepancyKind::MSD);
      if (width == 1024) {
        const double rel =
            discrepancy(to_vec(half_msq), to_vec(law_var), DiscrepancyKind::RelErr);
        if (s == 0) first_rel = rel;
      }
    }
    ratios.push_back(msd[16] / msd[1024]);
  }
  std::sort(ratios.begin(), ratios.end());
  const double median_ratio = ratios[ratios.size() / 2];
  check.require(first_rel < 0.20, fmt("width-1024 rel err %.3f", first_rel));
  check.require(median_ratio >= 10.0, fmt("median MSD ratio %.1f < 10", median_ratio));
  check.note(fmt("rel err %.3f, median msd ratio %.0fx", first_rel, median_ratio));
  return check;
}

// --- 6: halved mean-square RND error over K heads and the sample variance
// of a (K+1)-member ensemble both follow the scaled chi-squared law.
Check criterion_chi_squared(const Battery& bat) {
  Check check;
  const Dataset data = bat.data(5);
  const Eigen::VectorXd law_var =
      converged_ensemble_variances(bat.kappa(), bat.theta(), data, data.test_x);

  const int n_seeds = 5;
  const int rnd_heads = 512;
  const int members = bat.opt.full_scale ? 512 : 297;
  TrainConfig tc = bat.train_cfg(0.1, 12000, 1e-9);

  // Flat job pool: the five 512-head models first (heaviest), then every
  // ensemble member; all results land in preallocated slots.
  std::vector<Eigen::MatrixXd> rnd_err(n_seeds);           // 5 x 512 each
  std::vector<Eigen::MatrixXd> member_pred(n_seeds);       // members x 5
  for (auto& m : member_pred) m.resize(members, 5);
  const Rng base = bat.rng(6);

  const long total_jobs = n_seeds + static_cast<long>(n_seeds) * members;
  parallel_for(total_jobs, [&](long job) {
    if (job < n_seeds) {
      const int s = static_cast<int>(job);
      RndModel model = make_rnd_model(bat.arch(1024, rnd_heads), TargetKind::StandardNet,
                                      base.child(1000 + s).stream_key());
      TrainConfig cfg = tc;
      model = train_rnd(model, data.train_x, cfg);
      rnd_err[s] = rnd_errors(model, data.test_x);
    } else {
      const long idx = job - n_seeds;
      const int s = static_cast<int>(idx / members);
      const int m = static_cast<int>(idx % members);
      TrainConfig cfg = tc;
      const MlpParams init =
          init_params(bat.arch(1024, 1), base.child(2000 + s).child(m));
      const MlpParams trained =
          train_regressor(init, data.train_x, data.train_y, cfg).params;
      member_pred[s].row(m) = forward_outputs(trained, data.test_x).col(0).transpose();
    }
  });

  int cells = 0, passed = 0;
  for (const int k : {8, 32}) {
    for (int s = 0; s < n_seeds; ++s) {
      for (int p = 0; p < 5; ++p) {
        const auto cdf = chi2_scaled_cdf(k, law_var[p] / k);

        std::vector<double> rnd_draws;
        for (int g = 0; g + k <= rnd_heads; g += k) {
          double acc = 0.0;
          for (int i = 0; i < k; ++i) acc += rnd_err[s](p, g + i) * rnd_err[s](p, g + i);
          rnd_draws.push_back(0.5 * acc / k);
        }
        std::vector<double> ens_draws;
        for (int g = 0; g + k + 1 <= members; g += k + 1) {
          const Eigen::VectorXd group = member_pred[s].col(p).segment(g, k + 1);
          ens_draws.push_back(sample_variance(group));
        }
        const double p_rnd = ks_test(rnd_draws, cdf).p_value;
        const double p_ens = ks_test(ens_draws, cdf).p_value;
        ++cells;
        if (p_rnd > 0.01 && p_ens > 0.01) ++passed;
      }
    }
  }
  check.require(passed >= 45, fmt("%.0f of %.0f cells passed", passed, cells));
  check.note(fmt("%.0f/%.0f cells passed both KS tests", passed, cells));
  return check;
}

// --- 7: Bayesian target variance, Bayesian RND error law, error covariance.
Check criterion_bayesian_law(const Battery& bat) {
  Check check;
  const Dataset data = bat.data(10);
  const Rng base = bat.rng(7);

  // (a) target variance against the below-last-layer NTK block.
  {
    const MlpParams predictor_init = init_params(bat.arch(1024, 1), base.child(0));
    const int draws = 10000;
    Eigen::MatrixXd values(3, draws);
    for (int r = 0; r < draws; ++r) {
      const MlpParams psi = init_params(bat.arch(1024, 1), base.child(10 + r));
      const Eigen::VectorXd tangent = zero_last_layer(psi).flatten();
      for (int pt = 0; pt < 3; ++pt)
        values(pt, r) = jvp(predictor_init, data.test_x.row(pt).transpose(), tangent)[0];
    }
    double worst = 0.0;
    for (int pt = 0; pt < 3; ++pt) {
      const Eigen::VectorXd x = data.test_x.row(pt).transpose();
      const auto [last, below] = ntk_split(bat.theta(), x, x);
      worst = std::max(worst,
                       std::abs(sample_variance(values.row(pt).transpose()) - below) / below);
    }
    check.require(worst < 0.05, fmt("target variance rel err %.3f", worst));
    check.note(fmt("target var %.3f", worst));
  }

  // (b) trained head errors are N(0, Sigma_b) pointwise.
  const GaussianLaw posterior = ntk_posterior(bat.theta(), data, data.test_x);
  int cells = 0, passed = 0;
  Eigen::MatrixXd seed0_errors;
  for (int s = 0; s < 2; ++s) {
    RndModel model = make_rnd_model(bat.arch(1024, 512), TargetKind::BayesianJvp,
                                    base.child(20000 + s).stream_key());
    model = train_rnd(model, data.train_x, bat.train_cfg(0.1, 12000, 1e-9));
    const Eigen::MatrixXd errors = rnd_errors(model, data.test_x);
    if (s == 0) seed0_errors = errors;
    for (int p = 0; p < 10; ++p) {
      const double variance = posterior.cov(p, p);
      std::vector<double> sample(errors.cols());
      for (Eigen::Index i = 0; i < errors.cols(); ++i) sample[i] = errors(p, i);
      const auto report =
          ks_test(sample, [variance](double x) { return normal_cdf(x, variance); });
      ++cells;
      if (report.p_value > 0.01) ++passed;
    }
  }
  check.require(passed >= static_cast<int>(0.9 * cells),
                fmt("%.0f of %.0f KS cells passed", passed, cells));
  check.note(fmt("%.0f/%.0f error-law cells", passed, cells));

  // (c) head-error covariance across 5 points against the posterior block.
  {
    const Eigen::MatrixXd block = seed0_errors.topRows(5);  // 5 x K
    const Eigen::VectorXd row_mean = block.rowwise().mean();
    const Eigen::MatrixXd centered = block.colwise() - row_mean;
    const Eigen::MatrixXd emp_cov =
        centered * centered.transpose() / static_cast<double>(block.cols() - 1);
    const Eigen::MatrixXd law_cov = posterior.cov.topLeftCorner(5, 5);
    const double rel = (emp_cov - law_cov).norm() / law_cov.norm();
    check.require(rel < 0.20, fmt("error covariance Frobenius rel err %.3f", rel));
    check.note(fmt("cov %.3f", rel));
  }
  return check;
}

// --- 8: posterior sampling through a Bayesian RND model.
Check criterion_posterior_sampling(const Battery& bat) {
  Check check;
  const Dataset data = bat.data(10);
  const Rng base = bat.rng(8);

  RndModel model = make_rnd_model(bat.arch(1024, 512), TargetKind::BayesianJvp,
                                  base.child(0).stream_key());
  model = train_rnd(model, data.train_x, bat.train_cfg(0.1, 12000, 1e-9));

  const GaussianLaw posterior = ntk_posterior(bat.theta(), data, data.test_x);
  PosteriorSampler sampler(model, make_ntk_mean_estimator(bat.theta(), data));

  double worst_mean_sigmas = 0.0, worst_var_rel = 0.0;
  for (int p = 0; p < 10; ++p) {
    const Eigen::VectorXd x = data.test_x.row(p).transpose();
    sampler.next_batch();
    Eigen::VectorXd samples(512);
    for (int head = 0; head < 512; ++head) samples[head] = sampler.draw(x, head);

    const double mu = posterior.mean(p, 0);
    const double var = posterior.cov(p, p);
    worst_mean_sigmas = std::max(
        worst_mean_sigmas, std::abs(samples.mean() - mu) / std::sqrt(var / 512.0));
    worst_var_rel =
        std::max(worst_var_rel, std::abs(sample_variance(samples) - var) / var);
  }
  check.require(worst_mean_sigmas < 3.0,
                fmt("sample mean off by %.2f posterior sd", worst_mean_sigmas));
  check.require(worst_var_rel < 0.20, fmt("sample variance rel err %.3f", worst_var_rel));
  check.note(fmt("mean %.2f sd, var %.3f", worst_mean_sigmas, worst_var_rel));
  return check;
}

// --- 9: gradient descent matches the finite-time linearized mean.
Check criterion_finite_time(const Battery& bat) {
  Check check;
  const Dataset data = bat.data(1);
  const Rng base = bat.rng(9);
  const double lr = 0.01;
  const std::vector<long> checkpoints{100, 1000, 10000};
  const int nets = 64;

  // Mean train-set prediction over independent runs at each checkpoint.
  std::vector<Eigen::MatrixXd> preds(checkpoints.size());
  for (auto& p : preds) p = Eigen::MatrixXd::Zero(nets, data.train_x.rows());

  parallel_for(nets, [&](long net) {
    MlpParams params = init_params(bat.arch(2048, 1), base.child(100 + net));
    long at = 0;
    for (std::size_t c = 0; c < checkpoints.size(); ++c) {
      TrainConfig tc = bat.train_cfg(lr, checkpoints[c] - at, 0.0);
      params = train_regressor(params, data.train_x, data.train_y, tc).params;
      at = checkpoints[c];
      preds[c].row(net) = forward_outputs(params, data.train_x).col(0).transpose();
    }
  });

  double worst = 0.0;
  for (std::size_t c = 0; c < checkpoints.size(); ++c) {
    const Eigen::VectorXd expected =
        finite_time_mean(bat.theta(), data, data.train_x, lr * checkpoints[c]).col(0);
    const Eigen::VectorXd observed = preds[c].colwise().mean().transpose();
    worst = std::max(worst,
                     discrepancy(to_vec(observed), to_vec(expected), DiscrepancyKind::RelErr));
  }
  check.require(worst < 0.05, fmt("finite-time mean rel err %.3f", worst));
  check.note(fmt("worst checkpoint rel err %.3f over 64 nets", worst));
  return check;
}

// --- 10: exact algebraic identities.
Check criterion_identities(const Battery& bat) {
  Check check;
  Rng rng = bat.rng(10);

  double worst_split = 0.0;
  const KernelSpec theta = bat.theta();
  for (int pair = 0; pair < 20; ++pair) {
    const Eigen::VectorXd x = rng.child(pair).normal_vector(3);
    const Eigen::VectorXd y = rng.child(1000 + pair).normal_vector(3);
    const auto [last, below] = ntk_split(theta, x, y);
    const double full = ntk_kernel(theta, x, y);
    worst_split = std::max(worst_split, std::abs(last + below - full));
  }
  check.require(worst_split < 1e-12, fmt("split reconstruction err %.2e", worst_split));

  const Dataset data = bat.data(5);
  const GaussianLaw collapsed = error_law_with_prior(theta, theta, data, data.test_x);
  const GaussianLaw posterior = ntk_posterior(theta, data, data.test_x);
  const double collapse_err = (collapsed.cov - posterior.cov).cwiseAbs().maxCoeff();
  check.require(collapse_err < 1e-10, fmt("error-prior collapse err %.2e", collapse_err));

  // Interpolation: zero posterior variance at training points for all laws.
  Dataset interp = data;
  interp.test_x = data.train_x;
  double worst_var = 0.0;
  const KernelSpec kappa = bat.kappa();
  worst_var = std::max(worst_var,
                       condition_gp(kappa, interp, interp.test_x).variances().maxCoeff());
  worst_var = std::max(
      worst_var,
      converged_ensemble_law(kappa, theta, interp, interp.test_x).variances().maxCoeff());
  worst_var = std::max(
      worst_var,
      rnd_error_law(kappa, kappa, theta, interp, interp.test_x).variances().maxCoeff());
  worst_var =
      std::max(worst_var, ntk_posterior(theta, interp, interp.test_x).variances().maxCoeff());
  check.require(worst_var <= 1e-8, fmt("interpolation variance %.2e", worst_var));
  check.note(fmt("split %.1e, collapse %.1e, interp var %.1e", worst_split, collapse_err,
                 worst_var));
  return check;
}

}  // namespace

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options) {
  Battery bat;
  bat.opt = options;
  bat.cfg = ExperimentConfig{};  // SiLU two-layer nets, d=3, sigma_w = sigma_b = 1

  struct Entry {
    int id;
    const char* name;
    std::function<Check(const Battery&)> fn;
  };
  const std::vector<Entry> entries = {
      {1, "gradients-and-jvp-vs-finite-differences", criterion_gradients},
      {2, "kernel-recursion-vs-oracles", criterion_kernels},
      {3, "empirical-ntk-width-convergence", criterion_ntk_convergence},
      {4, "converged-ensemble-law", criterion_ensemble_law},
      {5, "rnd-matches-ensemble-variance", criterion_rnd_vs_ensemble},
      {6, "chi-squared-equivalence", criterion_chi_squared},
      {7, "bayesian-rnd-error-law", criterion_bayesian_law},
      {8, "posterior-sampling", criterion_posterior_sampling},
      {9, "finite-time-training-law", criterion_finite_time},
      {10, "algebraic-identities", criterion_identities},
  };

  std::vector<CriterionResult> results;
  for (const auto& entry : entries) {
    if (!options.only.empty() &&
        std::find(options.only.begin(), options.only.end(), entry.id) == options.only.end())
      continue;
    const auto start = std::chrono::steady_clock::now();
    CriterionResult result;
    result.id = entry.id;
    result.name = entry.name;
    try {
      const Check check = entry.fn(bat);
      result.passed = check.ok;
      result.detail = check.detail.str();
    } catch (const std::exception& e) {
      result.passed = false;
      result.detail = std::string("exception: ") + e.what();
    }
    result.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    results.push_back(std::move(result));
  }
  return results;
}

bool all_passed(const std::vector<CriterionResult>& results) {
  return std::all_of(results.begin(), results.end(),
                     [](const CriterionResult& r) { return r.passed; });
}

void print_report(std::ostream& out, const std::vector<CriterionResult>& results) {
  for (const auto& r : results) {
    char line[512];
    std::snprintf(line, sizeof(line), "[%2d] %s %s (%s) [%.1fs]\n", r.id,
                  r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str(), r.seconds);
    out << line;
  }
}

}  // namespace ntklab
