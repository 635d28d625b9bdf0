#include "ntklab/trainers.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "ntklab/parallel.hpp"

namespace ntklab {

namespace {

double train_mse(const Eigen::MatrixXd& residual) {
  return residual.squaredNorm() / static_cast<double>(residual.size());
}

void warn_if_unstable(const MlpParams& params, const Eigen::MatrixXd& train_x, double lr) {
  const Eigen::MatrixXd ntk = empirical_ntk(params, train_x, train_x, 0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(ntk, Eigen::EigenvaluesOnly);
  const double lambda_max = eig.eigenvalues().maxCoeff();
  if (lr * lambda_max >= 2.0)
    std::cerr << "warning: learning_rate * lambda_max(NTK) = " << lr * lambda_max
              << " >= 2; gradient descent may be unstable\n";
}

}  // namespace

TrainResult train_regressor(MlpParams params, const Eigen::MatrixXd& train_x,
                            const Eigen::MatrixXd& train_y, const TrainConfig& cfg) {
  if (train_y.cols() != params.arch.num_heads)
    throw std::invalid_argument("label columns must match the number of heads");
  if (train_y.rows() != train_x.rows())
    throw std::invalid_argument("labels and inputs disagree on row count");
  if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");

  if (cfg.check_stability) warn_if_unstable(params, train_x, cfg.learning_rate);

  TrainResult result;
  result.loss_trace.reserve(static_cast<std::size_t>(std::min(cfg.max_steps, 1000000L)));
  std::vector<Eigen::VectorXd> head_trace;

  Eigen::MatrixXd residual = forward_outputs(params, train_x) - train_y;
  double mse = train_mse(residual);
  const double divergence_cap = 1e6 * std::max(mse, 1e-300);
  const double head_norm = 1.0 / static_cast<double>(train_x.rows());

  if (mse <= cfg.tol) {
    result.params = std::move(params);
    result.stop = StopReason::AlreadyConverged;
    result.final_mse = mse;
    result.loss_trace.push_back(mse);
    return result;
  }

  for (long step = 0; step < cfg.max_steps; ++step) {
    result.loss_trace.push_back(mse);
    if (cfg.record_head_trace)
      head_trace.push_back(residual.colwise().squaredNorm().transpose() * head_norm);
    const ParamBlocks grad = loss_gradient(params, train_x, residual);
    axpy(params, grad, -cfg.learning_rate);
    residual = forward_outputs(params, train_x) - train_y;
    mse = train_mse(residual);
    ++result.steps;
    if (!std::isfinite(mse) || mse > divergence_cap)
      throw std::runtime_error("training diverged at step " + std::to_string(step + 1) +
                               " (train MSE " + std::to_string(mse) + ")");
    if (mse <= cfg.tol) {
      result.stop = StopReason::Tolerance;
      break;
    }
  }
  if (mse > cfg.tol) result.stop = StopReason::MaxSteps;
  if (cfg.record_head_trace && !head_trace.empty()) {
    result.head_mse_trace.resize(static_cast<Eigen::Index>(head_trace.size()),
                                 train_y.cols());
    for (std::size_t s = 0; s < head_trace.size(); ++s)
      result.head_mse_trace.row(static_cast<Eigen::Index>(s)) = head_trace[s].transpose();
  }
  result.params = std::move(params);
  result.final_mse = mse;
  return result;
}

std::vector<MlpParams> train_ensemble(const Architecture& arch, const Eigen::MatrixXd& train_x,
                                      const Eigen::MatrixXd& train_y, int members,
                                      const TrainConfig& cfg) {
  if (members < 1) throw std::invalid_argument("ensemble needs at least one member");
  const Rng master(cfg.seed);
  std::vector<MlpParams> out(static_cast<std::size_t>(members),
                             MlpParams{});
  TrainConfig member_cfg = cfg;
  member_cfg.check_stability = false;  // one check on member 0 below is enough
  if (cfg.check_stability)
    warn_if_unstable(init_params(arch, master.child(0)), train_x, cfg.learning_rate);

  parallel_for(members, [&](long m) {
    const MlpParams init = init_params(arch, master.child(static_cast<std::uint64_t>(m)));
    out[static_cast<std::size_t>(m)] =
        train_regressor(init, train_x, train_y, member_cfg).params;
  });
  return out;
}

Eigen::MatrixXd ensemble_predictions(const std::vector<MlpParams>& members,
                                     const Eigen::MatrixXd& inputs) {
  if (members.empty()) throw std::invalid_argument("empty ensemble");
  Eigen::MatrixXd preds(static_cast<Eigen::Index>(members.size()), inputs.rows());
  for (std::size_t m = 0; m < members.size(); ++m) {
    if (members[m].arch.num_heads != 1)
      throw std::invalid_argument("ensemble_predictions expects single-head members");
    preds.row(static_cast<Eigen::Index>(m)) =
        forward_outputs(members[m], inputs).col(0).transpose();
  }
  return preds;
}

std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)> make_standard_target(
    const Architecture& arch, std::uint64_t seed) {
  const MlpParams psi = init_params(arch, seed);
  return [psi](const Eigen::MatrixXd& inputs) { return forward_outputs(psi, inputs); };
}

std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)> make_bayesian_target(
    const MlpParams& predictor_init, std::uint64_t psi_seed) {
  const MlpParams psi = init_params(predictor_init.arch, psi_seed);
  const Eigen::VectorXd tangent = zero_last_layer(psi).flatten();
  const MlpParams frozen = predictor_init;
  return [frozen, tangent](const Eigen::MatrixXd& inputs) {
    Eigen::MatrixXd out(inputs.rows(), frozen.arch.num_heads);
    for (Eigen::Index i = 0; i < inputs.rows(); ++i)
      out.row(i) = jvp(frozen, inputs.row(i).transpose(), tangent).transpose();
    return out;
  };
}

Eigen::MatrixXd RndModel::target_values(const Eigen::MatrixXd& inputs) const {
  if (target_kind == TargetKind::StandardNet) return forward_outputs(target_params, inputs);
  const Eigen::VectorXd tangent = zero_last_layer(target_params).flatten();
  Eigen::MatrixXd out(inputs.rows(), predictor_init.arch.num_heads);
  for (Eigen::Index i = 0; i < inputs.rows(); ++i)
    out.row(i) = jvp(predictor_init, inputs.row(i).transpose(), tangent).transpose();
  return out;
}

RndModel make_rnd_model(const Architecture& arch, TargetKind kind, std::uint64_t master_seed) {
  const Rng master(master_seed);
  RndModel model;
  model.predictor_init = init_params(arch, master.child(0));
  model.predictor = model.predictor_init;
  model.target_params = init_params(arch, master.child(1));
  model.target_kind = kind;
  return model;
}

RndModel train_rnd(RndModel model, const Eigen::MatrixXd& train_x, const TrainConfig& cfg,
                   TrainResult* diagnostics) {
  // Target values on the train set are constants of the optimization.
  const Eigen::MatrixXd targets = model.target_values(train_x);
  TrainResult result = train_regressor(model.predictor, train_x, targets, cfg);
  model.predictor = result.params;
  model.trained = true;
  if (diagnostics) *diagnostics = std::move(result);
  return model;
}

RndErrors rnd_error(const RndModel& model, const Eigen::VectorXd& x) {
  const Eigen::MatrixXd inputs = x.transpose();
  RndErrors errors;
  errors.per_head =
      (forward_outputs(model.predictor, inputs) - model.target_values(inputs)).row(0).transpose();
  errors.mean_square = errors.per_head.squaredNorm() / errors.per_head.size();
  return errors;
}

Eigen::MatrixXd rnd_errors(const RndModel& model, const Eigen::MatrixXd& inputs) {
  return forward_outputs(model.predictor, inputs) - model.target_values(inputs);
}

MeanEstimator make_ntk_mean_estimator(const KernelSpec& theta, const Dataset& data) {
  data.validate();
  if (data.train_y.cols() != 1)
    throw std::invalid_argument("mean estimator expects scalar labels");
  const Eigen::MatrixXd th_xx = gram(theta, data.train_x, data.train_x).entries;
  const Eigen::VectorXd alpha = robust_cholesky(th_xx).llt.solve(data.train_y).col(0);
  const Eigen::MatrixXd train_x = data.train_x;
  const KernelSpec spec = theta;
  return [spec, train_x, alpha](const Eigen::VectorXd& x) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < train_x.rows(); ++i)
      acc += alpha[i] * kernel_value(spec, x, train_x.row(i).transpose());
    return acc;
  };
}

PosteriorSampler::PosteriorSampler(const RndModel& model, MeanEstimator mean_estimator)
    : model_(model), mean_(std::move(mean_estimator)),
      used_(static_cast<std::size_t>(model.predictor.arch.num_heads), false) {
  if (model.target_kind != TargetKind::BayesianJvp)
    throw std::invalid_argument("posterior sampling requires a Bayesian RND model");
  if (!model.trained)
    throw std::invalid_argument("posterior sampling requires a trained model");
}

double PosteriorSampler::draw(const Eigen::VectorXd& x, int head) {
  if (head < 0 || head >= num_heads()) throw std::invalid_argument("head out of range");
  if (used_[static_cast<std::size_t>(head)])
    throw std::runtime_error("head " + std::to_string(head) + " already used in this batch");
  used_[static_cast<std::size_t>(head)] = true;
  if (cached_x_.size() != x.size() || cached_x_ != x) {
    cached_x_ = x;
    cached_errors_ = rnd_error(model_, x).per_head;
    cached_mean_ = mean_(x);
  }
  return cached_mean_ + cached_errors_[head];
}

void PosteriorSampler::next_batch() {
  std::fill(used_.begin(), used_.end(), false);
}

}  // namespace ntklab
