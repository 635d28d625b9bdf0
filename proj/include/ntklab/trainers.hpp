#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "ntklab/gp.hpp"
#include "ntklab/mlp.hpp"

namespace ntklab {

struct TrainConfig {
  double learning_rate = 0.1;
  long max_steps = 100000;
  double tol = 1e-10;  // stop when train MSE falls below
  std::uint64_t seed = 0;
  /// Warn when learning_rate * lambda_max(empirical NTK on the train set)
  /// exceeds the GD stability bound of 2. Uses the head-0 kernel; in the
  /// wide limit all heads share it.
  bool check_stability = false;
  /// Also record per-head train MSE at each step (head_mse_trace).
  bool record_head_trace = false;
};

enum class StopReason { AlreadyConverged, Tolerance, MaxSteps };

struct TrainResult {
  MlpParams params;
  std::vector<double> loss_trace;    // train MSE at the start of each step
  Eigen::MatrixXd head_mse_trace;    // steps x K, when requested
  StopReason stop = StopReason::MaxSteps;
  long steps = 0;
  double final_mse = 0.0;
};

/// Full-batch gradient descent on 1/2 ||f(X) - Y||^2 until the train MSE
/// reaches cfg.tol or cfg.max_steps. Throws when the loss exceeds 1e6 times
/// its initial value, naming the step.
TrainResult train_regressor(MlpParams params, const Eigen::MatrixXd& train_x,
                            const Eigen::MatrixXd& train_y, const TrainConfig& cfg);

/// M independent init + train runs with seeds split from cfg.seed; the
/// member order is deterministic regardless of the parallel schedule.
std::vector<MlpParams> train_ensemble(const Architecture& arch, const Eigen::MatrixXd& train_x,
                                      const Eigen::MatrixXd& train_y, int members,
                                      const TrainConfig& cfg);

/// Stacked predictions of an ensemble at the given inputs, one row per
/// member (heads must be 1).
Eigen::MatrixXd ensemble_predictions(const std::vector<MlpParams>& members,
                                     const Eigen::MatrixXd& inputs);

enum class TargetKind { StandardNet, BayesianJvp };

/// Fixed random target g(x; psi_0) of the same architecture.
std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)> make_standard_target(
    const Architecture& arch, std::uint64_t seed);

/// Engineered target g~(x) = grad_theta u(x; theta_0)^T psi* with psi* a
/// fresh N(0,I) draw whose last layer is zeroed; evaluates as one JVP per
/// input and is frozen in theta_0.
std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)> make_bayesian_target(
    const MlpParams& predictor_init, std::uint64_t psi_seed);

/// Predictor/target pair sharing one architecture. The target network and
/// the predictor initialization come from independent streams of the master
/// seed.
struct RndModel {
  MlpParams predictor;       // current parameters (theta_t)
  MlpParams predictor_init;  // frozen initialization (theta_0)
  MlpParams target_params;   // psi_0
  TargetKind target_kind = TargetKind::StandardNet;
  bool trained = false;

  /// Target outputs on each input row; pure and independent of training.
  Eigen::MatrixXd target_values(const Eigen::MatrixXd& inputs) const;
};

RndModel make_rnd_model(const Architecture& arch, TargetKind kind, std::uint64_t master_seed);

/// Trains the predictor against the (precomputed) target values on the
/// train inputs; labels never enter.
RndModel train_rnd(RndModel model, const Eigen::MatrixXd& train_x, const TrainConfig& cfg,
                   TrainResult* diagnostics = nullptr);

struct RndErrors {
  Eigen::VectorXd per_head;
  double mean_square = 0.0;
};

RndErrors rnd_error(const RndModel& model, const Eigen::VectorXd& x);

/// Per-head errors u - g for each input row (N x K).
Eigen::MatrixXd rnd_errors(const RndModel& model, const Eigen::MatrixXd& inputs);

using MeanEstimator = std::function<double(const Eigen::VectorXd&)>;

/// Posterior-mean estimator from the analytic NTK regression solution.
MeanEstimator make_ntk_mean_estimator(const KernelSpec& theta, const Dataset& data);

/// Draws mu~(x) + eps_head(x) from a trained Bayesian RND model. Each head
/// yields one independent posterior sample; reusing a head within a batch
/// is an error. next_batch() starts a fresh batch.
class PosteriorSampler {
 public:
  PosteriorSampler(const RndModel& model, MeanEstimator mean_estimator);

  double draw(const Eigen::VectorXd& x, int head);
  void next_batch();
  int num_heads() const { return model_.predictor.arch.num_heads; }

 private:
  const RndModel& model_;
  MeanEstimator mean_;
  std::vector<bool> used_;
  // Per-head errors and mean are recomputed only when x changes.
  Eigen::VectorXd cached_x_;
  Eigen::VectorXd cached_errors_;
  double cached_mean_ = 0.0;
};

}  // namespace ntklab
