#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ntklab/gp.hpp"
#include "ntklab/mlp.hpp"

namespace ntklab {

/// Sweep configuration. The unset defaults reproduce the reference
/// experiment: two-layer SiLU networks, 10 train / 5000 test points from an
/// isotropic Gaussian in R^3, 512 ensemble members and 512 RND heads,
/// full-batch gradient descent at learning rate 0.1.
struct ExperimentConfig {
  std::vector<int> widths{16, 64, 256, 1024, 4096};
  int n_train = 10;
  int n_test = 5000;
  int input_dim = 3;
  int ensemble_size = 512;
  int num_heads = 512;
  double lr = 0.1;
  long max_steps = 100000;
  double tol = 1e-10;
  std::vector<std::uint64_t> seeds{0};
  Activation activation = Activation::SiLU;
  double sigma_w = 1.0;
  double sigma_b = 1.0;
  int quadrature_order = 64;
  std::string output_dir = "out";

  Architecture make_arch(int width, int heads) const;
  KernelSpec kappa_spec(int heads = 1) const;
  KernelSpec theta_spec(int heads = 1) const;
};

/// y(x) = sum_i x_i - 2 prod_i x_i; the documented generalization of the
/// three-dimensional synthetic target to any input dimension.
double synthetic_label(const Eigen::VectorXd& x);

/// Train/test draws from N(0, I_d) with labels from synthetic_label.
Dataset gen_dataset(const ExperimentConfig& cfg, std::uint64_t seed);

void write_dataset(const std::string& dir, const Dataset& data);
Dataset load_dataset(const std::string& dir);

/// One (width, seed, test point) measurement row. NaN entries mark a
/// diverged training component; the row is still emitted.
struct SweepRecord {
  int width = 0;
  std::uint64_t seed = 0;
  int test_point_id = 0;
  double ensemble_var = 0.0;        // sample variance across ensemble members
  double rnd_msq_half = 0.0;        // (1/2) mean over heads of squared RND error
  double bayes_var = 0.0;           // sample variance across Bayesian RND head errors
  double bayes_rnd_msq_half = 0.0;  // mean over heads of squared Bayesian RND error
  double analytic_var = 0.0;        // converged-ensemble law variance at the point
};

std::vector<SweepRecord> run_sweep(const ExperimentConfig& cfg);

void write_sweep_csv(const std::string& path, const std::vector<SweepRecord>& records);
std::vector<SweepRecord> load_sweep_csv(const std::string& path);

/// Runs the sweep and writes sweep.csv plus a metadata sidecar echoing every
/// effective setting into cfg.output_dir. Returns the CSV path.
std::string run_sweep_to_dir(const ExperimentConfig& cfg);

enum class PlotKind { DiscrepancyVsWidth, Scatter };

/// Renders records to a standalone SVG: log-log discrepancy-vs-width with a
/// median line and interquartile band per family, or a per-width scatter of
/// ensemble variance against halved RND error with the identity line.
/// Output bytes are deterministic for identical input.
void plot(const std::string& csv_path, PlotKind kind, const std::string& out_path);

}  // namespace ntklab
