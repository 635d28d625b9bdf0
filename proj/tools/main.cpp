// Command-line front end: dataset synthesis, kernel export, model training,
// posterior sampling, width sweeps, plots, and the verification battery.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ntklab/acceptance.hpp"
#include "ntklab/experiment.hpp"
#include "ntklab/gp.hpp"
#include "ntklab/kernels.hpp"
#include "ntklab/stats.hpp"
#include "ntklab/trainers.hpp"

namespace {

using namespace ntklab;

struct CliOptions {
  ExperimentConfig cfg;
  std::uint64_t seed = 0;
  int width = 1024;
  std::string data_dir;
  std::string kind = "ntk";
  std::string csv;
  std::string svg;
  bool full = false;
  bool save_params = false;
  int sample_points = 10;
  std::vector<int> only;
};

Dataset load_or_generate(const CliOptions& opt) {
  const std::string dir = opt.data_dir.empty() ? opt.cfg.output_dir : opt.data_dir;
  if (std::filesystem::exists(dir + "/train.csv")) return load_dataset(dir);
  std::fprintf(stderr, "no dataset in %s; generating one (seed %llu)\n", dir.c_str(),
               static_cast<unsigned long long>(opt.seed));
  const Dataset data = gen_dataset(opt.cfg, opt.seed);
  write_dataset(dir, data);
  return data;
}

KernelKind parse_kind(const std::string& s) {
  if (s == "nngp") return KernelKind::NNGP;
  if (s == "ntk") return KernelKind::NTK;
  if (s == "ntk-last-layer") return KernelKind::NtkLastLayer;
  if (s == "ntk-below-last") return KernelKind::NtkBelowLast;
  throw CLI::ValidationError("--kind", "unknown kernel kind: " + s);
}

void write_summary_csv(const std::string& path, const std::vector<std::string>& header,
                       const std::vector<std::vector<double>>& columns) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  for (std::size_t c = 0; c < header.size(); ++c)
    out << header[c] << (c + 1 < header.size() ? "," : "");
  out << '\n';
  char buf[32];
  const std::size_t rows = columns.empty() ? 0 : columns.front().size();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", columns[c][r]);
      out << buf << (c + 1 < columns.size() ? "," : "");
    }
    out << '\n';
  }
}

int cmd_gen_data(const CliOptions& opt) {
  const Dataset data = gen_dataset(opt.cfg, opt.seed);
  write_dataset(opt.cfg.output_dir, data);
  std::printf("wrote %s/train.csv (%lld points) and test.csv (%lld points)\n",
              opt.cfg.output_dir.c_str(), static_cast<long long>(data.train_x.rows()),
              static_cast<long long>(data.test_x.rows()));
  return 0;
}

int cmd_kernels(const CliOptions& opt) {
  const Dataset data = load_or_generate(opt);
  KernelSpec spec = opt.cfg.theta_spec();
  spec.kind = parse_kind(opt.kind);
  std::filesystem::create_directories(opt.cfg.output_dir);

  const KernelMatrix k_xx = gram(spec, data.train_x, data.train_x);
  k_xx.validate();
  write_kernel_csv(opt.cfg.output_dir + "/kernel_" + opt.kind + "_xx.csv", k_xx);
  if (data.test_x.rows() > 0) {
    const KernelMatrix k_tx = gram(spec, data.test_x, data.train_x);
    write_kernel_csv(opt.cfg.output_dir + "/kernel_" + opt.kind + "_tx.csv", k_tx);
  }
  std::printf("wrote kernel_%s_xx.csv and kernel_%s_tx.csv under %s\n", opt.kind.c_str(),
              opt.kind.c_str(), opt.cfg.output_dir.c_str());
  return 0;
}

int cmd_train_ensemble(const CliOptions& opt) {
  const Dataset data = load_or_generate(opt);
  TrainConfig tc;
  tc.learning_rate = opt.cfg.lr;
  tc.max_steps = opt.cfg.max_steps;
  tc.tol = opt.cfg.tol;
  tc.seed = Rng(opt.seed).child(1).stream_key();
  tc.check_stability = true;

  const auto members = train_ensemble(opt.cfg.make_arch(opt.width, 1), data.train_x,
                                      data.train_y, opt.cfg.ensemble_size, tc);
  const Eigen::MatrixXd preds = ensemble_predictions(members, data.test_x);

  const Eigen::VectorXd analytic = converged_ensemble_variances(
      opt.cfg.kappa_spec(), opt.cfg.theta_spec(), data, data.test_x);
  std::vector<double> ids, means, vars, laws;
  for (Eigen::Index p = 0; p < preds.cols(); ++p) {
    ids.push_back(static_cast<double>(p));
    const Eigen::VectorXd col = preds.col(p);
    const double mean = col.mean();
    means.push_back(mean);
    vars.push_back((col.array() - mean).square().sum() / (col.size() - 1));
    laws.push_back(analytic[p]);
  }
  std::filesystem::create_directories(opt.cfg.output_dir);
  write_summary_csv(opt.cfg.output_dir + "/ensemble_summary.csv",
                    {"test_point_id", "mean", "variance", "analytic_var"},
                    {ids, means, vars, laws});
  if (opt.save_params)
    save_params(opt.cfg.output_dir + "/ensemble_member0.params", members.front());
  std::printf("trained %d members at width %d; wrote ensemble_summary.csv\n",
              opt.cfg.ensemble_size, opt.width);
  return 0;
}

int cmd_train_rnd(const CliOptions& opt, TargetKind kind) {
  const Dataset data = load_or_generate(opt);
  TrainConfig tc;
  tc.learning_rate = opt.cfg.lr;
  tc.max_steps = opt.cfg.max_steps;
  tc.tol = opt.cfg.tol;
  tc.check_stability = true;

  RndModel model = make_rnd_model(opt.cfg.make_arch(opt.width, opt.cfg.num_heads), kind,
                                  Rng(opt.seed).child(2).stream_key());
  TrainResult fit;
  model = train_rnd(model, data.train_x, tc, &fit);

  const Eigen::MatrixXd errors = rnd_errors(model, data.test_x);
  const bool bayes = kind == TargetKind::BayesianJvp;
  const Eigen::VectorXd msq = bayes
      ? Eigen::VectorXd(errors.array().square().rowwise().mean().matrix())
      : Eigen::VectorXd((0.5 * errors.array().square().rowwise().mean()).matrix());
  const Eigen::VectorXd analytic =
      bayes ? ntk_posterior_variances(opt.cfg.theta_spec(), data, data.test_x)
            : converged_ensemble_variances(opt.cfg.kappa_spec(), opt.cfg.theta_spec(), data,
                                           data.test_x);

  std::vector<double> ids, stat, law;
  for (Eigen::Index p = 0; p < msq.size(); ++p) {
    ids.push_back(static_cast<double>(p));
    stat.push_back(msq[p]);
    law.push_back(analytic[p]);
  }
  const std::string tag = bayes ? "bayes_rnd" : "rnd";
  std::filesystem::create_directories(opt.cfg.output_dir);
  write_summary_csv(opt.cfg.output_dir + "/" + tag + "_summary.csv",
                    {"test_point_id", bayes ? "mean_sq_error" : "half_mean_sq_error",
                     "analytic_var"},
                    {ids, stat, law});
  std::vector<double> steps_col, mse_col;
  for (std::size_t i = 0; i < fit.loss_trace.size(); ++i) {
    steps_col.push_back(static_cast<double>(i));
    mse_col.push_back(fit.loss_trace[i]);
  }
  write_summary_csv(opt.cfg.output_dir + "/" + tag + "_loss_trace.csv", {"step", "train_mse"},
                    {steps_col, mse_col});
  if (opt.save_params)
    save_params(opt.cfg.output_dir + "/" + tag + "_predictor.params", model.predictor);
  std::printf("%s: trained %d heads at width %d in %ld steps (final train MSE %.3e); "
              "wrote %s_summary.csv\n",
              tag.c_str(), opt.cfg.num_heads, opt.width, fit.steps, fit.final_mse, tag.c_str());
  return 0;
}

int cmd_sample_posterior(const CliOptions& opt) {
  const Dataset data = load_or_generate(opt);
  TrainConfig tc;
  tc.learning_rate = opt.cfg.lr;
  tc.max_steps = opt.cfg.max_steps;
  tc.tol = opt.cfg.tol;

  RndModel model = make_rnd_model(opt.cfg.make_arch(opt.width, opt.cfg.num_heads),
                                  TargetKind::BayesianJvp, Rng(opt.seed).child(3).stream_key());
  model = train_rnd(model, data.train_x, tc);

  const int n_points = std::min<int>(opt.sample_points, static_cast<int>(data.test_x.rows()));
  const Eigen::MatrixXd points = data.test_x.topRows(n_points);
  const GaussianLaw law = ntk_posterior(opt.cfg.theta_spec(), data, points);
  PosteriorSampler sampler(model, make_ntk_mean_estimator(opt.cfg.theta_spec(), data));

  std::filesystem::create_directories(opt.cfg.output_dir);
  std::ofstream out(opt.cfg.output_dir + "/posterior_samples.csv");
  out << "point_id,head,sample,law_mean,law_var\n";
  char buf[128];
  for (int p = 0; p < n_points; ++p) {
    sampler.next_batch();
    for (int head = 0; head < opt.cfg.num_heads; ++head) {
      const double s = sampler.draw(points.row(p).transpose(), head);
      std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g,%.17g\n", p, head, s, law.mean(p, 0),
                    law.cov(p, p));
      out << buf;
    }
  }
  std::printf("wrote posterior_samples.csv (%d points x %d heads)\n", n_points,
              opt.cfg.num_heads);
  return 0;
}

int cmd_sweep(const CliOptions& opt) {
  const std::string path = run_sweep_to_dir(opt.cfg);
  std::printf("wrote %s\n", path.c_str());
  return 0;
}

int cmd_plot(const CliOptions& opt) {
  const PlotKind kind = opt.kind == "scatter" ? PlotKind::Scatter : PlotKind::DiscrepancyVsWidth;
  if (opt.kind != "scatter" && opt.kind != "discrepancy")
    throw CLI::ValidationError("--kind", "plot kind must be 'discrepancy' or 'scatter'");
  plot(opt.csv, kind, opt.svg);
  std::printf("wrote %s\n", opt.svg.c_str());
  return 0;
}

int cmd_verify(const CliOptions& opt) {
  AcceptanceOptions options;
  options.master_seed = opt.seed == 0 ? AcceptanceOptions{}.master_seed : opt.seed;
  options.full_scale = opt.full;
  options.only = opt.only;
  const auto results = run_acceptance(options);
  print_report(std::cout, results);
  if (all_passed(results)) {
    std::printf("all %zu criteria passed\n", results.size());
    return 0;
  }
  std::printf("FAILURES present\n");
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-width networks, infinite-width Gaussian laws, and RND cross-validation"};
  app.set_config("--config", "", "flat key=value file mirroring these flags");

  CliOptions opt;
  app.add_option("--seed", opt.seed, "master seed");
  app.add_option("--out", opt.cfg.output_dir, "output directory")->capture_default_str();
  app.add_option("--width", opt.width, "hidden-layer width")->capture_default_str();
  app.add_option("--widths", opt.cfg.widths, "sweep widths")->delimiter(',');
  app.add_option("--seeds", opt.cfg.seeds, "sweep seeds")->delimiter(',');
  app.add_option("--n-train", opt.cfg.n_train, "training points")->capture_default_str();
  auto* n_test_opt =
      app.add_option("--n-test", opt.cfg.n_test, "test points")->capture_default_str();
  app.add_option("--input-dim", opt.cfg.input_dim, "input dimension")->capture_default_str();
  app.add_option("--members", opt.cfg.ensemble_size, "ensemble members")->capture_default_str();
  app.add_option("--heads", opt.cfg.num_heads, "output heads")->capture_default_str();
  app.add_option("--lr", opt.cfg.lr, "learning rate")->capture_default_str();
  app.add_option("--steps", opt.cfg.max_steps, "max gradient steps")->capture_default_str();
  app.add_option("--tol", opt.cfg.tol, "train-MSE stopping tolerance")->capture_default_str();
  app.add_option("--sigma-w", opt.cfg.sigma_w, "weight scaling")->capture_default_str();
  app.add_option("--sigma-b", opt.cfg.sigma_b, "bias scaling")->capture_default_str();
  app.add_option("--gh-order", opt.cfg.quadrature_order, "quadrature nodes per axis")
      ->capture_default_str();
  std::string activation = "silu";
  app.add_option("--activation", activation, "silu|relu|erf")->capture_default_str();
  app.add_option("--data", opt.data_dir, "dataset directory (defaults to --out)");
  app.add_flag("--full", opt.full, "reference-scale configuration");

  auto* gen = app.add_subcommand("gen-data", "synthesize train/test data");
  auto* kernels_cmd = app.add_subcommand("kernels", "export kernel matrices as CSV");
  kernels_cmd->add_option("--kind", opt.kind, "nngp|ntk|ntk-last-layer|ntk-below-last")
      ->capture_default_str();
  auto* ens = app.add_subcommand("train-ensemble", "train an ensemble and summarize it");
  ens->add_flag("--save-params", opt.save_params, "checkpoint member 0");
  auto* rnd = app.add_subcommand("train-rnd", "train a standard RND model");
  rnd->add_flag("--save-params", opt.save_params, "checkpoint the predictor");
  auto* brnd = app.add_subcommand("train-bayes-rnd", "train a Bayesian RND model");
  brnd->add_flag("--save-params", opt.save_params, "checkpoint the predictor");
  auto* samp = app.add_subcommand("sample-posterior", "draw posterior samples via Bayesian RND");
  samp->add_option("--sample-points", opt.sample_points, "test points to sample at")
      ->capture_default_str();
  auto* sweep_cmd = app.add_subcommand("sweep", "width sweep across model families");
  auto* plot_cmd = app.add_subcommand("plot", "render a sweep CSV to SVG");
  plot_cmd->add_option("--csv", opt.csv, "sweep CSV path")->required();
  plot_cmd->add_option("--kind", opt.kind, "discrepancy|scatter")->capture_default_str();
  plot_cmd->add_option("--svg", opt.svg, "output SVG path")->required();
  auto* verify_cmd = app.add_subcommand("verify", "run the verification battery");
  verify_cmd->add_option("--only", opt.only, "criterion ids to run")->delimiter(',');

  app.require_subcommand(1);

  try {
    app.parse(argc, argv);
    opt.cfg.activation = activation_from_string(activation);
    // Desk-scale default for sweeps; the reference test-set size stays
    // available behind --full or an explicit --n-test.
    if (sweep_cmd->parsed() && !opt.full && n_test_opt->count() == 0) opt.cfg.n_test = 200;

    if (gen->parsed()) return cmd_gen_data(opt);
    if (kernels_cmd->parsed()) return cmd_kernels(opt);
    if (ens->parsed()) return cmd_train_ensemble(opt);
    if (rnd->parsed()) return cmd_train_rnd(opt, TargetKind::StandardNet);
    if (brnd->parsed()) return cmd_train_rnd(opt, TargetKind::BayesianJvp);
    if (samp->parsed()) return cmd_sample_posterior(opt);
    if (sweep_cmd->parsed()) return cmd_sweep(opt);
    if (plot_cmd->parsed()) return cmd_plot(opt);
    if (verify_cmd->parsed()) return cmd_verify(opt);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
