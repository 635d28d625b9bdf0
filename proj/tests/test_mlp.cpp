#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include <Eigen/Dense>

#include "ntklab/mlp.hpp"
#include "oracles.hpp"

using namespace ntklab;

namespace {

Architecture small_arch(int d_in, std::vector<int> hidden, int heads,
                        Activation act = Activation::SiLU) {
  Architecture arch;
  arch.input_dim = d_in;
  arch.hidden_widths = std::move(hidden);
  arch.num_heads = heads;
  arch.activation = act;
  return arch;
}

}  // namespace

TEST_CASE("initialization draws are standard normal") {
  const Architecture arch = small_arch(3, {4}, 1);
  const long redraws = 5000;  // 21 parameters each -> 105k values
  double sum = 0.0, sum_sq = 0.0;
  long count = 0;
  for (long r = 0; r < redraws; ++r) {
    const Eigen::VectorXd flat = init_params(arch, static_cast<std::uint64_t>(r)).flatten();
    sum += flat.sum();
    sum_sq += flat.squaredNorm();
    count += flat.size();
  }
  const double mean = sum / count;
  const double stddev = std::sqrt(sum_sq / count - mean * mean);
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(stddev - 1.0) < 0.01);
}

TEST_CASE("initialization is deterministic in the seed") {
  const Architecture arch = small_arch(3, {4}, 1);
  CHECK(init_params(arch, 123).flatten() == init_params(arch, 123).flatten());
}

TEST_CASE("head count shapes the final layer") {
  const Architecture arch = small_arch(3, {4}, 512);
  const MlpParams params = init_params(arch, 0);
  CHECK(params.biases.back().size() == 512);
  CHECK(params.weights.back().rows() == 512);
}

TEST_CASE("forward pass") {
  SUBCASE("zero input and zero params give zero output") {
    const Architecture arch = small_arch(2, {3}, 2);
    MlpParams params = init_params(arch, 0);
    for (auto& w : params.weights) w.setZero();
    for (auto& b : params.biases) b.setZero();
    const Eigen::MatrixXd out = forward_outputs(params, Eigen::MatrixXd::Zero(1, 2));
    CHECK(out.cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("hand-computed two-by-two relu case") {
    // W1 = I, b1 = (1,-1), W2 = (1,1), b2 = 0.5, sigma_w = 2, sigma_b = 0.5,
    // x = (2,-3):
    //   z1 = 0.5*(1,-1) + (2/sqrt(2))*(2,-3) = (0.5+2*sqrt2, -0.5-3*sqrt2)
    //   a  = relu(z1)   = (0.5+2*sqrt2, 0)
    //   z2 = 0.5*0.5 + (2/sqrt(2))*(0.5+2*sqrt2) = 4.25 + 0.5*sqrt2
    Architecture arch = small_arch(2, {2}, 1, Activation::ReLU);
    arch.sigma_w = 2.0;
    arch.sigma_b = 0.5;
    MlpParams params = init_params(arch, 0);
    params.weights[0] = Eigen::MatrixXd::Identity(2, 2);
    params.biases[0] << 1.0, -1.0;
    params.weights[1] << 1.0, 1.0;
    params.biases[1] << 0.5;
    Eigen::MatrixXd x(1, 2);
    x << 2.0, -3.0;
    const double expected = 4.25 + 0.5 * std::sqrt(2.0);
    CHECK(forward_outputs(params, x)(0, 0) == doctest::Approx(expected).epsilon(1e-12));
  }

  SUBCASE("sigma_b = 0 makes outputs bias-independent") {
    Architecture arch = small_arch(3, {5}, 2);
    arch.sigma_b = 0.0;
    MlpParams params = init_params(arch, 4);
    const Eigen::MatrixXd x = Rng(9).normal_matrix(4, 3);
    const Eigen::MatrixXd out1 = forward_outputs(params, x);
    for (auto& b : params.biases) b.setConstant(42.0);
    CHECK((forward_outputs(params, x) - out1).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("dimension mismatch throws") {
    const MlpParams params = init_params(small_arch(3, {4}, 1), 0);
    CHECK_THROWS_AS(forward(params, Eigen::MatrixXd::Zero(2, 5)), std::invalid_argument);
  }
}

TEST_CASE("gradients match central finite differences") {
  double worst = 0.0;
  for (int trial = 0; trial < 25; ++trial) {
    Rng rng = Rng(100).child(trial);
    const Architecture arch =
        small_arch(1 + trial % 3, {2 + static_cast<int>(rng.uniform() * 30)}, 1 + trial % 2,
                   trial % 2 == 0 ? Activation::SiLU : Activation::Erf);
    const MlpParams params = init_params(arch, rng.child(0));
    const Eigen::VectorXd x = rng.child(1).normal_vector(arch.input_dim);
    const int head = trial % arch.num_heads;
    const Eigen::VectorXd grad = grad_params(params, x, head);
    const Eigen::VectorXd fd = oracles::fd_gradient(params, x, head);
    worst = std::max(worst,
                     (grad - fd).cwiseAbs().maxCoeff() / std::max(fd.cwiseAbs().maxCoeff(), 1e-12));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("last-layer gradient structure") {
  const Architecture arch = small_arch(3, {6}, 3);
  const MlpParams params = init_params(arch, 5);
  const Eigen::VectorXd x = Rng(6).normal_vector(3);
  const int head = 1;
  const Eigen::VectorXd grad = grad_params(params, x, head);
  const ForwardTrace trace = forward(params, x.transpose());

  // d f_head / d W^L(head,:) = sigma_w / sqrt(n) * post-activations
  const long long off = params.last_layer_offset();
  const double scale = arch.sigma_w / std::sqrt(6.0);
  const Eigen::VectorXd expected = scale * trace.post.back().row(0).transpose();
  CHECK((grad.segment(off + head * 6, 6) - expected).cwiseAbs().maxCoeff() < 1e-14);

  // rows of other heads are untouched
  CHECK(grad.segment(off + 0 * 6, 6).cwiseAbs().maxCoeff() == 0.0);
  CHECK(grad.segment(off + 2 * 6, 6).cwiseAbs().maxCoeff() == 0.0);
  // bias block: sigma_b at the head entry, zero elsewhere
  CHECK(grad[off + 3 * 6 + head] == arch.sigma_b);
  CHECK(grad[off + 3 * 6 + 0] == 0.0);
  CHECK(grad[off + 3 * 6 + 2] == 0.0);
}

TEST_CASE("jvp") {
  const Architecture arch = small_arch(3, {8, 5}, 2);
  const MlpParams params = init_params(arch, 7);
  const Eigen::VectorXd x = Rng(8).normal_vector(3);
  const long long P = arch.param_count();

  SUBCASE("one-hot tangents recover gradient entries") {
    for (int head = 0; head < 2; ++head) {
      const Eigen::VectorXd grad = grad_params(params, x, head);
      for (long long p : {0LL, P / 3, P / 2, P - 1}) {
        Eigen::VectorXd tangent = Eigen::VectorXd::Zero(P);
        tangent[p] = 1.0;
        CHECK(jvp(params, x, tangent)[head] == doctest::Approx(grad[p]).epsilon(1e-12));
      }
    }
  }

  SUBCASE("linearity") {
    Rng rng(10);
    const Eigen::VectorXd v = rng.normal_vector(P);
    const Eigen::VectorXd w = rng.normal_vector(P);
    const Eigen::VectorXd lhs = jvp(params, x, 2.5 * v - 0.75 * w);
    const Eigen::VectorXd rhs = 2.5 * jvp(params, x, v) - 0.75 * jvp(params, x, w);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("finite differences") {
    Rng rng(11);
    const double h = 1e-5;
    const Eigen::VectorXd flat = params.flatten();
    double worst = 0.0;
    for (int rep = 0; rep < 5; ++rep) {
      const Eigen::VectorXd v = rng.normal_vector(P);
      const Eigen::VectorXd j = jvp(params, x, v);
      const Eigen::MatrixXd xrow = x.transpose();
      const Eigen::VectorXd jp =
          forward_outputs(MlpParams::from_flat(arch, flat + h * v), xrow).row(0);
      const Eigen::VectorXd jm =
          forward_outputs(MlpParams::from_flat(arch, flat - h * v), xrow).row(0);
      const Eigen::VectorXd fd = (jp - jm) / (2.0 * h);
      worst = std::max(worst, (j - fd).cwiseAbs().maxCoeff() /
                                  std::max(fd.cwiseAbs().maxCoeff(), 1e-12));
    }
    CHECK(worst < 1e-6);
  }

  SUBCASE("agrees with the gradient inner product over random tangents") {
    Rng rng(12);
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
      const Eigen::VectorXd v = rng.normal_vector(P);
      const Eigen::VectorXd j = jvp(params, x, v);
      for (int head = 0; head < 2; ++head)
        worst = std::max(worst, std::abs(j[head] - grad_params(params, x, head).dot(v)));
    }
    CHECK(worst < 1e-10);
  }

  SUBCASE("tangent length mismatch throws") {
    CHECK_THROWS_AS(jvp(params, x, Eigen::VectorXd::Zero(P - 1)), std::invalid_argument);
  }
}

TEST_CASE("zero_last_layer") {
  const Architecture arch = small_arch(3, {6}, 4);
  const MlpParams params = init_params(arch, 13);
  const MlpParams zeroed = zero_last_layer(params);

  CHECK(zeroed.weights.back().cwiseAbs().maxCoeff() == 0.0);
  CHECK(zeroed.biases.back().cwiseAbs().maxCoeff() == 0.0);
  // pre-final layers are bit-identical
  CHECK(zeroed.weights[0] == params.weights[0]);
  CHECK(zeroed.biases[0] == params.biases[0]);
  // idempotent
  CHECK(zero_last_layer(zeroed).flatten() == zeroed.flatten());

  // a tangent with only last-layer entries, once zeroed, kills the jvp
  MlpParams only_last = params;
  only_last.weights[0].setZero();
  only_last.biases[0].setZero();
  const Eigen::VectorXd tangent = zero_last_layer(only_last).flatten();
  CHECK(tangent.cwiseAbs().maxCoeff() == 0.0);
  const Eigen::VectorXd j = jvp(params, Rng(14).normal_vector(3), tangent);
  CHECK(j.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("empirical ntk") {
  const Architecture arch = small_arch(3, {16}, 2);
  const MlpParams params = init_params(arch, 15);
  Rng rng(16);
  const Eigen::MatrixXd pts = rng.normal_matrix(4, 3);

  SUBCASE("single point equals the gradient norm") {
    const Eigen::MatrixXd one = pts.topRows(1);
    const Eigen::MatrixXd k = empirical_ntk(params, one, one, 1);
    const Eigen::VectorXd grad = grad_params(params, one.row(0).transpose(), 1);
    CHECK(k(0, 0) == doctest::Approx(grad.squaredNorm()).epsilon(1e-12));
  }

  SUBCASE("symmetric and consistent with dense gradients") {
    const Eigen::MatrixXd k = empirical_ntk(params, pts, pts, 0);
    CHECK((k - k.transpose()).cwiseAbs().maxCoeff() == 0.0);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        const double dense = grad_params(params, pts.row(i).transpose(), 0)
                                 .dot(grad_params(params, pts.row(j).transpose(), 0));
        CHECK(k(i, j) == doctest::Approx(dense).epsilon(1e-12));
      }
  }

  SUBCASE("last-layer block matches the post-activation formula") {
    const Eigen::MatrixXd k_last = empirical_ntk_last_layer(params, pts, pts, 0);
    const ForwardTrace trace = forward(params, pts);
    const double sw2 = arch.sigma_w * arch.sigma_w;
    const double sb2 = arch.sigma_b * arch.sigma_b;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        const double expected =
            sb2 + sw2 / 16.0 * trace.post.back().row(i).dot(trace.post.back().row(j));
        CHECK(k_last(i, j) == doctest::Approx(expected).epsilon(1e-12));
      }
  }

  SUBCASE("full kernel decomposes into last-layer plus body blocks") {
    // partition of the flattened gradient: body block + final-layer block
    const long long off = params.last_layer_offset();
    for (int i = 0; i < 3; ++i) {
      const Eigen::VectorXd gi = grad_params(params, pts.row(i).transpose(), 0);
      const Eigen::VectorXd gj = grad_params(params, pts.row(i + 1).transpose(), 0);
      const double full = empirical_ntk(params, pts.row(i), pts.row(i + 1), 0)(0, 0);
      const double last = gi.tail(gi.size() - off).dot(gj.tail(gj.size() - off));
      const double body = gi.head(off).dot(gj.head(off));
      CHECK(full == doctest::Approx(last + body).epsilon(1e-12));
    }
  }

  SUBCASE("cross-head last-layer gradients are exactly orthogonal") {
    const Eigen::VectorXd g0 = grad_params(params, pts.row(0).transpose(), 0);
    const Eigen::VectorXd g1 = grad_params(params, pts.row(1).transpose(), 1);
    const long long off = params.last_layer_offset();
    CHECK(g0.tail(g0.size() - off).dot(g1.tail(g1.size() - off)) == 0.0);
  }
}

TEST_CASE("loss gradient matches accumulated per-head gradients") {
  const Architecture arch = small_arch(2, {7}, 3);
  const MlpParams params = init_params(arch, 21);
  Rng rng(22);
  const Eigen::MatrixXd x = rng.normal_matrix(5, 2);
  const Eigen::MatrixXd residual = rng.normal_matrix(5, 3);

  const ParamBlocks batched = loss_gradient(params, x, residual);
  Eigen::VectorXd accumulated = Eigen::VectorXd::Zero(arch.param_count());
  for (int p = 0; p < 5; ++p)
    for (int h = 0; h < 3; ++h)
      accumulated += residual(p, h) * grad_params(params, x.row(p).transpose(), h);

  MlpParams as_params = params;
  for (auto& w : as_params.weights) w.setZero();
  for (auto& b : as_params.biases) b.setZero();
  axpy(as_params, batched, 1.0);
  CHECK((as_params.flatten() - accumulated).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("parameter checkpoint round trip") {
  const Architecture arch = small_arch(4, {5, 3}, 2, Activation::Erf);
  const MlpParams params = init_params(arch, 31);
  const std::string path = std::filesystem::temp_directory_path() / "ntklab_params_test.bin";
  save_params(path, params);
  const MlpParams loaded = load_params(path);
  CHECK(loaded.flatten() == params.flatten());
  CHECK(loaded.arch.hidden_widths == arch.hidden_widths);
  CHECK(loaded.arch.activation == arch.activation);
  CHECK(loaded.arch.sigma_w == arch.sigma_w);
  std::filesystem::remove(path);
}

TEST_CASE("architecture validation") {
  Architecture arch = small_arch(3, {}, 1);
  CHECK_THROWS_AS(arch.validate(true), std::invalid_argument);
  CHECK_NOTHROW(arch.validate(false));
  arch.hidden_widths = {4};
  arch.sigma_w = 0.0;
  CHECK_THROWS_AS(arch.validate(), std::invalid_argument);
  arch.sigma_w = 1.0;
  arch.num_heads = 0;
  CHECK_THROWS_AS(arch.validate(), std::invalid_argument);
}
