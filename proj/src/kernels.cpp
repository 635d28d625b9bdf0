#include "ntklab/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "ntklab/parallel.hpp"

namespace ntklab {

namespace {

constexpr double kDegenerateVariance = 1e-12;

}  // namespace

GaussHermite::GaussHermite(int order) {
  if (order < 1) throw std::invalid_argument("quadrature order must be >= 1");
  // Roots of the physicists' Hermite polynomial by Newton iteration,
  // then rescaled to probabilists' convention (x = sqrt(2) t, w /= sqrt(pi)).
  const int n = order;
  Eigen::VectorXd t(n), w(n);
  const double pim4 = 0.7511255444649425;  // pi^(-1/4)
  const int m = (n + 1) / 2;
  double z = 0.0;
  for (int i = 0; i < m; ++i) {
    if (i == 0) {
      z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -0.16667);
    } else if (i == 1) {
      z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * t[0];
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * t[1];
    } else {
      z = 2.0 * z - t[i - 2];
    }
    double pp = 0.0;
    for (int iter = 0; iter < 200; ++iter) {
      double p1 = pim4;
      double p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1.0)) * p2 - std::sqrt(j / (j + 1.0)) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-15) break;
    }
    t[i] = z;
    t[n - 1 - i] = -z;
    w[i] = 2.0 / (pp * pp);
    w[n - 1 - i] = w[i];
  }
  points_ = std::sqrt(2.0) * t;
  weights_ = w / std::sqrt(M_PI);
}

const GaussHermite& shared_gauss_hermite(int order) {
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<GaussHermite>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[order];
  if (!slot) slot = std::make_unique<GaussHermite>(order);
  return *slot;
}

std::string to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::NNGP: return "nngp";
    case KernelKind::NTK: return "ntk";
    case KernelKind::NtkLastLayer: return "ntk-last-layer";
    case KernelKind::NtkBelowLast: return "ntk-below-last";
  }
  throw std::logic_error("unknown kernel kind");
}

KernelSpec nngp_spec(const Architecture& arch) {
  KernelSpec spec;
  spec.arch = arch;
  spec.kind = KernelKind::NNGP;
  return spec;
}

KernelSpec ntk_spec(const Architecture& arch) {
  KernelSpec spec;
  spec.arch = arch;
  spec.kind = KernelKind::NTK;
  return spec;
}

std::string describe(const KernelSpec& spec) {
  return to_string(spec.kind) + "(" + to_string(spec.arch.activation) +
         ",depth=" + std::to_string(spec.arch.depth()) +
         ",sigma_w=" + std::to_string(spec.arch.sigma_w) +
         ",sigma_b=" + std::to_string(spec.arch.sigma_b) +
         ",gh=" + std::to_string(spec.quadrature_order) + ")";
}

void KernelMatrix::validate(double sym_tol, double eig_floor) const {
  if (!square()) return;
  const double asym = (entries - entries.transpose()).cwiseAbs().maxCoeff();
  if (asym > sym_tol)
    throw std::runtime_error("kernel matrix asymmetric: max |K - K^T| = " + std::to_string(asym));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(entries, Eigen::EigenvaluesOnly);
  const double lambda_min = eig.eigenvalues().minCoeff();
  if (lambda_min < eig_floor)
    throw std::runtime_error("kernel matrix not PSD: smallest eigenvalue " +
                             std::to_string(lambda_min));
}

namespace {

// Closed-form Gaussian expectations. ReLU is the arc-cosine kernel family;
// Erf follows Williams' analytic result.
double relu_ee(double a, double c, double b) {
  if (a <= 0.0 || b <= 0.0) return 0.0;
  const double rho = std::clamp(c / std::sqrt(a * b), -1.0, 1.0);
  const double th = std::acos(rho);
  return std::sqrt(a * b) / (2.0 * M_PI) * (std::sin(th) + (M_PI - th) * std::cos(th));
}

double relu_dd(double a, double c, double b) {
  if (a <= 0.0 || b <= 0.0) return 0.0;
  const double rho = std::clamp(c / std::sqrt(a * b), -1.0, 1.0);
  return (M_PI - std::acos(rho)) / (2.0 * M_PI);
}

double erf_ee(double a, double c, double b) {
  return 2.0 / M_PI * std::asin(2.0 * c / std::sqrt((1.0 + 2.0 * a) * (1.0 + 2.0 * b)));
}

double erf_dd(double a, double c, double b) {
  const double det = (1.0 + 2.0 * a) * (1.0 + 2.0 * b) - 4.0 * c * c;
  return 4.0 / M_PI / std::sqrt(std::max(det, kDegenerateVariance));
}

template <typename F>
double quad_1d(const GaussHermite& gh, double v, F&& f) {
  const double s = std::sqrt(v);
  double acc = 0.0;
  for (int i = 0; i < gh.order(); ++i) acc += gh.weights()[i] * f(s * gh.points()[i]);
  return acc;
}

// Tensorized quadrature over whitened coordinates: z = sqrt(vxx) u,
// z' = (vxy/sqrt(vxx)) u + s v with the conditional variance s^2 clamped
// away from zero near |rho| = 1.
template <typename F, typename G>
double quad_2d(const GaussHermite& gh, double vxx, double vxy, double vyy, F&& f, G&& g) {
  if (vxx <= 0.0 && vyy <= 0.0) return f(0.0) * g(0.0);
  if (vxx <= 0.0) return f(0.0) * quad_1d(gh, vyy, g);
  if (vyy <= 0.0) return g(0.0) * quad_1d(gh, vxx, f);
  const double sx = std::sqrt(vxx);
  const double slope = vxy / sx;
  const double s = std::sqrt(std::max(vyy - vxy * vxy / vxx, kDegenerateVariance));
  const int n = gh.order();
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = gh.points()[i];
    const double fz = f(sx * u);
    if (fz == 0.0) continue;
    const double mean = slope * u;
    double inner = 0.0;
    for (int j = 0; j < n; ++j) inner += gh.weights()[j] * g(mean + s * gh.points()[j]);
    acc += gh.weights()[i] * fz * inner;
  }
  return acc;
}

}  // namespace

ActivationMoments bivariate_moments(Activation act, double vxx, double vxy, double vyy,
                                    const GaussHermite& gh, bool force_quadrature) {
  // Guard Cauchy-Schwarz violations from upstream rounding.
  const double bound = std::sqrt(std::max(vxx, 0.0) * std::max(vyy, 0.0));
  vxy = std::clamp(vxy, -bound, bound);

  if (!force_quadrature) {
    if (act == Activation::ReLU)
      return {relu_ee(vxx, vxy, vyy), relu_dd(vxx, vxy, vyy)};
    if (act == Activation::Erf)
      return {erf_ee(vxx, vxy, vyy), erf_dd(vxx, vxy, vyy)};
  }
  ActivationMoments m;
  m.ee = quad_2d(
      gh, vxx, vxy, vyy, [act](double z) { return activate(act, z); },
      [act](double z) { return activate(act, z); });
  m.dd = quad_2d(
      gh, vxx, vxy, vyy, [act](double z) { return activate_grad(act, z); },
      [act](double z) { return activate_grad(act, z); });
  return m;
}

double diag_second_moment(Activation act, double v, const GaussHermite& gh,
                          bool force_quadrature) {
  if (v <= 0.0) {
    const double f0 = activate(act, 0.0);
    return f0 * f0;
  }
  if (!force_quadrature) {
    if (act == Activation::ReLU) return v / 2.0;
    if (act == Activation::Erf) return erf_ee(v, v, v);
  }
  return quad_1d(gh, v, [act](double z) {
    const double f = activate(act, z);
    return f * f;
  });
}

namespace {

struct PairValue {
  double kappa = 0.0;  // kappa^L
  double theta = 0.0;  // Theta^L
};

// Diagonal recursion kappa^l(x,x), l = 1..L.
std::vector<double> diag_recursion(const KernelSpec& spec, const Eigen::VectorXd& x,
                                   const GaussHermite& gh) {
  const double sw2 = spec.arch.sigma_w * spec.arch.sigma_w;
  const double sb2 = spec.arch.sigma_b * spec.arch.sigma_b;
  std::vector<double> k(spec.arch.depth());
  k[0] = sw2 / static_cast<double>(spec.arch.input_dim) * x.dot(x) + sb2;
  for (int l = 1; l < spec.arch.depth(); ++l)
    k[l] = sb2 + sw2 * diag_second_moment(spec.arch.activation, k[l - 1], gh,
                                          spec.force_quadrature);
  return k;
}

// Cross recursion against cached diagonals. Layer 1 is the linear base case
// kappa^1 = sigma_w^2/n_0 x.y + sigma_b^2 with Theta^1 = kappa^1; deeper
// layers take activation expectations under the previous layer's law:
//   kappa^l = sigma_b^2 + sigma_w^2 E[phi phi],
//   Theta^l = Theta^{l-1} * sigma_w^2 E[phi' phi'] + kappa^l.
PairValue kernel_pair_cached(const KernelSpec& spec, const Eigen::VectorXd& x,
                             const Eigen::VectorXd& y, const std::vector<double>& dx,
                             const std::vector<double>& dy, const GaussHermite& gh) {
  const double sw2 = spec.arch.sigma_w * spec.arch.sigma_w;
  const double sb2 = spec.arch.sigma_b * spec.arch.sigma_b;
  double kxy = sw2 / static_cast<double>(spec.arch.input_dim) * x.dot(y) + sb2;
  double theta = kxy;
  for (int l = 2; l <= spec.arch.depth(); ++l) {
    const ActivationMoments m = bivariate_moments(spec.arch.activation, dx[l - 2], kxy, dy[l - 2],
                                                  gh, spec.force_quadrature);
    kxy = sb2 + sw2 * m.ee;
    theta = theta * (sw2 * m.dd) + kxy;
  }
  return {kxy, theta};
}

// One pair evaluated standalone; composed from the same recursions the Gram
// assembly uses, so cached and direct paths agree bit for bit.
PairValue kernel_pair(const KernelSpec& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                      const GaussHermite& gh) {
  const std::vector<double> dx = diag_recursion(spec, x, gh);
  const std::vector<double> dy = diag_recursion(spec, y, gh);
  return kernel_pair_cached(spec, x, y, dx, dy, gh);
}

double value_for_kind(const PairValue& v, KernelKind kind) {
  switch (kind) {
    case KernelKind::NNGP: return v.kappa;
    case KernelKind::NTK: return v.theta;
    case KernelKind::NtkLastLayer: return v.kappa;  // Theta^L_last == kappa
    case KernelKind::NtkBelowLast: return v.theta - v.kappa;
  }
  throw std::logic_error("unknown kernel kind");
}

}  // namespace

double nngp_kernel(const KernelSpec& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (spec.kind != KernelKind::NNGP && spec.kind != KernelKind::NtkLastLayer)
    throw std::invalid_argument("nngp_kernel called with non-NNGP spec");
  spec.validate();
  const GaussHermite& gh = shared_gauss_hermite(spec.quadrature_order);
  return kernel_pair(spec, x, y, gh).kappa;
}

double ntk_kernel(const KernelSpec& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (spec.kind != KernelKind::NTK)
    throw std::invalid_argument("ntk_kernel called with non-NTK spec");
  spec.validate();
  const GaussHermite& gh = shared_gauss_hermite(spec.quadrature_order);
  return kernel_pair(spec, x, y, gh).theta;
}

std::pair<double, double> ntk_split(const KernelSpec& spec, const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& y) {
  spec.validate();
  const GaussHermite& gh = shared_gauss_hermite(spec.quadrature_order);
  const PairValue v = kernel_pair(spec, x, y, gh);
  return {v.kappa, v.theta - v.kappa};
}

double kernel_value(const KernelSpec& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  spec.validate();
  const GaussHermite& gh = shared_gauss_hermite(spec.quadrature_order);
  return value_for_kind(kernel_pair(spec, x, y, gh), spec.kind);
}

KernelMatrix gram(const KernelSpec& spec, const Eigen::MatrixXd& xs, const Eigen::MatrixXd& ys) {
  spec.validate();
  if (xs.cols() != spec.arch.input_dim || ys.cols() != spec.arch.input_dim)
    throw std::invalid_argument("gram: point dimension does not match kernel input_dim");
  const GaussHermite& gh = shared_gauss_hermite(spec.quadrature_order);
  const bool aliased = xs.data() == ys.data() && xs.rows() == ys.rows();

  std::vector<std::vector<double>> dx(xs.rows());
  for (Eigen::Index i = 0; i < xs.rows(); ++i)
    dx[i] = diag_recursion(spec, xs.row(i).transpose(), gh);
  std::vector<std::vector<double>> dy_store;
  const std::vector<std::vector<double>>* dy = &dx;
  if (!aliased) {
    dy_store.resize(ys.rows());
    for (Eigen::Index j = 0; j < ys.rows(); ++j)
      dy_store[j] = diag_recursion(spec, ys.row(j).transpose(), gh);
    dy = &dy_store;
  }

  KernelMatrix km;
  km.spec = spec;
  km.row_points = xs;
  km.col_points = ys;
  km.entries.resize(xs.rows(), ys.rows());

  // Pair list: upper triangle (incl. diagonal) when symmetric, all otherwise.
  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
  if (aliased) {
    pairs.reserve(xs.rows() * (xs.rows() + 1) / 2);
    for (Eigen::Index i = 0; i < xs.rows(); ++i)
      for (Eigen::Index j = i; j < ys.rows(); ++j) pairs.emplace_back(i, j);
  } else {
    pairs.reserve(xs.rows() * ys.rows());
    for (Eigen::Index i = 0; i < xs.rows(); ++i)
      for (Eigen::Index j = 0; j < ys.rows(); ++j) pairs.emplace_back(i, j);
  }

  auto* entries = &km.entries;
  parallel_for(static_cast<long>(pairs.size()), [&](long p) {
    const auto [i, j] = pairs[static_cast<std::size_t>(p)];
    const PairValue v = kernel_pair_cached(spec, xs.row(i).transpose(), ys.row(j).transpose(),
                                           dx[i], (*dy)[j], gh);
    const double val = value_for_kind(v, spec.kind);
    (*entries)(i, j) = val;
    if (aliased && i != j) (*entries)(j, i) = val;
  });
  return km;
}

Eigen::VectorXd gram_diagonal(const KernelSpec& spec, const Eigen::MatrixXd& xs) {
  spec.validate();
  const GaussHermite& gh = shared_gauss_hermite(spec.quadrature_order);
  Eigen::VectorXd diag(xs.rows());
  for (Eigen::Index i = 0; i < xs.rows(); ++i) {
    const Eigen::VectorXd x = xs.row(i).transpose();
    diag[i] = value_for_kind(kernel_pair(spec, x, x, gh), spec.kind);
  }
  return diag;
}

void write_kernel_csv(const std::string& path, const KernelMatrix& km) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "# kind=" << to_string(km.spec.kind) << " activation=" << to_string(km.spec.arch.activation)
      << " depth=" << km.spec.arch.depth() << " sigma_w=" << km.spec.arch.sigma_w
      << " sigma_b=" << km.spec.arch.sigma_b << " gh_order=" << km.spec.quadrature_order << '\n';
  char buf[32];
  for (Eigen::Index i = 0; i < km.entries.rows(); ++i) {
    for (Eigen::Index j = 0; j < km.entries.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", km.entries(i, j));
      out << buf << (j + 1 < km.entries.cols() ? "," : "");
    }
    out << '\n';
  }
}

}  // namespace ntklab
