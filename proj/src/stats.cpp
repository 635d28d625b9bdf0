#include "ntklab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Core>

namespace ntklab {

namespace {

// Series expansion of P(a,x), valid for x < a + 1.
double lower_gamma_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int i = 0; i < 500; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * 1e-15) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Lentz continued fraction for Q(a,x), valid for x >= a + 1.
double upper_gamma_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-15) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double regularized_lower_gamma(double a, double x) {
  if (a <= 0.0) throw std::invalid_argument("gamma shape must be positive");
  if (x < 0.0) throw std::invalid_argument("gamma argument must be nonnegative");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  return x < a + 1.0 ? lower_gamma_series(a, x) : 1.0 - upper_gamma_cf(a, x);
}

double ks_asymptotic_pvalue(double d, std::size_t n) {
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  const double lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
  double sum = 0.0;
  double sign = 1.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += sign * term;
    sign = -sign;
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

FitReport ks_test(std::vector<double> samples, const std::function<double(double)>& cdf,
                  const std::string& null_law) {
  if (samples.size() < 8) throw std::invalid_argument("ks_test needs at least 8 samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    const double lo = f - static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n - f;
    d = std::max({d, lo, hi});
  }
  FitReport report;
  report.statistic = d;
  report.p_value = ks_asymptotic_pvalue(d, samples.size());
  report.null_law = null_law;
  report.sample_size = samples.size();
  return report;
}

std::function<double(double)> chi2_scaled_cdf(int dof, double scale) {
  if (dof < 1) throw std::invalid_argument("chi2 dof must be >= 1");
  if (!(scale > 0.0)) throw std::invalid_argument("chi2 scale must be positive");
  const double half_dof = dof / 2.0;
  return [half_dof, scale](double x) {
    if (x <= 0.0) return 0.0;
    if (std::isinf(x)) return 1.0;
    return regularized_lower_gamma(half_dof, x / (2.0 * scale));
  };
}

double discrepancy(const std::vector<double>& empirical, const std::vector<double>& analytic,
                   DiscrepancyKind kind) {
  if (empirical.size() != analytic.size())
    throw std::invalid_argument("discrepancy: length mismatch");
  if (empirical.empty()) throw std::invalid_argument("discrepancy: empty input");
  const Eigen::Map<const Eigen::VectorXd> e(empirical.data(),
                                            static_cast<Eigen::Index>(empirical.size()));
  const Eigen::Map<const Eigen::VectorXd> a(analytic.data(),
                                            static_cast<Eigen::Index>(analytic.size()));
  switch (kind) {
    case DiscrepancyKind::MSD: return (e - a).squaredNorm() / static_cast<double>(e.size());
    case DiscrepancyKind::RelErr: {
      const double denom = a.norm();
      if (denom == 0.0) return e.norm() == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
      return (e - a).norm() / denom;
    }
    case DiscrepancyKind::MaxAbs: return (e - a).cwiseAbs().maxCoeff();
  }
  throw std::logic_error("unknown discrepancy kind");
}

}  // namespace ntklab
