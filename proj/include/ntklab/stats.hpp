#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace ntklab {

struct FitReport {
  double statistic = 0.0;
  double p_value = 1.0;
  std::string null_law;
  std::size_t sample_size = 0;
};

/// One-sample Kolmogorov-Smirnov test against the supplied CDF. p-values use
/// the asymptotic Kolmogorov distribution with the small-sample sqrt(n)
/// correction; requires at least 8 samples.
FitReport ks_test(std::vector<double> samples, const std::function<double(double)>& cdf,
                  const std::string& null_law = "");

/// CDF of scale * chi^2(dof) via the regularized lower incomplete gamma.
std::function<double(double)> chi2_scaled_cdf(int dof, double scale);

enum class DiscrepancyKind { MSD, RelErr, MaxAbs };

/// MSD = mean squared difference, RelErr = ||diff|| / ||analytic||,
/// MaxAbs = max |diff|. The inputs must have equal length.
double discrepancy(const std::vector<double>& empirical, const std::vector<double>& analytic,
                   DiscrepancyKind kind);

/// Regularized lower incomplete gamma P(a, x), series/continued-fraction
/// split at x = a + 1.
double regularized_lower_gamma(double a, double x);

/// Asymptotic KS p-value for statistic d at sample size n.
double ks_asymptotic_pvalue(double d, std::size_t n);

}  // namespace ntklab
