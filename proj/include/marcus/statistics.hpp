#pragma once

#include <vector>

namespace marcus {

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Two-sample Kolmogorov-Smirnov test with the asymptotic Kolmogorov
/// distribution (effective size n m / (n + m), Stephens' correction).
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Least squares y = intercept + slope x; needs at least two distinct x.
LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

/// linear_fit on (log x, log y) over the entries with x, y > 0 and finite.
LinearFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace marcus
