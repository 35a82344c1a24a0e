#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "nmjump/errors.hpp"

namespace nmjump {

// Survival function Q(x) = P(K > x) of the asymptotic Kolmogorov
// distribution. Large-x form: 2 sum_k (-1)^{k-1} exp(-2 k^2 x^2); small-x
// form via the Jacobi theta transformation for fast convergence.
inline double kolmogorov_sf(double x) {
  if (x <= 0.0) return 1.0;
  if (x < 1.0) {
    const double v = M_PI * M_PI / (8.0 * x * x);
    double sum = 0.0;
    for (int k = 1; k <= 20; k += 2) {
      const double term = std::exp(-v * k * k);
      sum += term;
      if (term < 1e-18 * sum) break;
    }
    return 1.0 - std::sqrt(2.0 * M_PI) / x * sum;
  }
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    sum += sign * term;
    sign = -sign;
    if (term < 1e-18) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult {
  double statistic = 0.0;  // D_n
  double p_value = 1.0;
  std::size_t n = 0;
};

// One-sample Kolmogorov-Smirnov test of values already mapped through the
// hypothesized CDF (probability integral transform): under H0 they are
// uniform on (0, 1). The p-value uses the Stephens small-sample adjustment
// of the asymptotic distribution.
inline KsResult ks_test_uniform(std::vector<double> u) {
  if (u.size() < 8)
    throw ValidationError("ks_test_uniform: need at least 8 samples");
  std::sort(u.begin(), u.end());
  const double n = static_cast<double>(u.size());
  double d = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double lo = static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n;
    d = std::max({d, u[i] - lo, hi - u[i]});
  }
  const double sqrt_n = std::sqrt(n);
  const double arg = d * (sqrt_n + 0.12 + 0.11 / sqrt_n);
  return {d, kolmogorov_sf(arg), u.size()};
}

// Same test against an arbitrary CDF.
inline KsResult ks_test(const std::vector<double>& samples,
                        const std::function<double(double)>& cdf) {
  std::vector<double> u;
  u.reserve(samples.size());
  for (double s : samples) u.push_back(cdf(s));
  return ks_test_uniform(std::move(u));
}

// Standard error of an empirical proportion.
inline double binomial_stderr(double p_hat, std::size_t n) {
  return std::sqrt(std::max(0.0, p_hat * (1.0 - p_hat)) /
                   static_cast<double>(n));
}

}  // namespace nmjump
