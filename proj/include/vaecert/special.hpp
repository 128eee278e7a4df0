#pragma once

#include <cstddef>

namespace vaecert::num {

/// Standard normal CDF, computed through the complementary error function.
double normal_cdf(double x);

/// Standard normal density.
double normal_pdf(double x);

/// Inverse standard normal CDF. Safeguarded Newton iteration on the
/// erfc-based CDF; accurate to ~1e-13 over (1e-300, 1-1e-12). Throws
/// std::domain_error unless 0 < p < 1.
double probit(double p);

double softplus(double x);
double inverse_softplus(double y);  // y > 0
double sigmoid(double x);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Wilson score interval for a binomial proportion with `successes` out of
/// `n` trials at z standard deviations (default two-sided 95%).
Interval wilson_interval(std::size_t successes, std::size_t n, double z = 1.96);

/// Plain binomial standard error sqrt(p(1-p)/n).
double binomial_stderr(double p_hat, std::size_t n);

}  // namespace vaecert::num
