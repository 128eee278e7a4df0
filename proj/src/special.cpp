#include "vaecert/special.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace vaecert::num {

double normal_cdf(double x) { return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0); }

double normal_pdf(double x) {
  constexpr double inv_sqrt_2pi = 0.3989422804014326779;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

namespace {

// Solve normal_cdf(x) = p for p <= 0.5. Newton with a bisection bracket;
// the left tail of erfc keeps full relative accuracy, so convergence is
// clean even for p near the underflow threshold.
double probit_lower_half(double p) {
  double lo = -40.0, hi = 0.0;
  double x = -1.0;
  for (int it = 0; it < 200; ++it) {
    const double f = normal_cdf(x) - p;
    if (f > 0.0) {
      hi = x;
    } else if (f < 0.0) {
      lo = x;
    } else {
      return x;
    }
    const double d = normal_pdf(x);
    double xn = d > 0.0 ? x - f / d : 0.5 * (lo + hi);
    if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
    if (std::abs(xn - x) <= 1e-16 * (1.0 + std::abs(xn))) return xn;
    x = xn;
  }
  return x;
}

}  // namespace

double probit(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("probit: p must lie strictly in (0,1)");
  if (p == 0.5) return 0.0;
  return p < 0.5 ? probit_lower_half(p) : -probit_lower_half(1.0 - p);
}

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double inverse_softplus(double y) {
  if (y <= 0.0) throw std::domain_error("inverse_softplus: argument must be positive");
  // log(e^y - 1), stable for both tails
  return y > 30.0 ? y : std::log(std::expm1(y));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Interval wilson_interval(std::size_t successes, std::size_t n, double z) {
  if (n == 0) throw std::invalid_argument("wilson_interval: n must be positive");
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

double binomial_stderr(double p_hat, std::size_t n) {
  if (n == 0) throw std::invalid_argument("binomial_stderr: n must be positive");
  return std::sqrt(p_hat * (1.0 - p_hat) / static_cast<double>(n));
}

}  // namespace vaecert::num
