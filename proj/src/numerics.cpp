#include "gmclab/numerics.hpp"

#include <cmath>
#include <numbers>

#include "gmclab/error.hpp"

namespace gmclab {

double bessel_j0(double x) noexcept {
  x = std::abs(x);
  if (x < 12.0) {
    const double y = -0.25 * x * x;
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k < 80; ++k) {
      term *= y / (static_cast<double>(k) * k);
      sum += term;
      if (std::abs(term) < 1e-18) break;
    }
    return sum;
  }
  // Hankel expansion: J0 = sqrt(2/(pi x)) (P cos chi - Q sin chi), chi = x - pi/4,
  // with a_k = prod_{m<=k} (-(2m-1)^2) / (k! 8^k).
  double p = 1.0;
  double q = 0.0;
  double a = 1.0;
  double xpow = 1.0;
  double last = 1.0;
  for (int k = 1; k < 60; ++k) {
    a *= -static_cast<double>((2 * k - 1) * (2 * k - 1)) / (8.0 * k);
    xpow *= x;
    const double term = a / xpow;
    if (std::abs(term) > last) break;  // asymptotic series started to diverge
    last = std::abs(term);
    // even k feeds P with sign (-1)^(k/2), odd k feeds Q with sign (-1)^((k-1)/2)
    if (k % 2 == 0) {
      p += ((k / 2) % 2 == 0 ? 1.0 : -1.0) * term;
    } else {
      q += (((k - 1) / 2) % 2 == 0 ? 1.0 : -1.0) * term;
    }
    if (last < 1e-17) break;
  }
  const double chi = x - 0.25 * std::numbers::pi;
  return std::sqrt(2.0 / (std::numbers::pi * x)) * (p * std::cos(chi) - q * std::sin(chi));
}

QuadratureRule gauss_legendre(int n) {
  if (n < 1) fail(ErrorCode::InvalidArgument, "gauss_legendre needs n >= 1");
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) {
        p1 = x;
        p0 = 1.0;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

}  // namespace gmclab
