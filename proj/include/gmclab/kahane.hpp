#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gmclab {

/// c2 = c1 + sum_b beta_b beta_b^T with beta_b >= 0 entrywise, so c1 <= c2 entrywise.
struct CovariancePair {
  Eigen::MatrixXd factor;  // B with c1 = B B^T
  Eigen::MatrixXd bumps;   // columns beta_b
  Eigen::MatrixXd c1, c2;
  std::vector<double> weights;
  std::uint64_t seed = 0;
};

/// B has i.i.d. N(0, 1/n) entries, bumps are U(0, 1) entrywise, weights U(0.1, 1) / n.
/// n_bumps = 0 gives c1 = c2.
CovariancePair generate_dominating_pair(int n, std::uint64_t seed, int n_bumps = 1);

enum class Convexity { Convex, Concave, Linear };

const char* convexity_name(Convexity c) noexcept;

struct TestFunction {
  std::string name;
  Convexity tag = Convexity::Convex;
  std::function<double(double)> f;
};

/// Named members of the battery: "square", "hinge" (x - threshold)_+, "capped_exp"
/// exp(min(x, cap)), "sqrt", "log1p", "identity". Throws UnknownConvexityTag otherwise.
TestFunction make_test_function(const std::string& name, double threshold = 1.0, double cap = 40.0);

/// square, hinge, capped_exp, sqrt, log1p.
std::vector<TestFunction> kahane_battery(double threshold, double cap = 40.0);

/// sum_{i,j} a_i a_j exp(gamma^2 cov(i, j))
double exact_second_moment(std::span<const double> weights, const Eigen::MatrixXd& cov, double gamma);

/// sum_{i,j,k,l} a_i a_j a_k a_l exp(gamma^2 (sum of the six pairwise covariances)).
/// With the second moment it gives the exact standard error of a Monte Carlo mean of M^2.
double exact_fourth_moment(std::span<const double> weights, const Eigen::MatrixXd& cov, double gamma);

struct TrialResult {
  std::string function;
  Convexity tag = Convexity::Convex;
  double ef1 = 0.0, se1 = 0.0;
  double ef2 = 0.0, se2 = 0.0;
  double pooled_se = 0.0;
  bool verdict = false;  // direction consistent with the tag within 2 pooled SE
};

/// Samples X2 = X1 + sum_b beta_b eta_b (coupled), M_k = sum_i a_i exp(gamma X_i - gamma^2 c_k(i,i) / 2),
/// and evaluates every function on the same draws.
std::vector<TrialResult> convexity_trial(const CovariancePair& pair, double gamma,
                                         std::span<const TestFunction> functions, std::size_t n_replicas,
                                         std::uint64_t seed);

}  // namespace gmclab
