#include "gmclab/kahane.hpp"

#include <cmath>

#include "gmclab/error.hpp"
#include "gmclab/numerics.hpp"
#include "gmclab/stats.hpp"

namespace gmclab {

CovariancePair generate_dominating_pair(int n, std::uint64_t seed, int n_bumps) {
  if (n < 1) fail(ErrorCode::InvalidArgument, "pair dimension must be >= 1");
  if (n_bumps < 0) fail(ErrorCode::InvalidArgument, "bump count must be >= 0");
  CovariancePair p;
  p.seed = seed;
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(n)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  p.factor.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) p.factor(i, j) = normal(rng);
  p.bumps.resize(n, n_bumps);
  for (int b = 0; b < n_bumps; ++b)
    for (int i = 0; i < n; ++i) p.bumps(i, b) = unit(rng);
  p.weights.resize(n);
  for (double& w : p.weights) w = (0.1 + 0.9 * unit(rng)) / n;
  p.c1 = p.factor * p.factor.transpose();
  p.c2 = p.c1 + p.bumps * p.bumps.transpose();
  return p;
}

const char* convexity_name(Convexity c) noexcept {
  switch (c) {
    case Convexity::Convex:
      return "convex";
    case Convexity::Concave:
      return "concave";
    case Convexity::Linear:
      return "linear";
  }
  return "unknown";
}

TestFunction make_test_function(const std::string& name, double threshold, double cap) {
  if (name == "square") return {name, Convexity::Convex, [](double x) { return x * x; }};
  if (name == "hinge") return {name, Convexity::Convex, [threshold](double x) { return std::max(x - threshold, 0.0); }};
  if (name == "capped_exp") return {name, Convexity::Convex, [cap](double x) { return std::exp(std::min(x, cap)); }};
  if (name == "sqrt") return {name, Convexity::Concave, [](double x) { return std::sqrt(x); }};
  if (name == "log1p") return {name, Convexity::Concave, [](double x) { return std::log1p(x); }};
  if (name == "identity") return {name, Convexity::Linear, [](double x) { return x; }};
  fail(ErrorCode::UnknownConvexityTag, "no convexity tag for test function '" + name + "'");
}

std::vector<TestFunction> kahane_battery(double threshold, double cap) {
  std::vector<TestFunction> out;
  for (const char* name : {"square", "hinge", "capped_exp", "sqrt", "log1p"})
    out.push_back(make_test_function(name, threshold, cap));
  return out;
}

double exact_second_moment(std::span<const double> weights, const Eigen::MatrixXd& cov, double gamma) {
  const auto n = static_cast<Eigen::Index>(weights.size());
  if (cov.rows() != n || cov.cols() != n) fail(ErrorCode::InvalidArgument, "weights and covariance disagree");
  const double g2 = gamma * gamma;
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) row += weights[j] * std::exp(g2 * cov(i, j));
    total += weights[i] * row;
  }
  return total;
}

double exact_fourth_moment(std::span<const double> weights, const Eigen::MatrixXd& cov, double gamma) {
  const auto n = static_cast<Eigen::Index>(weights.size());
  if (cov.rows() != n || cov.cols() != n) fail(ErrorCode::InvalidArgument, "weights and covariance disagree");
  const Eigen::MatrixXd e = (gamma * gamma * cov).array().exp().matrix();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double wij = weights[i] * weights[j] * e(i, j);
      for (Eigen::Index k = 0; k < n; ++k) {
        const double wijk = wij * weights[k] * e(i, k) * e(j, k);
        double inner = 0.0;
        for (Eigen::Index l = 0; l < n; ++l) inner += weights[l] * e(i, l) * e(j, l) * e(k, l);
        total += wijk * inner;
      }
    }
  return total;
}

std::vector<TrialResult> convexity_trial(const CovariancePair& pair, double gamma,
                                         std::span<const TestFunction> functions, std::size_t n_replicas,
                                         std::uint64_t seed) {
  const auto n = pair.factor.rows();
  const auto nb = pair.bumps.cols();
  const std::size_t nf = functions.size();
  std::vector<RunningStats> s1(nf), s2(nf);
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd xi(n), eta(nb);
  const double half = 0.5 * gamma * gamma;
  for (std::size_t r = 0; r < n_replicas; ++r) {
    for (Eigen::Index i = 0; i < n; ++i) xi[i] = normal(rng);
    for (Eigen::Index b = 0; b < nb; ++b) eta[b] = normal(rng);
    const Eigen::VectorXd x1 = pair.factor * xi;
    const Eigen::VectorXd x2 = x1 + pair.bumps * eta;
    double m1 = 0.0, m2 = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      m1 += pair.weights[i] * std::exp(gamma * x1[i] - half * pair.c1(i, i));
      m2 += pair.weights[i] * std::exp(gamma * x2[i] - half * pair.c2(i, i));
    }
    for (std::size_t f = 0; f < nf; ++f) {
      s1[f].add(functions[f].f(m1));
      s2[f].add(functions[f].f(m2));
    }
  }
  std::vector<TrialResult> out(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    TrialResult& t = out[f];
    t.function = functions[f].name;
    t.tag = functions[f].tag;
    t.ef1 = s1[f].mean;
    t.se1 = s1[f].se();
    t.ef2 = s2[f].mean;
    t.se2 = s2[f].se();
    t.pooled_se = std::sqrt(t.se1 * t.se1 + t.se2 * t.se2);
    const double slack = 2.0 * t.pooled_se;
    switch (t.tag) {
      case Convexity::Convex:
        t.verdict = t.ef1 <= t.ef2 + slack;
        break;
      case Convexity::Concave:
        t.verdict = t.ef1 >= t.ef2 - slack;
        break;
      case Convexity::Linear:
        t.verdict = std::abs(t.ef1 - t.ef2) <= slack;
        break;
    }
  }
  return out;
}

}  // namespace gmclab
