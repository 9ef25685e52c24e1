#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gmclab/gff.hpp"
#include "gmclab/gmc.hpp"
#include "gmclab/stats.hpp"

namespace gmclab {

/// zeta(q) = (2 + gamma^2 / 2) q - gamma^2 q^2 / 2
double zeta_exponent(double gamma, double q) noexcept;

/// Direct averages M(B)^q. Rooted uses E[M(B)^q] = |B| E[M*(B)^(q-1)] with the
/// root uniform in B and M* the mass of the shifted field; it needs only the
/// (2q - 1)-th moment to have finite variance.
enum class MomentEstimator { Direct, Rooted };
const char* estimator_name(MomentEstimator e) noexcept;

struct MomentPoint {
  double r = 0.0;
  std::size_t cells = 0;     // cells with centers in B_r
  double estimate = 0.0;     // mean of M(B_r)^q
  double se = 0.0;           // batch-means standard error
  double median_of_means = 0.0;
};

struct MomentCurve {
  double gamma = 0.0;
  double q = 0.0;
  MomentEstimator estimator = MomentEstimator::Direct;
  std::vector<MomentPoint> points;
  LineFit fit;  // log estimate against log r
  std::size_t n_replicas = 0;
  bool beyond_moment_threshold = false;  // q >= 4 / gamma^2
};

struct MomentOptions {
  MomentEstimator estimator = MomentEstimator::Direct;
  std::size_t roots_per_replica = 4;  // rooted estimator only
  std::size_t n_replicas = 10000;
  std::size_t first_replica = 0;
  std::size_t batches = 100;
  int workers = 1;
};

/// Cells of the sampler grid with centers in B_r(center), after checking that the
/// ball is fully covered by retained cells (BallLeavesDomain) and that r is at
/// least 4 grid spacings and the scheme radius (BallTooSmallForGrid).
std::vector<std::size_t> ball_cells(const FieldSampler& sampler, Point center, double r);

/// E[M(B_r(center))^q] for every (gamma, q) pair from one pass over the replicas.
/// Curves are ordered gamma-major.
std::vector<MomentCurve> ball_mass_moments(const FieldSampler& sampler, std::span<const double> gammas,
                                           std::span<const double> qs, std::span<const double> radii, Point center,
                                           const MomentOptions& opt);
MomentCurve ball_mass_moments(const FieldSampler& sampler, double gamma, double q, std::span<const double> radii,
                              Point center, const MomentOptions& opt);

/// Closed-form E[M(B)^2] = sum_{i,j in B} h^4 exp(gamma^2 C(i,j)) under the sampler's covariance.
double exact_ball_second_moment(const FieldSampler& sampler, std::span<const std::size_t> cells, double gamma);

struct TailPoint {
  double nu = 0.0;
  std::size_t hits = 0;
  double prob = 0.0;
  double log_prob = 0.0;
  Interval wilson;
  bool censored = false;  // fewer than 10 hits
};

struct NegativeMoment {
  int m = 0;
  double estimate = 0.0;
  double se = 0.0;
};

struct TailCurve {
  double gamma = 0.0;
  std::vector<TailPoint> points;
  LineFit slope_vs_nu2;  // log P(log M <= -nu) against nu^2, uncensored points only
  Interval slope_ci;     // 95%
  std::vector<NegativeMoment> negative_moments;  // m = 1, 2
  std::size_t n_replicas = 0;
};

TailCurve lower_tail(const FieldSampler& sampler, double gamma, std::span<const double> nu_grid,
                     const MomentOptions& opt);

struct DimensionFit {
  std::vector<int> levels;            // k, boxes of side (domain side) * 2^-k
  std::vector<std::size_t> counts;    // boxes needed to carry the mass fraction
  LineFit fit;                        // log count against k log 2
  double dimension = 0.0;
  Interval ci;                        // 95%
};

/// Box-counting proxy: at each level the smallest number of dyadic boxes whose
/// masses sum to at least mass_fraction of the total. Levels default to all
/// dyadic levels from 1 to log2(grid_resolution) - 1.
DimensionFit support_box_dimension(const GmcMeasure& measure, double mass_fraction, std::span<const int> levels = {});

struct CauchyResult {
  double eps = 0.0, eps_prime = 0.0;
  double gap = 0.0;     // Monte Carlo E[(M_eps(f) - M_eps'(f))^2]
  double se = 0.0;
  double oracle = 0.0;  // closed form over the same grid
  std::size_t cells = 0;
  std::size_t n_replicas = 0;
};

/// Joint sampling of the circle-average fields at eps and eps' on the grid of
/// `domain` (one Cholesky of the stacked covariance). |gamma| < sqrt 2.
CauchyResult cauchy_diagnostic(const DomainSpec& domain, double eps, double eps_prime, double gamma,
                               const std::function<double(Point)>& f, std::uint64_t master_seed,
                               const MomentOptions& opt);

}  // namespace gmclab
