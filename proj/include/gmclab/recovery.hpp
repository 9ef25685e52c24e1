#pragma once

#include <memory>
#include <span>
#include <vector>

#include "gmclab/gff.hpp"
#include "gmclab/gmc.hpp"
#include "gmclab/stats.hpp"

namespace gmclab {

/// m_eps(z) = (1/gamma) log M(B_eps(z)) on the cells whose closed eps-ball lies in
/// the retained region.
struct RecoveredField {
  double gamma = 0.0;
  double eps = 0.0;
  std::shared_ptr<const Grid> grid;
  std::vector<std::size_t> cells;
  std::vector<double> m_eps;
  std::vector<double> centered;  // m_eps minus the cross-replica mean, once centered
};

/// Rejects gamma = 0 (InvalidArgument); eps below 4 spacings is UnsupportedRadius.
RecoveredField log_mass_field(const GmcMeasure& measure, double eps);

/// Subtracts a per-cell mean given on rf.cells.
void center_recovered(RecoveredField& rf, std::span<const double> mean);

/// amplitude * exp(1 - 1/(1 - |z - c|^2 / radius^2)) inside the disc, 0 outside.
struct Bump {
  Point center;
  double radius = 0.1;
  double amplitude = 1.0;
  double operator()(Point z) const noexcept;
};

/// Three bumps inside [0.3, 0.7]^2 at different scales.
std::vector<Bump> default_bumps();

struct RecoveryOptions {
  std::size_t n_replicas = 2000;
  std::size_t first_replica = 0;
  std::size_t batches = 100;
  int workers = 1;
};

struct PairingStat {
  double eps = 0.0;
  std::size_t bump = 0;
  double second_moment = 0.0;  // E <R_eps, f>^2
  double se = 0.0;
};

struct EpsProfile {
  double eps = 0.0;
  double mean_m = 0.0;          // spatial mean of E m_eps(z)
  double mean_variance = 0.0;   // spatial mean of Var R_eps(z)
  double max_variance = 0.0;
  double correlation = 0.0;     // pooled corr(Gamma_eps, centered m_eps)
  double correlation_se = 0.0;
};

struct RecoveryResult {
  double gamma = 0.0;
  std::vector<EpsProfile> profiles;   // ladder order
  std::vector<PairingStat> pairings;  // eps-major
  LineFit centering;                  // mean_m against log eps
  double variance_ratio = 0.0;        // mean_variance at the last eps over the first
  std::size_t cells = 0;              // analysis cells
  std::size_t n_replicas = 0;
};

/// Paired replicas: the same field supplies Gamma_eps and M. Two passes, the
/// first for the pointwise centering. Eigen scheme only.
RecoveryResult recovery_residual(const FieldSampler& sampler, double gamma, std::span<const double> eps_ladder,
                                 std::span<const Bump> bumps, const RecoveryOptions& opt);

}  // namespace gmclab
