#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gmclab/domain.hpp"
#include "gmclab/gff.hpp"
#include "gmclab/gmc.hpp"
#include "gmclab/stats.hpp"

namespace gmclab {

enum class FractalKind { Point, Segment, CantorDust };

const char* fractal_name(FractalKind kind) noexcept;

/// Deterministic compact set. CantorDust is the depth-n product of middle-thirds
/// Cantor sets over the square [origin, origin + side]^2, i.e. 4^n squares of side side 3^-n.
struct FractalSpec {
  FractalKind kind = FractalKind::Point;
  Point a, b;          // point; segment endpoints; dust origin in a
  double side = 0.0;   // dust only
  int depth = 0;       // dust only
  double analytic_ds = 0.0;

  static FractalSpec point(Point z);
  static FractalSpec segment(Point from, Point to);
  static FractalSpec cantor_dust(Point origin, double side, int depth);

  double distance(Point z) const;
  /// Smallest distance from the set to the domain boundary.
  double clearance(DomainKind domain) const;
};

struct ScalingPoint {
  double x = 0.0;  // radius or mass
  double estimate = 0.0;
  double se = 0.0;
};

struct ScalingFit {
  std::vector<ScalingPoint> points;
  LineFit fit;   // log estimate against log x
  Interval ci;   // 95% on the slope
};

/// Smallest grid-realizable radius s with mass(B_s(z)) >= r_mass, where B_s(z) may
/// not leave the retained region (MassUnreachable otherwise).
double quantum_radius(const GmcMeasure& measure, Point z, double r_mass);

/// Area of the r-neighborhood of the set on the grid against r; slope is d_s.
ScalingFit euclidean_scaling_dim(const Grid& grid, const FractalSpec& fractal, std::span<const double> radii);

struct KpzOptions {
  std::size_t n_replicas = 5000;
  std::size_t first_replica = 0;
  std::size_t batches = 100;
  int workers = 1;
};

/// E M(z : Q_r(z) meets X) against the quantum mass r; slope is q_s. Quantum
/// balls use the same realization as the measure.
ScalingFit gmc_scaling_dim(const FieldSampler& sampler, double gamma, const FractalSpec& fractal,
                           std::span<const double> r_masses, const KpzOptions& opt);

/// theta(q) = (2 - gamma^2/2) q + gamma^2 q^2 / 2
double kpz_theta(double q, double gamma) noexcept;

/// Root of kpz_theta(q, gamma) = ds in [0, 2].
double kpz_solve_qs(double ds, double gamma);

struct KpzResidual {
  double residual = 0.0;  // ds - theta(qs)
  double theta = 0.0;     // theta(qs)
};
KpzResidual kpz_residual(double ds, double qs, double gamma) noexcept;

struct KpzResult {
  double gamma = 0.0;
  FractalKind fractal = FractalKind::Point;
  double ds_est = 0.0;
  Interval ds_ci;
  double qs_est = 0.0;
  Interval qs_ci;
  double quadratic_residual = 0.0;
  double residual_se = 0.0;  // delta method
  double qs_analytic = 0.0;
  double theta = 0.0;
};

KpzResult kpz_result(double gamma, const FractalSpec& fractal, const ScalingFit& ds, const ScalingFit& qs);

struct RadiusMoments {
  double q = 0.0;
  double power = 0.0;  // theta(q)
  ScalingFit fit;      // E Rad(Q_r(root))^power against r
  std::size_t zero_radius = 0;  // replica-radius pairs where the root cell alone carries r
};

/// Shift-route rooted fields with the root at the cell nearest the domain center.
RadiusMoments rooted_radius_moments(const FieldSampler& sampler, double gamma, double q,
                                    std::span<const double> r_masses, const KpzOptions& opt);

}  // namespace gmclab
