#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gmclab/gff.hpp"

namespace gmclab {

/// Throws SupercriticalGamma unless |gamma| < 2.
void check_subcritical(double gamma);

/// exp(gamma v - gamma^2 var / 2) * area for each cell.
void cell_masses(std::span<const double> values, std::span<const double> variances, double gamma, double area,
                 std::span<double> out);

struct GmcMeasure {
  double gamma = 0.0;
  std::shared_ptr<const Grid> grid;
  std::vector<double> cell_mass;
  double cell_area = 0.0;
  Scheme scheme;
  std::uint64_t seed_used = 0;
  std::uint64_t replica_index = 0;

  double total() const noexcept;
  /// sum_i f(z_i) mass_i
  double pair(const std::function<double(Point)>& f) const;
};

struct DerivativeMeasure {
  double gamma = 0.0;
  std::shared_ptr<const Grid> grid;
  std::vector<double> cell_value;
  double cell_area = 0.0;

  double pair(const std::function<double(Point)>& f) const;
};

/// One measure per gamma, all from the same field values (coupled gamma process).
std::vector<GmcMeasure> build_measure(const FieldSample& field, std::span<const double> gammas);
GmcMeasure build_measure(const FieldSample& field, double gamma);

/// Max relative cellwise deviation between M(field + f) and e^{gamma f} M(field).
double shift_identity_check(const FieldSample& field, const std::function<double(Point)>& f, double gamma);

DerivativeMeasure derivative_measure(const FieldSample& field, double gamma);

struct GmcOnGmc {
  GmcMeasure iterated;   // M^a(field2) over the base M^gamma(field1)
  GmcMeasure combined;   // M^{sqrt(gamma^2 + a^2)} of the combined field
  double max_rel_dev = 0.0;
};
GmcOnGmc gmc_on_gmc(const FieldSample& field1, const FieldSample& field2, double gamma, double a);

/// Pushes the measure forward under u -> (u - a) / (1 - conj(a) u) on the unit
/// disk. Each cell's mass moves to the retained cell nearest to the image of
/// its center; total mass is preserved exactly.
GmcMeasure pushforward_measure(const GmcMeasure& measure, Point a);

/// build_measure with cells zeroed where Gamma_nu(z) / (-log nu) > a for some
/// nu in the ladder. Eigen scheme only (needs averages at several radii).
GmcMeasure thin_measure(const FieldSampler& sampler, const FieldSample& field, double gamma, double a,
                        std::span<const double> ladder);

/// Geometric ladder with ratio 2 from `start` down to `stop` (both included when on the ladder).
std::vector<double> dyadic_ladder(double start, double stop);

/// CSV with columns x,y,mass preceded by a '#' JSON header line.
void write_measure_csv(const std::string& path, const GmcMeasure& measure);

}  // namespace gmclab
