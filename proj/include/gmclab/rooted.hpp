#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gmclab/gff.hpp"
#include "gmclab/numerics.hpp"

namespace gmclab {

enum class RootRoute { Shift, SizeBiased };

const char* route_name(RootRoute route) noexcept;

struct RootedSample {
  FieldSample field;
  std::size_t root_index = 0;
  Point root;
  RootRoute route = RootRoute::Shift;
  double gamma = 0.0;
  // SizeBiased: M(D) / E M(D), so weighted averages target the rooted law. Shift: 1.
  double importance_weight = 1.0;
};

/// Shift route: uniform root, field + gamma C(root, .). SizeBiased route:
/// field as sampled, root drawn from the normalized cell masses.
RootedSample sample_rooted(const FieldSampler& sampler, double gamma, RootRoute route, std::uint64_t replica);

/// Shift route with a given root cell.
RootedSample sample_rooted_at(const FieldSampler& sampler, double gamma, std::size_t root, std::uint64_t replica);

/// F(field, z_i) for the requested cells.
struct Functional {
  std::string name;
  std::function<void(const FieldSample&, std::span<const std::size_t>, std::span<double>)> eval;
};

/// Functional depending on the field value at the cell and the cell center only.
Functional pointwise_functional(std::string name, std::function<double(double value, Point z)> f);

/// The default battery: Gamma(z), tanh Gamma(z), exp(-|z|^2), Gamma(z0), tanh((Gamma, phi))
/// for a smooth compactly supported bump phi centered at bump_center with radius bump_radius.
std::vector<Functional> default_battery(Point z0, Point bump_center, double bump_radius);

struct CharacterizationOptions {
  std::size_t n_replicas = 10000;
  std::size_t roots_per_replica = 16;
  double clip = 1e6;
  int workers = 1;
};

struct CharacterizationRow {
  std::string name;
  double lhs = 0.0, lhs_se = 0.0;
  double rhs = 0.0, rhs_se = 0.0;
  double pooled_se = 0.0;
  double z_score = 0.0;
  std::size_t clipped = 0;
};

/// LHS = E sum_i F(Gamma, z_i) M(cell_i) over replicas [0, n); RHS = E int F(Gamma + gamma C(z, .), z) dz
/// by uniform roots over replicas [n, 2n), so the two estimates are independent.
std::vector<CharacterizationRow> characterization_gap(const FieldSampler& sampler, double gamma,
                                                      std::span<const Functional> functionals,
                                                      const CharacterizationOptions& opt);

struct ThicknessPoint {
  double nu = 0.0;
  double circle_average = 0.0;  // Gamma_nu(root)
  double normalized = 0.0;      // Gamma_nu(root) / (-log nu)
  double brownian_time = 0.0;   // -log nu + log CR(root)
  double time_normalized = 0.0; // Gamma_nu(root) / brownian_time
};

/// Circle averages at the root along the ladder. Eigen scheme only.
std::vector<ThicknessPoint> thickness_trajectory(const RootedSample& rooted, std::span<const double> ladder);

}  // namespace gmclab
