#pragma once

#include <complex>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace gmclab {

using Point = std::complex<double>;

enum class DomainKind { UnitDisk, UnitSquare };

const char* domain_name(DomainKind kind) noexcept;

/// Restricts the retained grid to a disk. Used when only part of the domain
/// is observed (small balls around a center, local statistics).
struct Window {
  Point center{0.0, 0.0};
  double radius = 0.0;
};

struct DomainSpec {
  DomainKind kind = DomainKind::UnitDisk;
  int grid_resolution = 64;      // cells per side of the bounding square
  double boundary_margin = 0.0;  // retained centers keep this distance to the boundary
  std::optional<Window> window;
};

/// Side of the bounding square: 2 for the disk ([-1,1]^2), 1 for the square ([0,1]^2).
double bounding_side(DomainKind kind) noexcept;
Point bounding_origin(DomainKind kind) noexcept;

/// Euclidean distance from z to the boundary; negative outside the domain.
double distance_to_boundary(DomainKind kind, Point z) noexcept;

/// Cell-center lattice of a DomainSpec, restricted to retained cells.
class Grid {
 public:
  explicit Grid(const DomainSpec& spec);

  const DomainSpec& spec() const noexcept { return spec_; }
  int side_cells() const noexcept { return spec_.grid_resolution; }
  double spacing() const noexcept { return h_; }
  double cell_area() const noexcept { return h_ * h_; }
  std::size_t size() const noexcept { return points_.size(); }
  double area() const noexcept { return h_ * h_ * static_cast<double>(points_.size()); }

  std::span<const Point> points() const noexcept { return points_; }
  Point point(std::size_t i) const noexcept { return points_[i]; }
  int column(std::size_t i) const noexcept { return cols_[i]; }
  int row(std::size_t i) const noexcept { return rows_[i]; }

  /// Retained index of lattice cell (col, row), or -1.
  std::ptrdiff_t index_of(int col, int row) const noexcept;
  /// Center of lattice cell (col, row), retained or not.
  Point cell_center(int col, int row) const noexcept;
  /// Nearest retained cell center to z, or -1 when z is outside the lattice.
  std::ptrdiff_t nearest(Point z) const noexcept;

  bool same_lattice(const Grid& other) const noexcept;

 private:
  DomainSpec spec_;
  double h_ = 0.0;
  Point origin_;
  std::vector<Point> points_;
  std::vector<int> cols_;
  std::vector<int> rows_;
  std::vector<std::ptrdiff_t> lookup_;
};

/// Zero-boundary Green kernel G(z,w) = -log|z-w| + g(z,w) with unit log coefficient.
///
/// Disk: g(z,w) = log|1 - z conj(w)|. Square: closed form through the Jacobi
/// theta function theta_1 (image sum over the reflection group of the square),
/// G = -log|t(z-w) t(z+w) / (t(z-conj w) t(z+conj w))| with t(u) = theta_1(pi u / 2, e^{-pi}).
/// A kernel can also describe a sub-disk B(c, rho) of the unit disk.
class KernelEval {
 public:
  explicit KernelEval(DomainKind kind);
  static KernelEval sub_disk(Point center, double radius);

  DomainKind kind() const noexcept { return kind_; }
  bool is_sub_disk() const noexcept { return scale_ != 1.0 || center_ != Point{}; }

  double distance_to_boundary(Point z) const noexcept;

  double green(Point z, Point w) const;
  double harmonic_part(Point z, Point w) const;
  double conformal_radius(Point z) const;

  /// E[Gamma_eps1(z) Gamma_eps2(w)] for the circle-average field.
  double circle_avg_cov(Point z, Point w, double eps1, double eps2) const;

  static constexpr double kCoincidentFloor = 1e-12;

 private:
  KernelEval(DomainKind kind, Point center, double scale);
  void require_inside(Point z) const;
  double harmonic_unchecked(Point z, Point w) const;

  DomainKind kind_;
  Point center_{0.0, 0.0};
  double scale_ = 1.0;
};

/// Average of -log max(|z - v|, eps1) over v on the circle |v - w| = eps2.
/// This equals the double circle average of -log|u - v|.
double log_kernel_circle_average(Point z, Point w, double eps1, double eps2, int nodes = 256);

struct MarkovSplit {
  Eigen::MatrixXd inner_cov;     // circle-average covariance of the zero-boundary field in the ball
  Eigen::MatrixXd harmonic_cov;  // covariance of the independent harmonic part
};

/// Markov decomposition Gamma = Gamma^B + Gamma_B for circle averages at radius eps
/// centered at pts inside the ball B(center, radius) of the unit disk.
MarkovSplit markov_split_cov(const KernelEval& ker, Point ball_center, double ball_radius,
                             std::span<const Point> pts, double eps);

}  // namespace gmclab
