#include "gmclab/domain.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "gmclab/error.hpp"
#include "gmclab/numerics.hpp"

namespace gmclab {

const char* domain_name(DomainKind kind) noexcept {
  return kind == DomainKind::UnitDisk ? "unit-disk" : "unit-square";
}

double bounding_side(DomainKind kind) noexcept { return kind == DomainKind::UnitDisk ? 2.0 : 1.0; }

Point bounding_origin(DomainKind kind) noexcept {
  return kind == DomainKind::UnitDisk ? Point{-1.0, -1.0} : Point{0.0, 0.0};
}

double distance_to_boundary(DomainKind kind, Point z) noexcept {
  if (kind == DomainKind::UnitDisk) return 1.0 - std::abs(z);
  return std::min({z.real(), 1.0 - z.real(), z.imag(), 1.0 - z.imag()});
}

// ---------------------------------------------------------------------------
// Grid

Grid::Grid(const DomainSpec& spec) : spec_(spec) {
  if (spec.grid_resolution < 1) fail(ErrorCode::InvalidArgument, "grid_resolution must be >= 1");
  if (!(spec.boundary_margin >= 0.0)) fail(ErrorCode::InvalidArgument, "boundary_margin must be >= 0");
  if (spec.window && !(spec.window->radius > 0.0))
    fail(ErrorCode::InvalidArgument, "window radius must be positive");
  const int n = spec.grid_resolution;
  h_ = bounding_side(spec.kind) / n;
  origin_ = bounding_origin(spec.kind);
  lookup_.assign(static_cast<std::size_t>(n) * n, -1);
  for (int row = 0; row < n; ++row) {
    for (int col = 0; col < n; ++col) {
      const Point z = cell_center(col, row);
      const double dist = distance_to_boundary(spec.kind, z);
      if (dist <= 0.0 || dist < spec.boundary_margin) continue;
      if (spec.window && std::abs(z - spec.window->center) > spec.window->radius) continue;
      lookup_[static_cast<std::size_t>(row) * n + col] = static_cast<std::ptrdiff_t>(points_.size());
      points_.push_back(z);
      cols_.push_back(col);
      rows_.push_back(row);
    }
  }
}

Point Grid::cell_center(int col, int row) const noexcept {
  return origin_ + Point{(col + 0.5) * h_, (row + 0.5) * h_};
}

std::ptrdiff_t Grid::index_of(int col, int row) const noexcept {
  const int n = spec_.grid_resolution;
  if (col < 0 || row < 0 || col >= n || row >= n) return -1;
  return lookup_[static_cast<std::size_t>(row) * n + col];
}

std::ptrdiff_t Grid::nearest(Point z) const noexcept {
  const Point local = (z - origin_) / h_;
  const double fc = std::floor(local.real());
  const double fr = std::floor(local.imag());
  if (!(fc >= 0.0 && fr >= 0.0 && fc < spec_.grid_resolution && fr < spec_.grid_resolution)) return -1;
  return index_of(static_cast<int>(fc), static_cast<int>(fr));
}

bool Grid::same_lattice(const Grid& other) const noexcept {
  return spec_.kind == other.spec_.kind && spec_.grid_resolution == other.spec_.grid_resolution &&
         cols_ == other.cols_ && rows_ == other.rows_;
}

// ---------------------------------------------------------------------------
// Square kernel through theta_1 with nome q = exp(-pi).

namespace {

constexpr int kThetaTerms = 12;

struct ThetaCoefficients {
  double c[kThetaTerms];  // (-1)^n q^{(n+1/2)^2}
  ThetaCoefficients() {
    for (int n = 0; n < kThetaTerms; ++n) {
      const double e = (n + 0.5) * (n + 0.5);
      c[n] = (n % 2 == 0 ? 1.0 : -1.0) * std::exp(-std::numbers::pi * e);
    }
  }
};

const ThetaCoefficients& theta_coefficients() {
  static const ThetaCoefficients coeffs;
  return coeffs;
}

// theta_1(pi zeta / 2)
std::complex<double> theta1_half_pi(std::complex<double> zeta) {
  const auto& k = theta_coefficients();
  const std::complex<double> u = 0.5 * std::numbers::pi * zeta;
  std::complex<double> sum = 0.0;
  for (int n = 0; n < kThetaTerms; ++n) sum += k.c[n] * std::sin(static_cast<double>(2 * n + 1) * u);
  return 2.0 * sum;
}

std::complex<double> sinc(std::complex<double> x) {
  if (std::abs(x) < 1e-4) {
    const std::complex<double> x2 = x * x;
    return 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
  }
  return std::sin(x) / x;
}

// theta_1(pi zeta / 2) / zeta, regular at zeta = 0.
std::complex<double> theta1_half_pi_over(std::complex<double> zeta) {
  const auto& k = theta_coefficients();
  const std::complex<double> u = 0.5 * std::numbers::pi * zeta;
  std::complex<double> sum = 0.0;
  for (int n = 0; n < kThetaTerms; ++n) {
    const double m = 2.0 * n + 1.0;
    sum += k.c[n] * m * sinc(m * u);
  }
  return std::numbers::pi * sum;
}

double square_harmonic(Point z, Point w) {
  const Point wb = std::conj(w);
  return -std::log(std::abs(theta1_half_pi_over(z - w))) - std::log(std::abs(theta1_half_pi(z + w))) +
         std::log(std::abs(theta1_half_pi(z - wb))) + std::log(std::abs(theta1_half_pi(z + wb)));
}

}  // namespace

// ---------------------------------------------------------------------------
// KernelEval

KernelEval::KernelEval(DomainKind kind) : kind_(kind) {}

KernelEval::KernelEval(DomainKind kind, Point center, double scale)
    : kind_(kind), center_(center), scale_(scale) {}

KernelEval KernelEval::sub_disk(Point center, double radius) {
  if (!(radius > 0.0)) fail(ErrorCode::InvalidArgument, "sub-disk radius must be positive");
  return KernelEval(DomainKind::UnitDisk, center, radius);
}

double KernelEval::distance_to_boundary(Point z) const noexcept {
  if (kind_ == DomainKind::UnitDisk) return scale_ - std::abs(z - center_);
  return gmclab::distance_to_boundary(kind_, z);
}

void KernelEval::require_inside(Point z) const {
  if (!(distance_to_boundary(z) > 0.0))
    fail(ErrorCode::OutOfDomain, "point (" + std::to_string(z.real()) + ", " + std::to_string(z.imag()) +
                                     ") is not interior to the domain");
}

double KernelEval::harmonic_unchecked(Point z, Point w) const {
  if (kind_ == DomainKind::UnitDisk) {
    const Point zs = (z - center_) / scale_;
    const Point ws = (w - center_) / scale_;
    return std::log(std::abs(1.0 - zs * std::conj(ws))) + std::log(scale_);
  }
  return square_harmonic(z, w);
}

double KernelEval::harmonic_part(Point z, Point w) const {
  require_inside(z);
  require_inside(w);
  return harmonic_unchecked(z, w);
}

double KernelEval::green(Point z, Point w) const {
  require_inside(z);
  require_inside(w);
  const double d = std::abs(z - w);
  if (d < kCoincidentFloor) fail(ErrorCode::CoincidentPoints, "green kernel is singular on the diagonal");
  if (kind_ == DomainKind::UnitDisk) {
    const Point zs = (z - center_) / scale_;
    const Point ws = (w - center_) / scale_;
    return std::log(std::abs(1.0 - zs * std::conj(ws)) / std::abs(zs - ws));
  }
  return -std::log(d) + square_harmonic(z, w);
}

double KernelEval::conformal_radius(Point z) const {
  require_inside(z);
  if (kind_ == DomainKind::UnitDisk) {
    const double r = std::abs(z - center_) / scale_;
    return scale_ * (1.0 - r * r);
  }
  return std::exp(square_harmonic(z, z));
}

double KernelEval::circle_avg_cov(Point z, Point w, double eps1, double eps2) const {
  if (!(eps1 >= 0.0 && eps2 >= 0.0)) fail(ErrorCode::InvalidArgument, "negative circle radius");
  require_inside(z);
  require_inside(w);
  if (distance_to_boundary(z) < eps1 || distance_to_boundary(w) < eps2)
    fail(ErrorCode::CircleLeavesDomain, "averaging circle is not contained in the domain");
  if (eps1 == 0.0 && eps2 == 0.0 && std::abs(z - w) < kCoincidentFloor)
    fail(ErrorCode::CoincidentPoints, "point covariance is singular on the diagonal");
  // g is harmonic in each argument, so its double circle average is its value at the centers.
  return log_kernel_circle_average(z, w, eps1, eps2) + harmonic_unchecked(z, w);
}

double log_kernel_circle_average(Point z, Point w, double eps1, double eps2, int nodes) {
  const double d = std::abs(z - w);
  if (eps2 == 0.0) return -std::log(std::max(d, eps1));
  if (eps1 == 0.0) return -std::log(std::max(d, eps2));
  if (d == 0.0) return -std::log(std::max(eps1, eps2));
  if (d >= eps1 + eps2) return -std::log(d);
  if (d + eps2 <= eps1) return -std::log(eps1);
  // Mean of -log|z - v| over the eps2-circle is -log max(d, eps2); subtract the
  // arc where |z - v| < eps1, on which the integrand is clamped to -log eps1.
  const double base = -std::log(std::max(d, eps2));
  const double c0 = (d * d + eps2 * eps2 - eps1 * eps1) / (2.0 * d * eps2);
  if (c0 >= 1.0) return base;
  const double alpha = std::acos(std::max(-1.0, c0));
  static thread_local int cached_nodes = 0;
  static thread_local QuadratureRule rule;
  if (cached_nodes != nodes) {
    rule = gauss_legendre(nodes);
    cached_nodes = nodes;
  }
  // t = alpha s^2 clusters nodes at t = 0, where the integrand has a log singularity when d = eps2.
  double acc = 0.0;
  for (int i = 0; i < nodes; ++i) {
    const double s = 0.5 * (rule.nodes[i] + 1.0);
    const double t = alpha * s * s;
    const double dist2 = std::max(d * d + eps2 * eps2 - 2.0 * d * eps2 * std::cos(t), 1e-300);
    const double integrand = std::log(eps1) - 0.5 * std::log(dist2);
    acc += rule.weights[i] * 0.5 * integrand * 2.0 * alpha * s;
  }
  // symmetric arc (-alpha, alpha) over the full period 2 pi
  return base - 2.0 * acc / (2.0 * std::numbers::pi);
}

MarkovSplit markov_split_cov(const KernelEval& ker, Point ball_center, double ball_radius,
                             std::span<const Point> pts, double eps) {
  if (ker.distance_to_boundary(ball_center) < ball_radius - 1e-15)
    fail(ErrorCode::NotNested, "ball is not contained in the domain");
  const KernelEval sub = KernelEval::sub_disk(ball_center, ball_radius);
  const auto n = static_cast<Eigen::Index>(pts.size());
  MarkovSplit split{Eigen::MatrixXd(n, n), Eigen::MatrixXd(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    if (sub.distance_to_boundary(pts[i]) < eps)
      fail(ErrorCode::NotNested, "averaging circle leaves the ball");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double inner = sub.circle_avg_cov(pts[i], pts[j], eps, eps);
      // G_D - G_B is harmonic in B; its circle averages are center values.
      const double harm = ker.harmonic_part(pts[i], pts[j]) - sub.harmonic_part(pts[i], pts[j]);
      split.inner_cov(i, j) = split.inner_cov(j, i) = inner;
      split.harmonic_cov(i, j) = split.harmonic_cov(j, i) = harm;
    }
  }
  if (n > 0) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(split.harmonic_cov, Eigen::EigenvaluesOnly);
    const double tol = 1e-8 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    if (es.eigenvalues().minCoeff() < -tol)
      fail(ErrorCode::NotPSD, "harmonic covariance has eigenvalue " + std::to_string(es.eigenvalues().minCoeff()));
  }
  return split;
}

}  // namespace gmclab
