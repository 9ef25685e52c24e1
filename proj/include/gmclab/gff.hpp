#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gmclab/domain.hpp"
#include "gmclab/linalg.hpp"

namespace gmclab {

enum class SchemeKind { CholeskyCircleAvg, EigenTruncation };

const char* scheme_name(SchemeKind kind) noexcept;

struct Scheme {
  SchemeKind kind = SchemeKind::CholeskyCircleAvg;
  double eps = 0.0;  // circle-average radius; 0 means raw truncated series (eigen only)
  int n_modes = 0;   // modes per axis (eigen only)
};

struct SamplerConfig {
  Scheme scheme;
  DomainSpec domain;
  std::uint64_t master_seed = 0;
};

/// Dirichlet sine basis of the unit square with circle-average damping.
///
/// Mode (j,k): e = 2 sin(j pi x) sin(k pi y), lambda = pi^2 (j^2 + k^2),
/// amplitude scale c = sqrt(2 pi / lambda). The circle average of e over a
/// circle of radius r is J0(sqrt(lambda) r) e(center).
class EigenBasis {
 public:
  explicit EigenBasis(int n_modes);

  int modes() const noexcept { return n_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(n_) * n_; }
  double lambda(int j, int k) const noexcept;
  double scale(int j, int k) const noexcept;

  /// c_jk J0(sqrt(lambda_jk) r), indexed (j-1) * n + (k-1). Cached per radius.
  std::shared_ptr<const std::vector<double>> weights(double r) const;

  /// sum_jk a_jk c_jk J0(sqrt(lambda) r) e_jk(z)
  double evaluate(std::span<const double> amplitudes, Point z, double r) const;

  /// Covariance of the circle averages at (z, r1) and (w, r2).
  double covariance(Point z, double r1, Point w, double r2) const;

  /// sqrt(2) sin(j pi t) for j = 1..n.
  void sine_row(double t, std::span<double> out) const;

 private:
  int n_;
  mutable std::mutex mutex_;
  mutable std::map<double, std::shared_ptr<const std::vector<double>>> cache_;
};

/// A realized approximate GFF on the retained cells of a grid.
struct FieldSample {
  std::shared_ptr<const Grid> grid;
  std::vector<double> values;
  std::shared_ptr<const std::vector<double>> variances;
  Scheme scheme;
  std::uint64_t replica_index = 0;
  std::uint64_t seed_used = 0;
  // Eigen scheme only: mode amplitudes (standard normals plus covariance-shaped
  // shifts). Cleared by a generic Cameron-Martin shift.
  std::shared_ptr<const EigenBasis> basis;
  std::vector<double> amplitudes;
};

/// Exact sampler of the circle-average field at a fixed list of (center, radius)
/// probes, through one dense Cholesky factorization of their joint covariance.
class JointCircleSampler {
 public:
  struct Probe {
    Point z;
    double radius;
  };

  JointCircleSampler(const KernelEval& kernel, std::vector<Probe> probes, std::uint64_t master_seed);

  std::size_t size() const noexcept { return probes_.size(); }
  const std::vector<Probe>& probes() const noexcept { return probes_; }
  const KernelEval& kernel() const noexcept { return kernel_; }
  double jitter() const noexcept { return factor_.jitter(); }
  /// Covariance actually sampled (kernel plus factorization jitter on the diagonal).
  double covariance(std::size_t i, std::size_t j) const;
  const Eigen::MatrixXd& covariance_matrix() const noexcept { return cov_; }
  double variance(std::size_t i) const { return variances_[i]; }
  std::span<const double> variances() const noexcept { return variances_; }

  /// Values for replicas [first, first + count), laid out out[probe * count + r].
  void sample_values(std::uint64_t first, std::size_t count, std::span<double> out) const;
  std::vector<double> sample(std::uint64_t replica) const;

 private:
  KernelEval kernel_;
  std::vector<Probe> probes_;
  std::uint64_t master_seed_;
  std::vector<double> variances_;
  Eigen::MatrixXd cov_;
  CholeskyFactor factor_;
};

class FieldSampler {
 public:
  explicit FieldSampler(const SamplerConfig& cfg);

  const SamplerConfig& config() const noexcept { return cfg_; }
  const Grid& grid() const noexcept { return *grid_; }
  std::shared_ptr<const Grid> grid_ptr() const noexcept { return grid_; }
  const KernelEval& kernel() const noexcept { return kernel_; }
  std::span<const double> variances() const noexcept { return *variances_; }
  const EigenBasis* basis() const noexcept { return basis_.get(); }

  FieldSample sample(std::uint64_t replica) const;

  /// Field values for replicas [first, first + count), out[cell * count + r].
  /// Bit-identical to the values of sample(first + r).
  void sample_values(std::uint64_t first, std::size_t count, std::span<double> out) const;

  /// Exact covariance of the sampler between retained cells i and j.
  double covariance(std::size_t i, std::size_t j) const;
  /// Row i of the sampler covariance over all retained cells.
  std::vector<double> covariance_row(std::size_t i) const;

  /// Cameron-Martin shift by weight * C(root, .), the sampler's own covariance.
  FieldSample shift_by_covariance(const FieldSample& field, std::size_t root, double weight) const;

  /// Eigen scheme: circle averages at radius r on every retained cell.
  std::vector<double> grid_circle_average(const FieldSample& field, double r) const;

 private:
  void eigen_grid_values(std::span<const double> amplitudes, double r, std::span<double> out) const;

  SamplerConfig cfg_;
  std::shared_ptr<const Grid> grid_;
  KernelEval kernel_;
  std::shared_ptr<const std::vector<double>> variances_;
  std::unique_ptr<JointCircleSampler> joint_;
  std::shared_ptr<const EigenBasis> basis_;
  // eigen scheme: sqrt(2) sin(j pi t) over the bounding columns/rows of retained cells
  int col0_ = 0, row0_ = 0;
  Eigen::MatrixXd sine_cols_, sine_rows_;
};

/// Circle average of a realized field. Eigen scheme: exact mode-wise for any
/// radius. Cholesky scheme: only the scheme radius, read at the nearest cell.
double circle_average_eval(const FieldSample& field, Point z, double eps);

/// Returns a copy with values(z) += shift(z). Variances are unchanged.
FieldSample cameron_martin_shift(const FieldSample& field, const std::function<double(Point)>& shift);

/// Binary dump: one JSON header line, then little-endian float64 values over
/// the full lattice in row-major order (NaN on cells that are not retained).
void write_field_dump(const std::string& path, const FieldSample& field);

struct FieldDump {
  std::string header_json;
  int rows = 0;
  int cols = 0;
  std::vector<double> lattice;
};
FieldDump read_field_dump(const std::string& path);

}  // namespace gmclab
