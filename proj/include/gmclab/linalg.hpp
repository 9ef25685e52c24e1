#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace gmclab {

/// Lower Cholesky factor of a covariance matrix, stored packed by rows.
///
/// apply() computes L * xi for a batch of standard-normal vectors. Every
/// output entry is accumulated in ascending column order inside one SIMD
/// lane, so a replica's result does not depend on how many other replicas
/// share its batch.
class CholeskyFactor {
 public:
  CholeskyFactor() = default;

  /// Factorizes `cov` trying diagonal jitter 0, 1e-12, 1e-10, 1e-8 in turn.
  /// Throws FactorizationFailed when all of them fail.
  static CholeskyFactor factorize(Eigen::MatrixXd cov);

  std::size_t dim() const noexcept { return n_; }
  double jitter() const noexcept { return jitter_; }

  /// normals and out are laid out [row * count + replica].
  void apply(std::span<const double> normals, std::size_t count, std::span<double> out) const;

  /// Row i of L (length i + 1).
  std::span<const double> row(std::size_t i) const noexcept {
    return {packed_.data() + i * (i + 1) / 2, i + 1};
  }

 private:
  std::size_t n_ = 0;
  double jitter_ = 0.0;
  std::vector<double> packed_;
};

/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Eigen::MatrixXd& sym);

}  // namespace gmclab
