#include "gmclab/linalg.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <string>

#include "gmclab/error.hpp"

namespace gmclab {

namespace {

// Eight doubles per lane group; the same vector instructions run for every lane.
typedef double v8d __attribute__((vector_size(64)));

constexpr std::size_t kLanes = 8;
constexpr std::size_t kGroupsPerPass = 2;
constexpr std::size_t kRowBlock = 4;
constexpr std::size_t kPadLanes = kLanes * kGroupsPerPass;

inline v8d load(const double* p) {
  v8d v;
  std::memcpy(&v, p, sizeof(v));
  return v;
}

inline void store(double* p, v8d v) { std::memcpy(p, &v, sizeof(v)); }

inline v8d splat(double x) { return v8d{x, x, x, x, x, x, x, x}; }

}  // namespace

CholeskyFactor CholeskyFactor::factorize(Eigen::MatrixXd cov) {
  if (cov.rows() != cov.cols()) fail(ErrorCode::InvalidArgument, "covariance must be square");
  const std::array<double, 4> ladder{0.0, 1e-12, 1e-10, 1e-8};
  for (const double jitter : ladder) {
    Eigen::MatrixXd work = cov;
    if (jitter > 0.0) work.diagonal().array() += jitter;
    Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>> llt(work);
    if (llt.info() != Eigen::Success) continue;
    CholeskyFactor f;
    f.n_ = static_cast<std::size_t>(cov.rows());
    f.jitter_ = jitter;
    f.packed_.resize(f.n_ * (f.n_ + 1) / 2);
    for (std::size_t i = 0; i < f.n_; ++i) {
      double* dst = f.packed_.data() + i * (i + 1) / 2;
      for (std::size_t j = 0; j <= i; ++j)
        dst[j] = work(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    return f;
  }
  fail(ErrorCode::FactorizationFailed,
       "covariance of dimension " + std::to_string(cov.rows()) + " is not positive definite after jitter 1e-8");
}

void CholeskyFactor::apply(std::span<const double> normals, std::size_t count, std::span<double> out) const {
  if (normals.size() != n_ * count || out.size() != n_ * count)
    fail(ErrorCode::InvalidArgument, "CholeskyFactor::apply size mismatch");
  if (count == 0 || n_ == 0) return;
  const std::size_t lanes = (count + kPadLanes - 1) / kPadLanes * kPadLanes;
  std::vector<double> x(n_ * lanes, 0.0);
  for (std::size_t k = 0; k < n_; ++k)
    std::copy_n(normals.data() + k * count, count, x.data() + k * lanes);

  std::vector<double> y(n_ * lanes, 0.0);
  for (std::size_t i0 = 0; i0 < n_; i0 += kRowBlock) {
    const std::size_t rows = std::min(kRowBlock, n_ - i0);
    const double* lrow[kRowBlock];
    for (std::size_t r = 0; r < kRowBlock; ++r) {
      const std::size_t i = std::min(i0 + r, n_ - 1);
      lrow[r] = packed_.data() + i * (i + 1) / 2;
    }
    for (std::size_t lane0 = 0; lane0 < lanes; lane0 += kPadLanes) {
      v8d acc[kRowBlock][kGroupsPerPass];
      for (auto& a : acc)
        for (auto& g : a) g = splat(0.0);
      // columns shared by every row of the block
      for (std::size_t k = 0; k <= i0; ++k) {
        const double* xk = x.data() + k * lanes + lane0;
        const v8d x0 = load(xk);
        const v8d x1 = load(xk + kLanes);
        for (std::size_t r = 0; r < kRowBlock; ++r) {
          const v8d l = splat(lrow[r][k]);
          acc[r][0] += l * x0;
          acc[r][1] += l * x1;
        }
      }
      // triangular remainder, still ascending in k for each row
      for (std::size_t r = 1; r < rows; ++r) {
        for (std::size_t k = i0 + 1; k <= i0 + r; ++k) {
          const double* xk = x.data() + k * lanes + lane0;
          const v8d l = splat(lrow[r][k]);
          acc[r][0] += l * load(xk);
          acc[r][1] += l * load(xk + kLanes);
        }
      }
      for (std::size_t r = 0; r < rows; ++r) {
        double* yr = y.data() + (i0 + r) * lanes + lane0;
        store(yr, acc[r][0]);
        store(yr + kLanes, acc[r][1]);
      }
    }
  }
  for (std::size_t i = 0; i < n_; ++i) std::copy_n(y.data() + i * lanes, count, out.data() + i * count);
}

double min_eigenvalue(const Eigen::MatrixXd& sym) {
  if (sym.rows() == 0) return 0.0;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace gmclab
