#include "gmclab/gff.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>

#include "gmclab/error.hpp"
#include "gmclab/numerics.hpp"
#include "json.hpp"

namespace gmclab {

const char* scheme_name(SchemeKind kind) noexcept {
  return kind == SchemeKind::CholeskyCircleAvg ? "cholesky-circle-average" : "eigen-truncation";
}

// ---------------------------------------------------------------------------
// EigenBasis

EigenBasis::EigenBasis(int n_modes) : n_(n_modes) {
  if (n_modes < 1) fail(ErrorCode::InvalidArgument, "n_modes must be >= 1");
}

double EigenBasis::lambda(int j, int k) const noexcept {
  return std::numbers::pi * std::numbers::pi * (static_cast<double>(j) * j + static_cast<double>(k) * k);
}

double EigenBasis::scale(int j, int k) const noexcept { return std::sqrt(2.0 * std::numbers::pi / lambda(j, k)); }

std::shared_ptr<const std::vector<double>> EigenBasis::weights(double r) const {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    if (auto it = cache_.find(r); it != cache_.end()) return it->second;
  }
  auto w = std::make_shared<std::vector<double>>(size());
  for (int j = 1; j <= n_; ++j) {
    for (int k = 1; k <= n_; ++k) {
      const double lam = lambda(j, k);
      (*w)[static_cast<std::size_t>(j - 1) * n_ + (k - 1)] =
          std::sqrt(2.0 * std::numbers::pi / lam) * (r > 0.0 ? bessel_j0(std::sqrt(lam) * r) : 1.0);
    }
  }
  std::lock_guard<std::mutex> lock(mutex_);
  auto [it, inserted] = cache_.emplace(r, std::move(w));
  return it->second;
}

void EigenBasis::sine_row(double t, std::span<double> out) const {
  for (int j = 1; j <= n_; ++j) out[j - 1] = std::numbers::sqrt2 * std::sin(j * std::numbers::pi * t);
}

double EigenBasis::evaluate(std::span<const double> amplitudes, Point z, double r) const {
  if (amplitudes.size() != size()) fail(ErrorCode::InvalidArgument, "amplitude vector has wrong length");
  const auto w = weights(r);
  std::vector<double> sx(n_), sy(n_);
  sine_row(z.real(), sx);
  sine_row(z.imag(), sy);
  double total = 0.0;
  for (int j = 0; j < n_; ++j) {
    double inner = 0.0;
    const std::size_t base = static_cast<std::size_t>(j) * n_;
    for (int k = 0; k < n_; ++k) inner += amplitudes[base + k] * (*w)[base + k] * sy[k];
    total += sx[j] * inner;
  }
  return total;
}

double EigenBasis::covariance(Point z, double r1, Point w, double r2) const {
  const auto w1 = weights(r1);
  const auto w2 = weights(r2);
  std::vector<double> zx(n_), zy(n_), wx(n_), wy(n_);
  sine_row(z.real(), zx);
  sine_row(z.imag(), zy);
  sine_row(w.real(), wx);
  sine_row(w.imag(), wy);
  double total = 0.0;
  for (int j = 0; j < n_; ++j) {
    double inner = 0.0;
    const std::size_t base = static_cast<std::size_t>(j) * n_;
    for (int k = 0; k < n_; ++k) inner += (*w1)[base + k] * (*w2)[base + k] * zy[k] * wy[k];
    total += zx[j] * wx[j] * inner;
  }
  return total;
}

// ---------------------------------------------------------------------------
// JointCircleSampler

JointCircleSampler::JointCircleSampler(const KernelEval& kernel, std::vector<Probe> probes,
                                       std::uint64_t master_seed)
    : kernel_(kernel), probes_(std::move(probes)), master_seed_(master_seed) {
  const auto n = static_cast<Eigen::Index>(probes_.size());
  if (n == 0) fail(ErrorCode::InvalidArgument, "joint sampler needs at least one probe");
  Eigen::MatrixXd cov(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double c = kernel_.circle_avg_cov(probes_[i].z, probes_[j].z, probes_[i].radius, probes_[j].radius);
      cov(i, j) = c;
      cov(j, i) = c;
    }
  }
  factor_ = CholeskyFactor::factorize(cov);
  cov.diagonal().array() += factor_.jitter();
  variances_.resize(probes_.size());
  for (Eigen::Index i = 0; i < n; ++i) variances_[i] = cov(i, i);
  cov_ = std::move(cov);
}

double JointCircleSampler::covariance(std::size_t i, std::size_t j) const {
  return cov_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
}

void JointCircleSampler::sample_values(std::uint64_t first, std::size_t count, std::span<double> out) const {
  const std::size_t n = probes_.size();
  std::vector<double> normals(n * count);
  std::vector<double> column(n);
  for (std::size_t r = 0; r < count; ++r) {
    Rng rng(replica_seed(master_seed_, first + r));
    fill_standard_normal(rng, column);
    for (std::size_t k = 0; k < n; ++k) normals[k * count + r] = column[k];
  }
  factor_.apply(normals, count, out);
}

std::vector<double> JointCircleSampler::sample(std::uint64_t replica) const {
  std::vector<double> out(probes_.size());
  sample_values(replica, 1, out);
  return out;
}

// ---------------------------------------------------------------------------
// FieldSampler

FieldSampler::FieldSampler(const SamplerConfig& cfg)
    : cfg_(cfg), grid_(std::make_shared<Grid>(cfg.domain)), kernel_(cfg.domain.kind) {
  const Scheme& s = cfg_.scheme;
  if (!(s.eps >= 0.0)) fail(ErrorCode::InvalidArgument, "scheme eps must be >= 0");
  if (grid_->size() == 0) fail(ErrorCode::InvalidArgument, "domain retains no grid cells");
  if (s.eps > cfg_.domain.boundary_margin + 1e-15)
    fail(ErrorCode::InvalidArgument, "scheme eps exceeds the boundary margin");

  if (s.kind == SchemeKind::CholeskyCircleAvg) {
    if (!(s.eps > 0.0)) fail(ErrorCode::InvalidArgument, "circle-average scheme needs eps > 0");
    std::vector<JointCircleSampler::Probe> probes;
    probes.reserve(grid_->size());
    for (const Point z : grid_->points()) probes.push_back({z, s.eps});
    joint_ = std::make_unique<JointCircleSampler>(kernel_, std::move(probes), cfg_.master_seed);
    variances_ = std::make_shared<const std::vector<double>>(joint_->variances().begin(), joint_->variances().end());
    return;
  }

  if (cfg_.domain.kind != DomainKind::UnitSquare)
    fail(ErrorCode::UnsupportedScheme, "eigen truncation is implemented on the unit square");
  basis_ = std::make_shared<EigenBasis>(s.n_modes);
  const int n = s.n_modes;
  int col1 = 0, row1 = 0;
  col0_ = grid_->side_cells();
  row0_ = grid_->side_cells();
  for (std::size_t i = 0; i < grid_->size(); ++i) {
    col0_ = std::min(col0_, grid_->column(i));
    row0_ = std::min(row0_, grid_->row(i));
    col1 = std::max(col1, grid_->column(i));
    row1 = std::max(row1, grid_->row(i));
  }
  const double h = grid_->spacing();
  sine_cols_.resize(col1 - col0_ + 1, n);
  sine_rows_.resize(row1 - row0_ + 1, n);
  std::vector<double> buf(n);
  for (int c = col0_; c <= col1; ++c) {
    basis_->sine_row((c + 0.5) * h, buf);
    for (int j = 0; j < n; ++j) sine_cols_(c - col0_, j) = buf[j];
  }
  for (int r = row0_; r <= row1; ++r) {
    basis_->sine_row((r + 0.5) * h, buf);
    for (int j = 0; j < n; ++j) sine_rows_(r - row0_, j) = buf[j];
  }
  // Var = sum_jk (c J0)^2 sx_j^2 sy_k^2
  const auto w = basis_->weights(s.eps);
  Eigen::MatrixXd w2(n, n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) w2(j, k) = (*w)[static_cast<std::size_t>(j) * n + k] * (*w)[static_cast<std::size_t>(j) * n + k];
  const Eigen::MatrixXd var = sine_cols_.cwiseAbs2() * w2 * sine_rows_.cwiseAbs2().transpose();
  auto v = std::make_shared<std::vector<double>>(grid_->size());
  for (std::size_t i = 0; i < grid_->size(); ++i) (*v)[i] = var(grid_->column(i) - col0_, grid_->row(i) - row0_);
  variances_ = std::move(v);
}

void FieldSampler::eigen_grid_values(std::span<const double> amplitudes, double r, std::span<double> out) const {
  const int n = basis_->modes();
  const auto w = basis_->weights(r);
  Eigen::MatrixXd a(n, n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      const std::size_t idx = static_cast<std::size_t>(j) * n + k;
      a(j, k) = amplitudes[idx] * (*w)[idx];
    }
  const Eigen::MatrixXd tmp = sine_cols_ * a;
  const Eigen::MatrixXd m = tmp * sine_rows_.transpose();
  for (std::size_t i = 0; i < grid_->size(); ++i) out[i] = m(grid_->column(i) - col0_, grid_->row(i) - row0_);
}

FieldSample FieldSampler::sample(std::uint64_t replica) const {
  FieldSample f;
  f.grid = grid_;
  f.variances = variances_;
  f.scheme = cfg_.scheme;
  f.replica_index = replica;
  f.seed_used = replica_seed(cfg_.master_seed, replica);
  f.values.resize(grid_->size());
  if (joint_) {
    joint_->sample_values(replica, 1, f.values);
    return f;
  }
  f.basis = basis_;
  f.amplitudes.resize(basis_->size());
  Rng rng(f.seed_used);
  fill_standard_normal(rng, f.amplitudes);
  eigen_grid_values(f.amplitudes, cfg_.scheme.eps, f.values);
  return f;
}

void FieldSampler::sample_values(std::uint64_t first, std::size_t count, std::span<double> out) const {
  if (out.size() != grid_->size() * count) fail(ErrorCode::InvalidArgument, "sample_values size mismatch");
  if (joint_) {
    joint_->sample_values(first, count, out);
    return;
  }
  for (std::size_t r = 0; r < count; ++r) {
    const FieldSample f = sample(first + r);
    for (std::size_t i = 0; i < f.values.size(); ++i) out[i * count + r] = f.values[i];
  }
}

double FieldSampler::covariance(std::size_t i, std::size_t j) const {
  if (joint_) return joint_->covariance(i, j);
  const double eps = cfg_.scheme.eps;
  return basis_->covariance(grid_->point(i), eps, grid_->point(j), eps);
}

std::vector<double> FieldSampler::covariance_row(std::size_t i) const {
  std::vector<double> row(grid_->size());
  if (joint_) {
    const auto col = joint_->covariance_matrix().col(static_cast<Eigen::Index>(i));
    std::copy(col.data(), col.data() + col.size(), row.begin());
    return row;
  }
  const int n = basis_->modes();
  const auto w = basis_->weights(cfg_.scheme.eps);
  std::vector<double> sx(n), sy(n), v(basis_->size());
  basis_->sine_row(grid_->point(i).real(), sx);
  basis_->sine_row(grid_->point(i).imag(), sy);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      const std::size_t idx = static_cast<std::size_t>(j) * n + k;
      v[idx] = (*w)[idx] * sx[j] * sy[k];
    }
  eigen_grid_values(v, cfg_.scheme.eps, row);
  return row;
}

FieldSample FieldSampler::shift_by_covariance(const FieldSample& field, std::size_t root, double weight) const {
  if (!field.grid || !field.grid->same_lattice(*grid_)) fail(ErrorCode::MismatchedGrids, "field is not on this sampler's grid");
  FieldSample out = field;
  if (weight == 0.0) return out;
  if (joint_) {
    const double* col = joint_->covariance_matrix().col(static_cast<Eigen::Index>(root)).data();
    for (std::size_t j = 0; j < out.values.size(); ++j) out.values[j] += weight * col[j];
    return out;
  }
  const int n = basis_->modes();
  const auto w = basis_->weights(cfg_.scheme.eps);
  std::vector<double> sx(n), sy(n), delta(basis_->size());
  basis_->sine_row(grid_->point(root).real(), sx);
  basis_->sine_row(grid_->point(root).imag(), sy);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      const std::size_t idx = static_cast<std::size_t>(j) * n + k;
      delta[idx] = weight * (*w)[idx] * sx[j] * sy[k];
    }
  std::vector<double> add(grid_->size());
  eigen_grid_values(delta, cfg_.scheme.eps, add);
  for (std::size_t j = 0; j < add.size(); ++j) out.values[j] += add[j];
  if (!out.amplitudes.empty())
    for (std::size_t m = 0; m < delta.size(); ++m) out.amplitudes[m] += delta[m];
  return out;
}

std::vector<double> FieldSampler::grid_circle_average(const FieldSample& field, double r) const {
  if (!basis_) {
    if (r == cfg_.scheme.eps) return field.values;
    fail(ErrorCode::UnsupportedRadius, "circle-average scheme only provides its own radius");
  }
  if (field.amplitudes.empty()) {
    if (r == cfg_.scheme.eps) return field.values;
    fail(ErrorCode::UnsupportedRadius, "field lost its modal representation");
  }
  if (cfg_.domain.boundary_margin < r - 1e-15)
    fail(ErrorCode::CircleLeavesDomain, "radius exceeds the boundary margin");
  std::vector<double> out(grid_->size());
  eigen_grid_values(field.amplitudes, r, out);
  return out;
}

// ---------------------------------------------------------------------------
// Free functions

double circle_average_eval(const FieldSample& field, Point z, double eps) {
  if (!field.grid) fail(ErrorCode::InvalidArgument, "empty field sample");
  const DomainKind kind = field.grid->spec().kind;
  if (!(eps >= 0.0)) fail(ErrorCode::InvalidArgument, "negative radius");
  if (distance_to_boundary(kind, z) < eps || distance_to_boundary(kind, z) <= 0.0)
    fail(ErrorCode::CircleLeavesDomain, "averaging circle is not contained in the domain");
  if (field.scheme.kind == SchemeKind::EigenTruncation && !field.amplitudes.empty())
    return field.basis->evaluate(field.amplitudes, z, eps);
  if (eps != field.scheme.eps) fail(ErrorCode::UnsupportedRadius, "only the scheme radius is available for this field");
  const std::ptrdiff_t idx = field.grid->nearest(z);
  if (idx < 0) fail(ErrorCode::OutOfDomain, "point is not in a retained grid cell");
  return field.values[static_cast<std::size_t>(idx)];
}

FieldSample cameron_martin_shift(const FieldSample& field, const std::function<double(Point)>& shift) {
  FieldSample out = field;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const double s = shift(field.grid->point(i));
    if (!std::isfinite(s)) fail(ErrorCode::NonFiniteShift, "shift is not finite at grid point " + std::to_string(i));
    out.values[i] += s;
  }
  out.amplitudes.clear();
  return out;
}

namespace {

void put_le(std::ostream& os, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  char bytes[8];
  std::memcpy(bytes, &bits, 8);
  os.write(bytes, 8);
}

double get_le(std::istream& is) {
  char bytes[8];
  is.read(bytes, 8);
  std::uint64_t bits;
  std::memcpy(&bits, bytes, 8);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  return std::bit_cast<double>(bits);
}

}  // namespace

void write_field_dump(const std::string& path, const FieldSample& field) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorCode::IoError, "cannot open " + path);
  const Grid& g = *field.grid;
  const int n = g.side_cells();
  nlohmann::ordered_json header;
  header["scheme"] = scheme_name(field.scheme.kind);
  header["eps"] = field.scheme.eps;
  header["n_modes"] = field.scheme.n_modes;
  header["seed"] = field.seed_used;
  header["replica"] = field.replica_index;
  header["grid"] = {{"domain", domain_name(g.spec().kind)},
                    {"resolution", n},
                    {"boundary_margin", g.spec().boundary_margin},
                    {"rows", n},
                    {"cols", n}};
  os << header.dump() << '\n';
  for (int row = 0; row < n; ++row)
    for (int col = 0; col < n; ++col) {
      const std::ptrdiff_t idx = g.index_of(col, row);
      put_le(os, idx < 0 ? std::numeric_limits<double>::quiet_NaN() : field.values[static_cast<std::size_t>(idx)]);
    }
  if (!os) fail(ErrorCode::IoError, "write failed for " + path);
}

FieldDump read_field_dump(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::IoError, "cannot open " + path);
  FieldDump dump;
  std::getline(is, dump.header_json);
  const auto header = nlohmann::json::parse(dump.header_json);
  dump.rows = header.at("grid").at("rows").get<int>();
  dump.cols = header.at("grid").at("cols").get<int>();
  dump.lattice.resize(static_cast<std::size_t>(dump.rows) * dump.cols);
  for (double& v : dump.lattice) v = get_le(is);
  if (!is) fail(ErrorCode::IoError, "truncated field dump " + path);
  return dump;
}

}  // namespace gmclab
