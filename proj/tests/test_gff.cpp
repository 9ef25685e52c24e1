#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "doctest.h"
#include "gmclab/error.hpp"
#include "gmclab/gff.hpp"
#include "gmclab/numerics.hpp"

using namespace gmclab;
using std::numbers::pi;

namespace {

SamplerConfig disk_config(int res, double eps, double margin, std::uint64_t seed = 1) {
  SamplerConfig c;
  c.scheme = {SchemeKind::CholeskyCircleAvg, eps, 0};
  c.domain = {DomainKind::UnitDisk, res, margin, std::nullopt};
  c.master_seed = seed;
  return c;
}

SamplerConfig square_config(int res, double eps, int modes, double margin, std::uint64_t seed = 1) {
  SamplerConfig c;
  c.scheme = {SchemeKind::EigenTruncation, eps, modes};
  c.domain = {DomainKind::UnitSquare, res, margin, std::nullopt};
  c.master_seed = seed;
  return c;
}

// 2 pi sum over the modes in [lo, hi)^2 minus [1, lo)^2 of e_jk(z)^2 / lambda_jk
double eigen_sum_variance(Point z, int n) {
  double acc = 0.0;
  for (int j = 1; j <= n; ++j)
    for (int k = 1; k <= n; ++k) {
      const double e = 2.0 * std::sin(j * pi * z.real()) * std::sin(k * pi * z.imag());
      acc += e * e / (pi * pi * (j * j + k * k));
    }
  return 2.0 * pi * acc;
}

struct Moments {
  double mean = 0, var = 0;
};

Moments moments_of(const std::vector<double>& x) {
  Moments m;
  for (double v : x) m.mean += v;
  m.mean /= x.size();
  for (double v : x) m.var += (v - m.mean) * (v - m.mean);
  m.var /= (x.size() - 1);
  return m;
}

}  // namespace

TEST_CASE("disk circle average at the center has variance log 10") {
  const KernelEval k(DomainKind::UnitDisk);
  const JointCircleSampler js(k, {{{0.0, 0.0}, 0.1}, {{0.3, 0.2}, 0.1}}, 42);
  const std::size_t n = 10000;
  std::vector<double> out(2 * n);
  js.sample_values(0, n, out);
  const std::vector<double> x(out.begin(), out.begin() + n);
  const Moments m = moments_of(x);
  const double var_se = std::sqrt(2.0 / (n - 1)) * m.var;
  CHECK(std::abs(m.var - std::log(10.0)) <= 3.0 * var_se);
  CHECK(std::abs(m.mean) <= 4.0 * std::sqrt(m.var / n));
  CHECK(js.variance(0) == doctest::Approx(std::log(10.0)).epsilon(1e-14));
}

TEST_CASE("cholesky field: centered, exact variances, reproducible") {
  const FieldSampler s(disk_config(16, 0.1, 0.2, 7));
  const KernelEval k(DomainKind::UnitDisk);
  for (std::size_t i = 0; i < s.grid().size(); ++i) {
    const Point z = s.grid().point(i);
    CHECK(s.variances()[i] == doctest::Approx(-std::log(0.1) + std::log(k.conformal_radius(z))).epsilon(1e-13));
    CHECK(s.variances()[i] > 0.0);
  }
  const std::size_t n = 10000, cells = s.grid().size();
  std::vector<double> out(cells * n);
  s.sample_values(0, n, out);
  int bad = 0;
  for (std::size_t i = 0; i < cells; ++i) {
    const std::vector<double> x(out.begin() + i * n, out.begin() + (i + 1) * n);
    const Moments m = moments_of(x);
    if (std::abs(m.mean) > 4.0 * std::sqrt(s.variances()[i] / n)) ++bad;
  }
  CHECK(bad == 0);

  // bit-identical across calls and batch sizes
  const FieldSample a = s.sample(123), b = s.sample(123);
  CHECK(a.values == b.values);
  CHECK(a.seed_used == replica_seed(7, 123));
  std::vector<double> batch(cells * 37);
  s.sample_values(100, 37, batch);
  for (std::size_t i = 0; i < cells; ++i) CHECK(batch[i * 37 + 23] == a.values[i]);
}

TEST_CASE("cholesky field: empirical covariance matches the kernel") {
  const KernelEval k(DomainKind::UnitDisk);
  const std::vector<JointCircleSampler::Probe> probes{
      {{0.0, 0.0}, 0.05}, {{0.08, 0.0}, 0.05}, {{0.3, -0.2}, 0.05}, {{-0.5, 0.4}, 0.05}, {{0.1, 0.65}, 0.05}};
  const JointCircleSampler js(k, probes, 99);
  const std::size_t n = 20000;
  std::vector<double> out(probes.size() * n);
  js.sample_values(0, n, out);
  const std::pair<int, int> pairs[] = {{0, 1}, {0, 2}, {1, 3}, {2, 4}, {3, 4}};
  for (const auto& [i, j] : pairs) {
    double s = 0, s2 = 0;
    for (std::size_t r = 0; r < n; ++r) {
      const double p = out[i * n + r] * out[j * n + r];
      s += p;
      s2 += p * p;
    }
    const double mean = s / n;
    const double se = std::sqrt((s2 / n - mean * mean) / n);
    CHECK(std::abs(mean - k.circle_avg_cov(probes[i].z, probes[j].z, 0.05, 0.05)) <= 3.0 * se);
  }
}

TEST_CASE("Markov split: empirical covariance minus inner covariance is the harmonic part") {
  const KernelEval k(DomainKind::UnitDisk);
  const std::vector<Point> pts{{0.1, 0.0}, {-0.1, 0.05}, {0.0, -0.15}};
  std::vector<JointCircleSampler::Probe> probes;
  for (const Point z : pts) probes.push_back({z, 0.05});
  const JointCircleSampler js(k, probes, 5);
  const auto split = markov_split_cov(k, 0.0, 0.4, pts, 0.05);
  const std::size_t n = 20000;
  std::vector<double> out(pts.size() * n);
  js.sample_values(0, n, out);
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      double s = 0, s2 = 0;
      for (std::size_t r = 0; r < n; ++r) {
        const double p = out[i * n + r] * out[j * n + r];
        s += p;
        s2 += p * p;
      }
      const double mean = s / n;
      const double se = std::sqrt((s2 / n - mean * mean) / n);
      CHECK(std::abs(mean - split.inner_cov(i, j) - split.harmonic_cov(i, j)) <= 3.0 * se);
    }
}

TEST_CASE("eigen scheme variance increments match the direct eigen-sum") {
  const Point z{0.5, 0.5};
  for (const int n : {4, 8, 16}) {
    const EigenBasis b1(n), b2(2 * n);
    const double inc = b2.covariance(z, 0.0, z, 0.0) - b1.covariance(z, 0.0, z, 0.0);
    CHECK(inc == doctest::Approx(eigen_sum_variance(z, 2 * n) - eigen_sum_variance(z, n)).epsilon(1e-12));
  }
  // sampler variances use the same expansion
  const FieldSampler s(square_config(8, 0.0, 12, 0.0));
  for (std::size_t i = 0; i < s.grid().size(); ++i)
    CHECK(s.variances()[i] == doctest::Approx(eigen_sum_variance(s.grid().point(i), 12)).epsilon(1e-12));
}

TEST_CASE("log 2 increments for both schemes") {
  const KernelEval disk(DomainKind::UnitDisk);
  CHECK(disk.circle_avg_cov(0.1, 0.1, 0.05, 0.05) - disk.circle_avg_cov(0.1, 0.1, 0.1, 0.1) ==
        doctest::Approx(std::log(2.0)));
  const EigenBasis b(256);
  const Point c{0.5, 0.5};
  const double inc = b.covariance(c, 0.05, c, 0.05) - b.covariance(c, 0.1, c, 0.1);
  CHECK(std::abs(inc - std::log(2.0)) <= 0.05);
  // truncated variance approaches the exact circle-average variance
  const KernelEval sq(DomainKind::UnitSquare);
  CHECK(std::abs(b.covariance(c, 0.05, c, 0.05) - sq.circle_avg_cov(c, c, 0.05, 0.05)) <= 0.05);
}

TEST_CASE("eigen circle average of a single mode") {
  const EigenBasis b(3);
  std::vector<double> amps(b.size(), 0.0);
  amps[0] = 1.0;
  const Point z{0.4, 0.55};
  const double eps = 0.1;
  double quad = 0.0;
  const int nodes = 4096;
  for (int i = 0; i < nodes; ++i) {
    const Point u = z + std::polar(eps, 2.0 * pi * i / nodes);
    quad += b.scale(1, 1) * 2.0 * std::sin(pi * u.real()) * std::sin(pi * u.imag());
  }
  quad /= nodes;
  const double closed = std::cyl_bessel_j(0.0, std::sqrt(2.0) * pi * eps) * b.scale(1, 1) * 2.0 *
                        std::sin(pi * z.real()) * std::sin(pi * z.imag());
  CHECK(b.evaluate(amps, z, eps) == doctest::Approx(closed).epsilon(1e-12));
  CHECK(b.evaluate(amps, z, eps) == doctest::Approx(quad).epsilon(1e-12));
  // eps = 0 is the pointwise value
  CHECK(b.evaluate(amps, z, 0.0) ==
        doctest::Approx(b.scale(1, 1) * 2.0 * std::sin(pi * z.real()) * std::sin(pi * z.imag())));
}

TEST_CASE("eigen field: grid values, circle averages and covariance rows agree") {
  const FieldSampler s(square_config(16, 0.0625, 24, 0.125, 3));
  const FieldSample f = s.sample(9);
  for (std::size_t i = 0; i < s.grid().size(); i += 7) {
    CHECK(f.values[i] == doctest::Approx(circle_average_eval(f, s.grid().point(i), 0.0625)).epsilon(1e-11));
    CHECK(s.covariance(i, i) == doctest::Approx(s.variances()[i]).epsilon(1e-12));
  }
  const auto coarse = s.grid_circle_average(f, 0.125);
  CHECK(coarse[5] == doctest::Approx(circle_average_eval(f, s.grid().point(5), 0.125)).epsilon(1e-11));
  const auto row = s.covariance_row(11);
  for (std::size_t j = 0; j < row.size(); j += 5) CHECK(row[j] == doctest::Approx(s.covariance(11, j)).epsilon(1e-11));

  // shifting by the covariance keeps the modal representation consistent
  const FieldSample g = s.shift_by_covariance(f, 11, 0.7);
  for (std::size_t j = 0; j < row.size(); ++j) CHECK(g.values[j] - f.values[j] == doctest::Approx(0.7 * row[j]));
  const auto again = s.grid_circle_average(g, 0.0625);
  for (std::size_t j = 0; j < row.size(); j += 3) CHECK(again[j] == doctest::Approx(g.values[j]).epsilon(1e-11));

  std::vector<double> batch(s.grid().size() * 3);
  s.sample_values(8, 3, batch);
  for (std::size_t i = 0; i < s.grid().size(); ++i) CHECK(batch[i * 3 + 1] == f.values[i]);
}

TEST_CASE("circle-average continuity bound") {
  // E(avg_z - avg_w)^2 / (|z - w| / eps) stays bounded for |z - w| in [eps/10, eps]
  const KernelEval k(DomainKind::UnitDisk);
  const double eps = 0.05;
  double c_max = 0.0;
  for (int i = 1; i <= 10; ++i) {
    const double d = eps * i / 10.0;
    const Point z{0.1, 0.1}, w = z + Point(d, 0.0);
    const double inc = 2.0 * k.circle_avg_cov(z, z, eps, eps) - 2.0 * k.circle_avg_cov(z, w, eps, eps);
    c_max = std::max(c_max, inc / (d / eps));
  }
  CHECK(c_max < 3.0);
  CHECK(c_max > 0.5);
}

TEST_CASE("Cameron-Martin shifts") {
  const FieldSampler s(disk_config(16, 0.05, 0.1, 2));
  const FieldSample f = s.sample(0);
  const FieldSample same = cameron_martin_shift(f, [](Point) { return 0.0; });
  CHECK(same.values == f.values);
  const KernelEval k(DomainKind::UnitDisk);
  const FieldSample g = cameron_martin_shift(f, [&](Point z) { return k.green(0.0, z); });
  for (std::size_t i = 0; i < f.values.size(); ++i)
    CHECK(g.values[i] - f.values[i] == doctest::Approx(-std::log(std::abs(s.grid().point(i)))));
  auto bump = [](Point z) { return std::sin(3 * z.real()) * std::cos(2 * z.imag()); };
  const FieldSample back = cameron_martin_shift(cameron_martin_shift(f, bump), [&](Point z) { return -bump(z); });
  for (std::size_t i = 0; i < f.values.size(); ++i) CHECK(std::abs(back.values[i] - f.values[i]) <= 1e-15 * 8);
  CHECK(g.variances == f.variances);
  CHECK_THROWS_AS(cameron_martin_shift(f, [](Point) { return std::nan(""); }), Error);
}

TEST_CASE("gff error paths") {
  auto code_of = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Ok;
  };
  const FieldSampler s(disk_config(8, 0.1, 0.2));
  const FieldSample f = s.sample(0);
  CHECK(code_of([&] { circle_average_eval(f, s.grid().point(0), 0.05); }) == ErrorCode::UnsupportedRadius);
  CHECK(code_of([&] { circle_average_eval(f, Point(0.95, 0), 0.1); }) == ErrorCode::CircleLeavesDomain);
  auto eig_disk = disk_config(8, 0.1, 0.2);
  eig_disk.scheme.kind = SchemeKind::EigenTruncation;
  eig_disk.scheme.n_modes = 4;
  CHECK(code_of([&] { FieldSampler bad(eig_disk); }) == ErrorCode::UnsupportedScheme);
  const FieldSampler other(disk_config(16, 0.1, 0.2));
  CHECK(code_of([&] { other.shift_by_covariance(f, 0, 1.0); }) == ErrorCode::MismatchedGrids);
}

TEST_CASE("field dump round trip") {
  const FieldSampler s(disk_config(8, 0.1, 0.2, 4));
  const FieldSample f = s.sample(3);
  const std::string path = "gff_dump_test.bin";
  write_field_dump(path, f);
  const FieldDump d = read_field_dump(path);
  std::remove(path.c_str());
  CHECK(d.rows == 8);
  CHECK(d.cols == 8);
  std::size_t finite = 0;
  for (int row = 0; row < 8; ++row)
    for (int col = 0; col < 8; ++col) {
      const double v = d.lattice[static_cast<std::size_t>(row) * 8 + col];
      const std::ptrdiff_t idx = s.grid().index_of(col, row);
      if (idx < 0) {
        CHECK(std::isnan(v));
      } else {
        CHECK(v == f.values[static_cast<std::size_t>(idx)]);
        ++finite;
      }
    }
  CHECK(finite == f.values.size());
  CHECK(d.header_json.find("\"seed\"") != std::string::npos);
}
