#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "gmclab/domain.hpp"
#include "gmclab/error.hpp"
#include "gmclab/linalg.hpp"
#include "gmclab/numerics.hpp"

using namespace gmclab;
using std::numbers::pi;

namespace {

// Harmonic extension of log|z - .| from the circle |u - c| = rho, evaluated at w
// (Poisson integral, periodic trapezoid rule).
double poisson_harmonic_part(Point z, Point w, Point c = {0, 0}, double rho = 1.0, int nodes = 4096) {
  const Point ws = (w - c) / rho;
  double acc = 0.0;
  for (int i = 0; i < nodes; ++i) {
    const double th = 2.0 * pi * i / nodes;
    const Point e = std::polar(1.0, th);
    const double poisson = (1.0 - std::norm(ws)) / std::norm(e - ws);
    acc += poisson * std::log(std::abs(z - (c + rho * e)));
  }
  return acc / nodes;
}

// Square Green kernel as a sine series in x with the 1D Helmholtz Green function in y.
double square_green_series(Point z, Point w, int terms = 4000) {
  const double x = z.real(), xp = w.real();
  const double lo = std::min(z.imag(), w.imag()), hi = std::max(z.imag(), w.imag());
  double acc = 0.0;
  for (int j = 1; j <= terms; ++j) {
    const double a = j * pi;
    const double gy = std::exp(a * (lo - hi)) * (1.0 - std::exp(-2.0 * a * lo)) * (1.0 - std::exp(-2.0 * a * (1.0 - hi))) /
                      (2.0 * a * (1.0 - std::exp(-2.0 * a)));
    acc += 2.0 * std::sin(a * x) * std::sin(a * xp) * gy;
  }
  return 2.0 * pi * acc;
}

// Brute-force double circle average of the Green kernel.
double brute_circle_cov(const KernelEval& k, Point z, Point w, double e1, double e2, int nodes) {
  double acc = 0.0;
  std::vector<Point> v(nodes);
  for (int j = 0; j < nodes; ++j) v[j] = w + std::polar(e2, 2.0 * pi * (j + 0.5) / nodes);
  for (int i = 0; i < nodes; ++i) {
    const Point u = z + std::polar(e1, 2.0 * pi * i / nodes);
    for (int j = 0; j < nodes; ++j) acc += -std::log(std::abs(u - v[j])) + k.harmonic_part(u, v[j]);
  }
  return acc / (static_cast<double>(nodes) * nodes);
}

}  // namespace

TEST_CASE("bessel_j0 matches the standard library") {
  for (double x = 0.0; x < 200.0; x += 0.173) {
    const double ref = std::cyl_bessel_j(0.0, x);
    CHECK(std::abs(bessel_j0(x) - ref) <= 1e-10 * std::max(std::abs(ref), 1e-2));
  }
  CHECK(bessel_j0(0.0) == 1.0);
  CHECK(bessel_j0(-3.0) == doctest::Approx(bessel_j0(3.0)).epsilon(1e-15));
}

TEST_CASE("gauss_legendre integrates polynomials exactly") {
  const auto rule = gauss_legendre(16);
  double s0 = 0, s2 = 0, s30 = 0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    s0 += rule.weights[i];
    s2 += rule.weights[i] * rule.nodes[i] * rule.nodes[i];
    s30 += rule.weights[i] * std::pow(rule.nodes[i], 30);
  }
  CHECK(s0 == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(s2 == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(s30 == doctest::Approx(2.0 / 31.0).epsilon(1e-12));
}

TEST_CASE("replica seeds follow the documented SplitMix64 derivation") {
  // splitmix64(0) reference value of the published generator
  CHECK(splitmix64(0) == 0xE220A8397B1DCDAFULL);
  CHECK(replica_seed(7, 0) == splitmix64(7));
  CHECK(replica_seed(7, 3) == splitmix64(7 ^ (3 * 0x9E3779B97F4A7C15ULL)));
}

TEST_CASE("grid retains cell centers away from the boundary") {
  DomainSpec spec{DomainKind::UnitDisk, 64, 0.0625, std::nullopt};
  const Grid g(spec);
  CHECK(g.spacing() == doctest::Approx(1.0 / 32));
  for (const Point z : g.points()) CHECK(1.0 - std::abs(z) >= 0.0625);
  // every retained center sits on the (k + 1/2) h lattice
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(g.point(i) == g.cell_center(g.column(i), g.row(i)));
    CHECK(g.nearest(g.point(i)) == static_cast<std::ptrdiff_t>(i));
  }
  DomainSpec sq{DomainKind::UnitSquare, 32, 0.1, std::nullopt};
  for (const Point z : Grid(sq).points())
    CHECK(std::min({z.real(), 1 - z.real(), z.imag(), 1 - z.imag()}) >= 0.1);
  DomainSpec win{DomainKind::UnitDisk, 128, 0.0, Window{{0.0, 0.0}, 0.25}};
  for (const Point z : Grid(win).points()) CHECK(std::abs(z) <= 0.25);
}

TEST_CASE("disk green kernel") {
  const KernelEval k(DomainKind::UnitDisk);
  CHECK(k.green(0.0, 0.5) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(k.green(0.3, Point(0, 0.5)) == k.green(Point(0, 0.5), 0.3));
  CHECK(k.green(0.5, -0.5) == doctest::Approx(std::log(1.25)).epsilon(1e-14));
  // definitional oracle: -log|z-w| plus the Poisson extension of log|z - .|
  const Point pairs[][2] = {{0.5, -0.5}, {{0.2, 0.3}, {-0.4, 0.1}}, {{0.7, 0.0}, {0.1, -0.6}}};
  for (const auto& p : pairs) {
    const double oracle = -std::log(std::abs(p[0] - p[1])) + poisson_harmonic_part(p[0], p[1]);
    CHECK(k.green(p[0], p[1]) == doctest::Approx(oracle).epsilon(1e-10));
  }
}

TEST_CASE("disk conformal radius") {
  const KernelEval k(DomainKind::UnitDisk);
  CHECK(k.conformal_radius(0.0) == 1.0);
  CHECK(k.conformal_radius(0.5) == doctest::Approx(0.75));
  CHECK(k.conformal_radius(Point(0, 0.5)) == doctest::Approx(0.75));
  CHECK(std::exp(poisson_harmonic_part(0.5, 0.5)) == doctest::Approx(0.75).epsilon(1e-10));
  CHECK(std::log(k.conformal_radius(0.3)) == doctest::Approx(k.harmonic_part(0.3, 0.3)));
}

TEST_CASE("square green kernel agrees with the sine-series oracle") {
  const KernelEval k(DomainKind::UnitSquare);
  const Point pts[][2] = {{{0.5, 0.5}, {0.3, 0.2}}, {{0.1, 0.8}, {0.7, 0.6}}, {{0.25, 0.25}, {0.6, 0.9}},
                          {{0.9, 0.1}, {0.85, 0.5}}};
  for (const auto& p : pts) {
    CHECK(k.green(p[0], p[1]) == doctest::Approx(square_green_series(p[0], p[1])).epsilon(1e-10));
    CHECK(k.green(p[0], p[1]) == doctest::Approx(k.green(p[1], p[0])).epsilon(1e-13));
  }
  // nearby points: compare the harmonic parts
  const Point z{0.4, 0.45}, w{0.41, 0.55};
  const double oracle = square_green_series(z, w, 20000) + std::log(std::abs(z - w));
  CHECK(k.harmonic_part(z, w) == doctest::Approx(oracle).epsilon(1e-9));
  // the kernel vanishes at the boundary
  CHECK(std::abs(k.green({0.3, 0.4}, {1e-9, 0.7})) < 1e-7);
  CHECK(std::abs(k.green({0.3, 0.4}, {0.6, 1 - 1e-9})) < 1e-7);
}

TEST_CASE("green kernel is symmetric on random pairs") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const KernelEval disk(DomainKind::UnitDisk);
  const KernelEval sq(DomainKind::UnitSquare);
  int checked = 0;
  while (checked < 1000) {
    const Point z{u(rng), u(rng)}, w{u(rng), u(rng)};
    if (std::abs(z) >= 0.99 || std::abs(w) >= 0.99) continue;
    CHECK(std::abs(disk.green(z, w) - disk.green(w, z)) <= 1e-10);
    const Point zs = 0.5 * (z + Point(1, 1)), ws = 0.5 * (w + Point(1, 1));
    CHECK(std::abs(sq.green(zs, ws) - sq.green(ws, zs)) <= 1e-10);
    ++checked;
  }
}

TEST_CASE("log singularity: green + log|delta| tends to the harmonic diagonal") {
  for (const auto kind : {DomainKind::UnitDisk, DomainKind::UnitSquare}) {
    const KernelEval k(kind);
    const Point z = kind == DomainKind::UnitDisk ? Point{0.2, -0.3} : Point{0.35, 0.6};
    const double target = k.harmonic_part(z, z);
    double prev = 1e9;
    for (const double d : {1e-2, 1e-3, 1e-4}) {
      const double gap = std::abs(k.green(z, z + Point(d, 0.0)) + std::log(d) - target);
      CHECK(gap < prev);
      CHECK(gap < 2.0 * d);
      prev = gap;
    }
  }
}

TEST_CASE("circle-average covariance") {
  const KernelEval k(DomainKind::UnitDisk);
  CHECK(k.circle_avg_cov(0.0, 0.0, 0.1, 0.1) == doctest::Approx(std::log(10.0)).epsilon(1e-14));
  // disjoint circles reduce to the Green kernel
  CHECK(k.circle_avg_cov(0.0, 0.5, 0.05, 0.05) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(brute_circle_cov(k, 0.0, 0.5, 0.05, 0.05, 1024) == doctest::Approx(std::log(2.0)).epsilon(1e-9));
  // nested circles: variance at the larger radius
  const double nested = -std::log(0.2) + std::log(k.conformal_radius(0.3));
  CHECK(k.circle_avg_cov(0.3, 0.3, 0.1, 0.2) == doctest::Approx(nested).epsilon(1e-13));
  CHECK(brute_circle_cov(k, 0.3, 0.3, 0.1, 0.2, 1024) == doctest::Approx(nested).epsilon(1e-9));
  // overlapping circles through the quadrature route
  const Point z{0.1, 0.05}, w{0.14, 0.08};
  const double quad = k.circle_avg_cov(z, w, 0.05, 0.05);
  CHECK(quad == doctest::Approx(brute_circle_cov(k, z, w, 0.05, 0.05, 4096)).epsilon(2e-5));
  const double mixed = k.circle_avg_cov(z, w, 0.03, 0.06);
  CHECK(mixed == doctest::Approx(brute_circle_cov(k, z, w, 0.03, 0.06, 4096)).epsilon(2e-5));
  CHECK(k.circle_avg_cov(w, z, 0.06, 0.03) == doctest::Approx(mixed).epsilon(1e-10));
  // the circle passes through the other center
  const double through = k.circle_avg_cov(0.0, 0.05, 0.05, 0.05);
  CHECK(through == doctest::Approx(brute_circle_cov(k, 0.0, 0.05, 0.05, 0.05, 4096)).epsilon(2e-5));
}

TEST_CASE("Brownian increments of the circle average") {
  const KernelEval disk(DomainKind::UnitDisk);
  const KernelEval sq(DomainKind::UnitSquare);
  for (const double eps : {0.01, 0.05, 0.1}) {
    CHECK(disk.circle_avg_cov(0.2, 0.2, eps, eps) - disk.circle_avg_cov(0.2, 0.2, 2 * eps, 2 * eps) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-13));
    const Point c{0.5, 0.4};
    CHECK(sq.circle_avg_cov(c, c, eps, eps) - sq.circle_avg_cov(c, c, 2 * eps, 2 * eps) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
}

TEST_CASE("circle-average covariance matrices are PSD") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.85, 0.85);
  const KernelEval k(DomainKind::UnitDisk);
  std::vector<Point> pts;
  while (pts.size() < 50) {
    const Point z{u(rng), u(rng)};
    if (std::abs(z) < 0.85) pts.push_back(z);
  }
  Eigen::MatrixXd c(50, 50);
  for (int i = 0; i < 50; ++i)
    for (int j = 0; j < 50; ++j) c(i, j) = k.circle_avg_cov(pts[i], pts[j], 0.05, 0.05);
  CHECK(min_eigenvalue(c) >= -1e-8);
}

TEST_CASE("Markov split in a sub-disk") {
  const KernelEval k(DomainKind::UnitDisk);
  const Point single[] = {0.1};
  const auto one = markov_split_cov(k, 0.0, 0.5, single, 0.1);
  CHECK(one.inner_cov(0, 0) == doctest::Approx(-std::log(0.1 / 0.5) + std::log(1 - 0.04)).epsilon(1e-13));
  // oracle: variance at radius eps is -log eps + g_B(z, z) from the Poisson extension on the sub-disk
  CHECK(one.inner_cov(0, 0) ==
        doctest::Approx(-std::log(0.1) + poisson_harmonic_part(0.1, 0.1, 0.0, 0.5)).epsilon(1e-10));

  const Point two[] = {0.1, -0.1};
  const auto split = markov_split_cov(k, 0.0, 0.5, two, 0.05);
  CHECK(split.harmonic_cov(0, 1) == doctest::Approx(split.harmonic_cov(1, 0)));
  CHECK(min_eigenvalue(split.harmonic_cov) >= -1e-12);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      CHECK(split.inner_cov(i, j) + split.harmonic_cov(i, j) ==
            doctest::Approx(k.circle_avg_cov(two[i], two[j], 0.05, 0.05)).epsilon(1e-12));

  const auto whole = markov_split_cov(k, 0.0, 1.0, two, 0.05);
  CHECK(whole.harmonic_cov.cwiseAbs().maxCoeff() < 1e-14);
  CHECK_THROWS_AS(markov_split_cov(k, 0.6, 0.5, two, 0.05), Error);
}

TEST_CASE("kernel error paths") {
  const KernelEval k(DomainKind::UnitDisk);
  auto code_of = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Ok;
  };
  CHECK(code_of([&] { k.green(0.2, 0.2); }) == ErrorCode::CoincidentPoints);
  CHECK(code_of([&] { k.green(0.2, 1.2); }) == ErrorCode::OutOfDomain);
  CHECK(code_of([&] { k.conformal_radius(Point(2, 0)); }) == ErrorCode::OutOfDomain);
  CHECK(code_of([&] { k.circle_avg_cov(0.95, 0.0, 0.1, 0.1); }) == ErrorCode::CircleLeavesDomain);
  CHECK(code_of([&] { markov_split_cov(k, 0.0, 0.5, std::vector<Point>{0.48}, 0.05); }) == ErrorCode::NotNested);
}
