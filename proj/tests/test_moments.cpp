#include <cmath>
#include <numbers>

#include "doctest.h"
#include "gmclab/error.hpp"
#include "gmclab/kahane.hpp"
#include "gmclab/moments.hpp"

using namespace gmclab;

namespace {

SamplerConfig disk_config(int res, double eps, double margin, std::uint64_t seed = 1,
                          std::optional<Window> window = std::nullopt) {
  SamplerConfig c;
  c.scheme = {SchemeKind::CholeskyCircleAvg, eps, 0};
  c.domain = {DomainKind::UnitDisk, res, margin, window};
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

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Ok;
}

}  // namespace

TEST_CASE("zeta exponent arithmetic") {
  CHECK(zeta_exponent(1.0, 2.0) == doctest::Approx(3.0));
  CHECK(zeta_exponent(1.0, 1.0) == doctest::Approx(2.0));
  CHECK(zeta_exponent(0.5, 0.5) == doctest::Approx(1.03125));
  CHECK(zeta_exponent(-1.3, 0.7) == zeta_exponent(1.3, 0.7));
}

TEST_CASE("ball moments: first moment is the ball area") {
  const FieldSampler s(disk_config(64, 1.0 / 32, 1.0 / 16, 3, Window{{0, 0}, 0.27}));
  const double radii[] = {0.25, 0.1875, 0.125};
  MomentOptions opt;
  opt.n_replicas = 8000;
  const double gammas[] = {0.0, 0.5, -0.5};
  const double qs[] = {1.0, 2.0};
  const auto curves = ball_mass_moments(s, gammas, qs, radii, 0.0, opt);
  REQUIRE(curves.size() == 6);
  for (const auto& c : curves) {
    for (const auto& p : c.points) {
      CHECK(p.estimate > 0.0);
      if (c.q == 1.0) {
        const double area = p.cells * s.grid().cell_area();
        if (c.gamma == 0.0) CHECK(p.estimate == doctest::Approx(area).epsilon(1e-12));
        else CHECK(std::abs(p.estimate - area) <= 3.0 * p.se);
      }
    }
  }
  CHECK(curves[0].fit.slope == doctest::Approx(2.0).epsilon(0.03));
  // second moment against the exact lognormal-sum oracle
  for (std::size_t c = 2; c < 6; c += 2) {
    const auto& curve = curves[c + 1];
    for (const auto& p : curve.points) {
      const auto cells = ball_cells(s, 0.0, p.r);
      CHECK(std::abs(p.estimate - exact_ball_second_moment(s, cells, curve.gamma)) <= 3.0 * p.se);
    }
  }
  // sign symmetry
  for (std::size_t k = 0; k < curves[3].points.size(); ++k) {
    const MomentPoint& a = curves[3].points[k];
    const MomentPoint& b = curves[5].points[k];
    CHECK(std::abs(a.estimate - b.estimate) <= 3.0 * std::hypot(a.se, b.se));
  }
  CHECK(std::abs(curves[3].fit.slope - curves[5].fit.slope) <= 0.1);
  CHECK(!curves[3].beyond_moment_threshold);
  CHECK(ball_mass_moments(s, 1.5, 2.0, radii, 0.0, opt).beyond_moment_threshold);
}

TEST_CASE("rooted ball-moment estimator") {
  const FieldSampler s(disk_config(64, 1.0 / 32, 1.0 / 16, 4, Window{{0, 0}, 0.27}));
  const double radii[] = {0.25, 0.1875, 0.125};
  MomentOptions opt;
  opt.n_replicas = 4000;
  opt.estimator = MomentEstimator::Rooted;
  const double gammas[] = {1.0};
  const double qs[] = {1.0, 2.0, 0.5};
  const auto curves = ball_mass_moments(s, gammas, qs, radii, 0.0, opt);
  for (const auto& p : curves[0].points) {
    CHECK(p.estimate == doctest::Approx(p.cells * s.grid().cell_area()).epsilon(1e-12));
    CHECK(p.se == 0.0);
  }
  for (const auto& p : curves[1].points) {
    const double exact = exact_ball_second_moment(s, ball_cells(s, 0.0, p.r), 1.0);
    CHECK(std::abs(p.estimate - exact) <= 3.0 * p.se);
    CHECK(p.se < 0.05 * exact);
  }
  // q = 1/2 against the direct estimator on independent replicas
  opt.estimator = MomentEstimator::Direct;
  opt.first_replica = 100000;
  const MomentCurve direct = ball_mass_moments(s, 1.0, 0.5, radii, 0.0, opt);
  for (std::size_t k = 0; k < direct.points.size(); ++k) {
    const MomentPoint& a = direct.points[k];
    const MomentPoint& b = curves[2].points[k];
    CHECK(std::abs(a.estimate - b.estimate) <= 3.0 * std::hypot(a.se, b.se));
  }
  // worker-count invariance
  opt.estimator = MomentEstimator::Rooted;
  opt.n_replicas = 300;
  const MomentCurve one = ball_mass_moments(s, 1.0, 2.0, radii, 0.0, opt);
  opt.workers = 3;
  const MomentCurve three = ball_mass_moments(s, 1.0, 2.0, radii, 0.0, opt);
  for (std::size_t k = 0; k < one.points.size(); ++k) CHECK(one.points[k].estimate == three.points[k].estimate);
}

TEST_CASE("single-cell ball: lognormal oracle") {
  // a ball holding one cell of a coarse grid (4 spacings is the floor, so use the joint sampler directly)
  const FieldSampler s(disk_config(8, 0.1, 0.2, 5));
  const double gamma = 1.2, q = 2.0;
  const std::size_t cell = 0;
  const double sigma2 = s.variances()[cell], a = s.grid().cell_area();
  RunningStats st;
  for (std::uint64_t r = 0; r < 100000; ++r) {
    const double v = s.sample(r).values[cell];
    st.add(std::pow(a * std::exp(gamma * v - 0.5 * gamma * gamma * sigma2), q));
  }
  const double oracle = std::pow(a, q) * std::exp(gamma * gamma * sigma2 * (q * q - q) / 2.0);
  CHECK(std::abs(st.mean - oracle) <= 3.0 * st.se());
}

TEST_CASE("ball validation") {
  const FieldSampler s(disk_config(64, 1.0 / 32, 1.0 / 16, 3, Window{{0, 0}, 0.27}));
  CHECK(code_of([&] { ball_cells(s, 0.0, 0.125); }) == ErrorCode::Ok);
  CHECK(ball_cells(s, 0.0, 0.125).size() == 52);
  CHECK(code_of([&] { ball_cells(s, 0.0, 0.1); }) == ErrorCode::BallTooSmallForGrid);
  CHECK(code_of([&] { ball_cells(s, 0.0, 0.3); }) == ErrorCode::BallLeavesDomain);
  CHECK(code_of([&] { ball_cells(s, Point(0.9, 0), 0.2); }) == ErrorCode::BallLeavesDomain);
}

TEST_CASE("lower tail and negative moments") {
  const FieldSampler s(disk_config(16, 0.0625, 0.125, 9));
  MomentOptions opt;
  opt.n_replicas = 20000;
  const double nus[] = {-0.5, -0.25, 0.0, 0.25};
  const TailCurve t = lower_tail(s, 1.0, nus, opt);
  REQUIRE(t.points.size() == 4);
  for (std::size_t k = 1; k < t.points.size(); ++k) CHECK(t.points[k].prob <= t.points[k - 1].prob);
  for (const auto& p : t.points) {
    CHECK(p.prob > 0.0);
    CHECK(p.prob <= 1.0);
    CHECK(p.wilson.lo <= p.prob);
    CHECK(p.wilson.hi >= p.prob);
  }
  REQUIRE(t.negative_moments.size() == 2);
  CHECK(t.negative_moments[0].estimate > 1.0 / s.grid().area());  // Jensen
  const double far[] = {0.0, 50.0};
  CHECK(code_of([&] { lower_tail(s, 1.0, far, opt); }) == ErrorCode::AllCensored);
}

TEST_CASE("wilson interval and line fit") {
  const Interval w = wilson_interval(10, 100);
  CHECK(w.lo == doctest::Approx(0.0552).epsilon(1e-3));
  CHECK(w.hi == doctest::Approx(0.1744).epsilon(1e-3));
  const double x[] = {0, 1, 2, 3}, y[] = {1, 3, 5, 7};
  const LineFit f = fit_line(x, y);
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(1.0));
  CHECK(f.slope_se == doctest::Approx(0.0));
  std::vector<double> v(1000);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i % 7);
  RunningStats a, b, all;
  for (std::size_t i = 0; i < v.size(); ++i) {
    (i < 300 ? a : b).add(v[i]);
    all.add(v[i]);
  }
  a.merge(b);
  CHECK(a.mean == doctest::Approx(all.mean).epsilon(1e-14));
  CHECK(a.variance() == doctest::Approx(all.variance()).epsilon(1e-12));
  CHECK(median_of_means(v, 10) == doctest::Approx(3.0).epsilon(0.05));
}

TEST_CASE("box dimension of Lebesgue measure is 2") {
  const FieldSampler s(square_config(128, 0.0, 16, 0.0));
  const GmcMeasure m = build_measure(s.sample(0), 0.0);
  const DimensionFit d = support_box_dimension(m, 0.99);
  CHECK(d.dimension == doctest::Approx(2.0).epsilon(0.025));
  GmcMeasure spike = m;
  std::fill(spike.cell_mass.begin(), spike.cell_mass.end(), 0.0);
  spike.cell_mass[5] = 1.0;
  CHECK(code_of([&] { support_box_dimension(spike, 0.99); }) == ErrorCode::DegenerateMeasure);
}

TEST_CASE("Cauchy diagnostic") {
  const DomainSpec dom{DomainKind::UnitDisk, 16, 0.125, Window{{0, 0}, 0.7}};
  auto one = [](Point) { return 1.0; };
  MomentOptions opt;
  opt.n_replicas = 20000;
  CHECK(cauchy_diagnostic(dom, 0.125, 0.125, 0.8, one, 1, opt).gap == 0.0);
  CHECK(cauchy_diagnostic(dom, 0.0625, 0.125, 0.0, one, 1, opt).gap == 0.0);
  const CauchyResult r = cauchy_diagnostic(dom, 0.0625, 0.125, 0.8, one, 1, opt);
  CHECK(r.gap > 0.0);
  CHECK(std::abs(r.gap - r.oracle) <= 3.0 * r.se);
  CHECK(code_of([&] { cauchy_diagnostic(dom, 0.0625, 0.125, 1.5, one, 1, opt); }) == ErrorCode::OutOfL2Regime);
}

TEST_CASE("second moment finiteness boundary") {
  // sum_{i,j} h^4 exp(gamma^2 C_eps(i, j)) over the square [-1/4, 1/4]^2 with h = eps
  auto second = [](double eps, double gamma) {
    const int res = static_cast<int>(std::lround(2.0 / eps));
    const FieldSampler s(disk_config(res, eps, eps, 1, Window{{0, 0}, 0.4}));
    std::vector<std::size_t> square;
    for (std::size_t i = 0; i < s.grid().size(); ++i) {
      const Point z = s.grid().point(i);
      if (std::abs(z.real()) < 0.25 && std::abs(z.imag()) < 0.25) square.push_back(i);
    }
    REQUIRE(square.size() == static_cast<std::size_t>(res * res / 16));
    return exact_ball_second_moment(s, square, gamma);
  };
  double prev_small = 0, prev_big = 0;
  std::vector<double> inc_small, ratio_big;
  for (const double eps : {1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64}) {
    const double a = second(eps, 1.0), b = second(eps, 1.5);
    if (prev_small > 0) {
      inc_small.push_back(a - prev_small);
      ratio_big.push_back(b / prev_big);
    }
    prev_small = a;
    prev_big = b;
  }
  // gamma = 1 increments shrink geometrically; gamma = 1.5 keeps growing by a steady factor
  CHECK(std::abs(inc_small[2]) < 0.6 * std::abs(inc_small[1]));
  CHECK(std::abs(inc_small[1]) < 0.6 * std::abs(inc_small[0]));
  for (double r : ratio_big) CHECK(r > 1.05);
}
