#include "gmclab/moments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "gmclab/error.hpp"
#include "gmclab/numerics.hpp"

namespace gmclab {

double zeta_exponent(double gamma, double q) noexcept {
  const double g2 = gamma * gamma;
  return (2.0 + g2 / 2.0) * q - g2 * q * q / 2.0;
}

std::vector<std::size_t> ball_cells(const FieldSampler& sampler, Point center, double r) {
  const Grid& g = sampler.grid();
  const double h = g.spacing();
  if (r < 4.0 * h * (1.0 - 1e-12) || r < sampler.config().scheme.eps * (1.0 - 1e-12))
    fail(ErrorCode::BallTooSmallForGrid, "ball radius " + std::to_string(r) + " is below 4 grid spacings or the scheme radius");
  if (distance_to_boundary(g.spec().kind, center) < r)
    fail(ErrorCode::BallLeavesDomain, "ball of radius " + std::to_string(r) + " is not inside the domain");
  const Point origin = g.cell_center(0, 0);
  const int n = g.side_cells();
  const int c0 = std::max(0, static_cast<int>(std::floor((center.real() - r - origin.real()) / h)));
  const int c1 = std::min(n - 1, static_cast<int>(std::ceil((center.real() + r - origin.real()) / h)));
  const int r0 = std::max(0, static_cast<int>(std::floor((center.imag() - r - origin.imag()) / h)));
  const int r1 = std::min(n - 1, static_cast<int>(std::ceil((center.imag() + r - origin.imag()) / h)));
  std::vector<std::size_t> out;
  for (int row = r0; row <= r1; ++row)
    for (int col = c0; col <= c1; ++col) {
      if (std::abs(g.cell_center(col, row) - center) > r) continue;
      const std::ptrdiff_t idx = g.index_of(col, row);
      if (idx < 0) fail(ErrorCode::BallLeavesDomain, "ball reaches cells outside the retained grid");
      out.push_back(static_cast<std::size_t>(idx));
    }
  std::sort(out.begin(), out.end());
  return out;
}

const char* estimator_name(MomentEstimator e) noexcept { return e == MomentEstimator::Direct ? "direct" : "rooted"; }

namespace {

constexpr std::uint64_t kBallRootSalt = 0x42616C6CULL;

// Runs fn(replica, values) over replicas using batched sampling; values is the
// field of that replica laid out by cell. Chunks are reduced by the caller.
template <class Fn>
void for_each_field(const FieldSampler& sampler, const MomentOptions& opt, Fn&& fn) {
  const std::size_t cells = sampler.grid().size();
  const std::size_t chunk = 64;
  parallel_chunks(opt.n_replicas, chunk, opt.workers, [&](std::size_t, std::size_t lo, std::size_t hi) {
    const std::size_t count = hi - lo;
    std::vector<double> batch(cells * count), one(cells);
    sampler.sample_values(opt.first_replica + lo, count, batch);
    for (std::size_t r = 0; r < count; ++r) {
      for (std::size_t i = 0; i < cells; ++i) one[i] = batch[i * count + r];
      fn(lo + r, std::span<const double>(one));
    }
  });
}

LineFit log_log_fit(const std::vector<MomentPoint>& pts) {
  std::vector<double> x, y, s;
  bool weighted = true;
  for (const auto& p : pts) {
    x.push_back(std::log(p.r));
    y.push_back(std::log(p.estimate));
    s.push_back(p.se / p.estimate);
    if (!(p.se > 0.0)) weighted = false;
  }
  return weighted ? fit_line(x, y, s) : fit_line(x, y);
}

}  // namespace

std::vector<MomentCurve> ball_mass_moments(const FieldSampler& sampler, std::span<const double> gammas,
                                           std::span<const double> qs, std::span<const double> radii, Point center,
                                           const MomentOptions& opt) {
  for (double g : gammas) check_subcritical(g);
  if (radii.size() < 3) fail(ErrorCode::InvalidArgument, "moment curves need at least 3 radii");
  for (std::size_t k = 1; k < radii.size(); ++k)
    if (!(radii[k] < radii[k - 1])) fail(ErrorCode::InvalidArgument, "radii must be strictly decreasing");
  if (opt.n_replicas < 2) fail(ErrorCode::InvalidArgument, "need at least two replicas");

  std::vector<std::vector<std::size_t>> balls;
  for (double r : radii) balls.push_back(ball_cells(sampler, center, r));
  const std::vector<std::size_t>& outer = balls.front();
  // position of each ball cell inside the outer ball
  std::vector<std::vector<std::size_t>> local(balls.size());
  for (std::size_t b = 0; b < balls.size(); ++b)
    for (std::size_t idx : balls[b])
      local[b].push_back(static_cast<std::size_t>(std::lower_bound(outer.begin(), outer.end(), idx) - outer.begin()));

  const bool rooted = opt.estimator == MomentEstimator::Rooted;
  if (rooted && opt.roots_per_replica < 1) fail(ErrorCode::InvalidArgument, "need at least one root per replica");
  const std::size_t ng = gammas.size(), nr = radii.size(), n = opt.n_replicas;
  const std::size_t nk = rooted ? opt.roots_per_replica : 1;
  const double area = sampler.grid().cell_area();
  std::vector<double> outer_var(outer.size());
  for (std::size_t k = 0; k < outer.size(); ++k) outer_var[k] = sampler.variances()[outer[k]];
  // ball_mass[((rep * ng + gi) * nr + b) * nk + k]
  std::vector<double> ball_mass(n * ng * nr * nk);
  for_each_field(sampler, opt, [&](std::size_t rep, std::span<const double> values) {
    std::vector<double> v(outer.size()), m(outer.size());
    for (std::size_t k = 0; k < outer.size(); ++k) v[k] = values[outer[k]];
    std::vector<std::vector<double>> rows;
    if (rooted) {
      Rng rng(stream_seed(replica_seed(sampler.config().master_seed, opt.first_replica + rep), kBallRootSalt));
      for (std::size_t b = 0; b < nr; ++b)
        for (std::size_t k = 0; k < nk; ++k) {
          const std::size_t pick = std::min(local[b].size() - 1,
                                            static_cast<std::size_t>(uniform01(rng) * static_cast<double>(local[b].size())));
          rows.push_back(sampler.covariance_row(outer[local[b][pick]]));
        }
    }
    for (std::size_t gi = 0; gi < ng; ++gi) {
      cell_masses(v, outer_var, gammas[gi], area, m);
      const double g2 = gammas[gi] * gammas[gi];
      for (std::size_t b = 0; b < nr; ++b) {
        double* out = &ball_mass[((rep * ng + gi) * nr + b) * nk];
        if (!rooted) {
          double s = 0.0;
          for (std::size_t k : local[b]) s += m[k];
          out[0] = s;
          continue;
        }
        for (std::size_t k = 0; k < nk; ++k) {
          const std::vector<double>& row = rows[b * nk + k];
          double s = 0.0;
          for (std::size_t j : local[b]) s += m[j] * std::exp(g2 * row[outer[j]]);
          out[k] = s;
        }
      }
    }
  });

  std::vector<MomentCurve> curves;
  std::vector<double> powers(n);
  for (std::size_t gi = 0; gi < ng; ++gi)
    for (double q : qs) {
      MomentCurve c;
      c.gamma = gammas[gi];
      c.q = q;
      c.estimator = opt.estimator;
      c.n_replicas = n;
      c.beyond_moment_threshold = gammas[gi] != 0.0 && q >= 4.0 / (gammas[gi] * gammas[gi]);
      for (std::size_t b = 0; b < nr; ++b) {
        const double volume = static_cast<double>(balls[b].size()) * area;
        for (std::size_t rep = 0; rep < n; ++rep) {
          const double* x = &ball_mass[((rep * ng + gi) * nr + b) * nk];
          if (!rooted) {
            powers[rep] = std::pow(x[0], q);
            continue;
          }
          double s = 0.0;
          for (std::size_t k = 0; k < nk; ++k) s += std::pow(x[k], q - 1.0);
          powers[rep] = volume * s / static_cast<double>(nk);
        }
        MomentPoint p;
        p.r = radii[b];
        p.cells = balls[b].size();
        p.estimate = std::accumulate(powers.begin(), powers.end(), 0.0) / static_cast<double>(n);
        p.se = batch_means_se(powers, opt.batches);
        p.median_of_means = median_of_means(powers);
        c.points.push_back(p);
      }
      c.fit = log_log_fit(c.points);
      curves.push_back(std::move(c));
    }
  return curves;
}

MomentCurve ball_mass_moments(const FieldSampler& sampler, double gamma, double q, std::span<const double> radii,
                              Point center, const MomentOptions& opt) {
  const double g[] = {gamma};
  const double qq[] = {q};
  return std::move(ball_mass_moments(sampler, g, qq, radii, center, opt).front());
}

double exact_ball_second_moment(const FieldSampler& sampler, std::span<const std::size_t> cells, double gamma) {
  const double g2 = gamma * gamma;
  const double a = sampler.grid().cell_area();
  double total = 0.0;
  for (std::size_t i : cells)
    for (std::size_t j : cells) total += std::exp(g2 * sampler.covariance(i, j));
  return total * a * a;
}

TailCurve lower_tail(const FieldSampler& sampler, double gamma, std::span<const double> nu_grid,
                     const MomentOptions& opt) {
  check_subcritical(gamma);
  if (nu_grid.empty()) fail(ErrorCode::InvalidArgument, "empty nu grid");
  for (std::size_t k = 1; k < nu_grid.size(); ++k)
    if (!(nu_grid[k] > nu_grid[k - 1])) fail(ErrorCode::InvalidArgument, "nu grid must be increasing");
  const std::size_t n = opt.n_replicas;
  const double area = sampler.grid().cell_area();
  std::vector<double> log_mass(n);
  const auto var = sampler.variances();
  for_each_field(sampler, opt, [&](std::size_t rep, std::span<const double> values) {
    double s = 0.0;
    const double half = 0.5 * gamma * gamma;
    for (std::size_t i = 0; i < values.size(); ++i) s += std::exp(gamma * values[i] - half * var[i]);
    log_mass[rep] = std::log(s * area);
  });

  TailCurve t;
  t.gamma = gamma;
  t.n_replicas = n;
  for (double nu : nu_grid) {
    TailPoint p;
    p.nu = nu;
    p.hits = static_cast<std::size_t>(std::count_if(log_mass.begin(), log_mass.end(), [nu](double x) { return x <= -nu; }));
    p.prob = static_cast<double>(p.hits) / static_cast<double>(n);
    p.log_prob = p.hits ? std::log(p.prob) : -std::numeric_limits<double>::infinity();
    p.wilson = wilson_interval(p.hits, n);
    p.censored = p.hits < 10;
    t.points.push_back(p);
  }
  if (t.points.back().hits == 0)
    fail(ErrorCode::AllCensored, "no replica reaches log M <= -" + std::to_string(nu_grid.back()));
  std::vector<double> x, y, s;
  for (const auto& p : t.points)
    if (!p.censored) {
      x.push_back(p.nu * p.nu);
      y.push_back(p.log_prob);
      s.push_back(std::sqrt((1.0 - p.prob) / static_cast<double>(p.hits)));
    }
  if (x.size() >= 2) {
    t.slope_vs_nu2 = fit_line(x, y, s);
    t.slope_ci = {t.slope_vs_nu2.slope - 1.959963984540054 * t.slope_vs_nu2.slope_se,
                  t.slope_vs_nu2.slope + 1.959963984540054 * t.slope_vs_nu2.slope_se};
  } else {
    t.slope_vs_nu2.slope = std::nan("");
    t.slope_ci = {std::nan(""), std::nan("")};
  }
  std::vector<double> inv(n);
  for (int m : {1, 2}) {
    for (std::size_t r = 0; r < n; ++r) inv[r] = std::exp(-m * log_mass[r]);
    NegativeMoment nm;
    nm.m = m;
    nm.estimate = std::accumulate(inv.begin(), inv.end(), 0.0) / static_cast<double>(n);
    nm.se = batch_means_se(inv, opt.batches);
    t.negative_moments.push_back(nm);
  }
  return t;
}

DimensionFit support_box_dimension(const GmcMeasure& measure, double mass_fraction, std::span<const int> levels) {
  if (!(mass_fraction > 0.0 && mass_fraction < 1.0)) fail(ErrorCode::InvalidArgument, "mass fraction must lie in (0, 1)");
  const Grid& g = *measure.grid;
  const double total = measure.total();
  if (!(total > 0.0)) fail(ErrorCode::DegenerateMeasure, "measure has no mass");
  const double biggest = *std::max_element(measure.cell_mass.begin(), measure.cell_mass.end());
  if (biggest >= mass_fraction * total) fail(ErrorCode::DegenerateMeasure, "a single cell carries the mass fraction");

  const int res = g.side_cells();
  std::vector<int> ks(levels.begin(), levels.end());
  if (ks.empty()) {
    int max_level = 0;
    while ((2 << max_level) <= res) ++max_level;
    for (int k = 1; k < max_level; ++k) ks.push_back(k);
  }
  DimensionFit d;
  std::vector<double> x, y;
  for (int k : ks) {
    if (k < 0 || (1 << k) > res) fail(ErrorCode::InvalidArgument, "box level finer than the grid");
    const int boxes = 1 << k;
    std::vector<double> mass(static_cast<std::size_t>(boxes) * boxes, 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const int bc = static_cast<int>(static_cast<long>(g.column(i)) * boxes / res);
      const int br = static_cast<int>(static_cast<long>(g.row(i)) * boxes / res);
      mass[static_cast<std::size_t>(br) * boxes + bc] += measure.cell_mass[i];
    }
    std::sort(mass.begin(), mass.end(), std::greater<>());
    const double target = mass_fraction * total;
    double acc = 0.0;
    std::size_t count = 0;
    while (count < mass.size() && acc < target) acc += mass[count++];
    d.levels.push_back(k);
    d.counts.push_back(count);
    x.push_back(k * std::log(2.0));
    y.push_back(std::log(static_cast<double>(count)));
  }
  if (x.size() < 2) fail(ErrorCode::InvalidArgument, "need at least two box levels");
  d.fit = fit_line(x, y);
  d.dimension = d.fit.slope;
  d.ci = {d.dimension - 1.959963984540054 * d.fit.slope_se, d.dimension + 1.959963984540054 * d.fit.slope_se};
  return d;
}

CauchyResult cauchy_diagnostic(const DomainSpec& domain, double eps, double eps_prime, double gamma,
                               const std::function<double(Point)>& f, std::uint64_t master_seed,
                               const MomentOptions& opt) {
  if (!(std::abs(gamma) < std::sqrt(2.0))) fail(ErrorCode::OutOfL2Regime, "Cauchy diagnostic needs |gamma| < sqrt 2");
  if (!(eps > 0.0 && eps_prime > 0.0)) fail(ErrorCode::InvalidArgument, "radii must be positive");
  if (domain.boundary_margin < std::max(eps, eps_prime) * (1.0 - 1e-12))
    fail(ErrorCode::CircleLeavesDomain, "boundary margin is smaller than the averaging radii");
  const Grid grid(domain);
  const std::size_t cells = grid.size();
  CauchyResult res;
  res.eps = eps;
  res.eps_prime = eps_prime;
  res.cells = cells;
  res.n_replicas = opt.n_replicas;
  if (eps == eps_prime || gamma == 0.0) return res;

  const KernelEval kernel(domain.kind);
  std::vector<JointCircleSampler::Probe> probes;
  for (const Point z : grid.points()) probes.push_back({z, eps});
  for (const Point z : grid.points()) probes.push_back({z, eps_prime});
  const JointCircleSampler js(kernel, std::move(probes), master_seed);
  const Eigen::MatrixXd& c = js.covariance_matrix();
  const double a = grid.cell_area();
  std::vector<double> fw(cells);
  for (std::size_t i = 0; i < cells; ++i) fw[i] = f(grid.point(i)) * a;

  const double g2 = gamma * gamma;
  double oracle = 0.0;
  for (std::size_t i = 0; i < cells; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < cells; ++j) {
      const auto I = static_cast<Eigen::Index>(i), J = static_cast<Eigen::Index>(j);
      const auto n = static_cast<Eigen::Index>(cells);
      row += fw[j] * (std::exp(g2 * c(I, J)) + std::exp(g2 * c(n + I, n + J)) - 2.0 * std::exp(g2 * c(I, n + J)));
    }
    oracle += fw[i] * row;
  }
  res.oracle = oracle;

  const std::size_t n = opt.n_replicas;
  std::vector<double> sq(n);
  const double half = 0.5 * g2;
  parallel_chunks(n, 64, opt.workers, [&](std::size_t, std::size_t lo, std::size_t hi) {
    const std::size_t count = hi - lo;
    std::vector<double> batch(2 * cells * count);
    js.sample_values(opt.first_replica + lo, count, batch);
    for (std::size_t r = 0; r < count; ++r) {
      double m1 = 0.0, m2 = 0.0;
      for (std::size_t i = 0; i < cells; ++i) {
        m1 += fw[i] * std::exp(gamma * batch[i * count + r] - half * js.variance(i));
        m2 += fw[i] * std::exp(gamma * batch[(cells + i) * count + r] - half * js.variance(cells + i));
      }
      sq[lo + r] = (m1 - m2) * (m1 - m2);
    }
  });
  res.gap = std::accumulate(sq.begin(), sq.end(), 0.0) / static_cast<double>(n);
  res.se = batch_means_se(sq, opt.batches);
  return res;
}

}  // namespace gmclab
