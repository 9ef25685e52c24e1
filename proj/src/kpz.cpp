#include "gmclab/kpz.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "gmclab/error.hpp"

namespace gmclab {

namespace {

constexpr double kZ95 = 1.959963984540054;

double box_distance(Point z, double x0, double y0, double s) {
  const double dx = std::max({x0 - z.real(), 0.0, z.real() - (x0 + s)});
  const double dy = std::max({y0 - z.imag(), 0.0, z.imag() - (y0 + s)});
  return std::hypot(dx, dy);
}

void dust_distance(Point z, double x0, double y0, double s, int depth, double& best) {
  const double d = box_distance(z, x0, y0, s);
  if (d >= best) return;
  if (depth == 0) {
    best = d;
    return;
  }
  const double t = s / 3.0;
  // nearer children first so pruning bites early
  std::array<std::pair<double, Point>, 4> kids;
  int k = 0;
  for (const double ox : {0.0, 2.0 * t})
    for (const double oy : {0.0, 2.0 * t}) {
      kids[k] = {box_distance(z, x0 + ox, y0 + oy, t), Point(x0 + ox, y0 + oy)};
      ++k;
    }
  std::sort(kids.begin(), kids.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [bd, o] : kids)
    if (bd < best) dust_distance(z, o.real(), o.imag(), t, depth - 1, best);
}

Point domain_center(DomainKind kind) {
  return kind == DomainKind::UnitDisk ? Point(0.0, 0.0) : Point(0.5, 0.5);
}

// Retained cells sorted by distance from z, truncated where a ball would reach a
// lattice cell that is not retained or leave the domain.
struct BallOrder {
  std::vector<std::size_t> cells;
  std::vector<double> dist;
};

BallOrder ball_order(const Grid& g, Point z) {
  const int n = g.side_cells();
  double limit = distance_to_boundary(g.spec().kind, z);
  for (int row = 0; row < n; ++row)
    for (int col = 0; col < n; ++col)
      if (g.index_of(col, row) < 0) limit = std::min(limit, std::abs(g.cell_center(col, row) - z));
  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double d = std::abs(g.point(i) - z);
    if (d < limit) order.emplace_back(d, i);
  }
  std::sort(order.begin(), order.end());
  BallOrder b;
  b.cells.reserve(order.size());
  b.dist.reserve(order.size());
  for (const auto& [d, i] : order) {
    b.cells.push_back(i);
    b.dist.push_back(d);
  }
  return b;
}

// Index into b of the first prefix sum reaching r_mass, or -1.
std::ptrdiff_t first_reaching(const BallOrder& b, std::span<const double> mass, double r_mass) {
  double acc = 0.0;
  for (std::size_t k = 0; k < b.cells.size(); ++k) {
    acc += mass[b.cells[k]];
    if (acc >= r_mass) return static_cast<std::ptrdiff_t>(k);
  }
  return -1;
}

ScalingFit finish_fit(std::vector<ScalingPoint> pts) {
  ScalingFit out;
  std::vector<double> x, y, s;
  bool weighted = true;
  for (const auto& p : pts) {
    x.push_back(std::log(p.x));
    y.push_back(std::log(p.estimate));
    s.push_back(p.se / p.estimate);
    if (!(p.se > 0.0)) weighted = false;
  }
  out.fit = weighted ? fit_line(x, y, s) : fit_line(x, y);
  out.ci = {out.fit.slope - kZ95 * out.fit.slope_se, out.fit.slope + kZ95 * out.fit.slope_se};
  out.points = std::move(pts);
  return out;
}

ScalingPoint summarize(double x, const std::vector<double>& values, std::size_t batches) {
  ScalingPoint p;
  p.x = x;
  p.estimate = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  p.se = batch_means_se(values, batches);
  return p;
}

void check_ladder(std::span<const double> xs, const char* what) {
  if (xs.size() < 3) fail(ErrorCode::InvalidArgument, std::string(what) + " ladder needs at least 3 values");
  for (double x : xs)
    if (!(x > 0.0)) fail(ErrorCode::InvalidArgument, std::string(what) + " ladder values must be positive");
}

}  // namespace

const char* fractal_name(FractalKind kind) noexcept {
  switch (kind) {
    case FractalKind::Point: return "point";
    case FractalKind::Segment: return "segment";
    case FractalKind::CantorDust: return "cantor-dust";
  }
  return "unknown";
}

FractalSpec FractalSpec::point(Point z) {
  FractalSpec f;
  f.kind = FractalKind::Point;
  f.a = f.b = z;
  f.analytic_ds = 2.0;
  return f;
}

FractalSpec FractalSpec::segment(Point from, Point to) {
  if (from == to) fail(ErrorCode::CoincidentPoints, "segment endpoints coincide");
  FractalSpec f;
  f.kind = FractalKind::Segment;
  f.a = from;
  f.b = to;
  f.analytic_ds = 1.0;
  return f;
}

FractalSpec FractalSpec::cantor_dust(Point origin, double side, int depth) {
  if (!(side > 0.0) || depth < 0) fail(ErrorCode::InvalidArgument, "dust needs a positive side and depth >= 0");
  FractalSpec f;
  f.kind = FractalKind::CantorDust;
  f.a = origin;
  f.b = origin + Point(side, side);
  f.side = side;
  f.depth = depth;
  f.analytic_ds = depth == 0 ? 0.0 : 2.0 - 2.0 * std::log(2.0) / std::log(3.0);
  return f;
}

double FractalSpec::distance(Point z) const {
  switch (kind) {
    case FractalKind::Point: return std::abs(z - a);
    case FractalKind::Segment: {
      const Point d = b - a;
      const double t = std::clamp(((z - a) * std::conj(d)).real() / std::norm(d), 0.0, 1.0);
      return std::abs(z - (a + t * d));
    }
    case FractalKind::CantorDust: {
      double best = std::numeric_limits<double>::infinity();
      dust_distance(z, a.real(), a.imag(), side, depth, best);
      return best;
    }
  }
  return 0.0;
}

double FractalSpec::clearance(DomainKind domain) const {
  // distance to the boundary of a convex domain is concave, so the minimum over
  // the convex hull sits at a vertex
  switch (kind) {
    case FractalKind::Point: return distance_to_boundary(domain, a);
    case FractalKind::Segment: return std::min(distance_to_boundary(domain, a), distance_to_boundary(domain, b));
    case FractalKind::CantorDust:
      return std::min({distance_to_boundary(domain, a), distance_to_boundary(domain, b),
                       distance_to_boundary(domain, Point(a.real(), b.imag())),
                       distance_to_boundary(domain, Point(b.real(), a.imag()))});
  }
  return 0.0;
}

double quantum_radius(const GmcMeasure& measure, Point z, double r_mass) {
  if (!measure.grid) fail(ErrorCode::InvalidArgument, "measure has no grid");
  if (!(r_mass > 0.0)) fail(ErrorCode::InvalidArgument, "quantum mass must be positive");
  const BallOrder b = ball_order(*measure.grid, z);
  const std::ptrdiff_t k = first_reaching(b, measure.cell_mass, r_mass);
  if (k < 0) fail(ErrorCode::MassUnreachable, "mass " + std::to_string(r_mass) + " is not reachable inside the retained region");
  return b.dist[static_cast<std::size_t>(k)];
}

ScalingFit euclidean_scaling_dim(const Grid& grid, const FractalSpec& fractal, std::span<const double> radii) {
  check_ladder(radii, "radius");
  const double h = grid.spacing();
  const double rmax = *std::max_element(radii.begin(), radii.end());
  for (double r : radii)
    if (r < 4.0 * h * (1.0 - 1e-12)) fail(ErrorCode::WindowTooNarrow, "radius " + std::to_string(r) + " is below 4 grid spacings");
  if (fractal.clearance(grid.spec().kind) - grid.spec().boundary_margin < rmax)
    fail(ErrorCode::WindowTooNarrow, "largest neighborhood leaves the retained region");
  std::vector<double> dist(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) dist[i] = fractal.distance(grid.point(i));
  std::vector<ScalingPoint> pts;
  for (double r : radii) {
    const auto count = std::count_if(dist.begin(), dist.end(), [r](double d) { return d <= r; });
    if (count == 0) fail(ErrorCode::WindowTooNarrow, "no cell center within " + std::to_string(r) + " of the set");
    pts.push_back({r, static_cast<double>(count) * grid.cell_area(), 0.0});
  }
  return finish_fit(std::move(pts));
}

ScalingFit gmc_scaling_dim(const FieldSampler& sampler, double gamma, const FractalSpec& fractal,
                           std::span<const double> r_masses, const KpzOptions& opt) {
  check_subcritical(gamma);
  check_ladder(r_masses, "mass");
  if (opt.n_replicas < 2) fail(ErrorCode::InvalidArgument, "need at least two replicas");
  const Grid& g = sampler.grid();
  const double h = g.spacing();
  const double rmin = *std::min_element(r_masses.begin(), r_masses.end());
  const double rmax = *std::max_element(r_masses.begin(), r_masses.end());
  // Lebesgue-equivalent radii of the ladder ends
  if (std::sqrt(rmin / std::numbers::pi) < 4.0 * h * (1.0 - 1e-12))
    fail(ErrorCode::WindowTooNarrow, "smallest quantum mass is below the 4-spacing floor");

  const int side = g.side_cells();
  const std::size_t cells = g.size(), nr = r_masses.size(), n = opt.n_replicas;
  std::vector<double> rho2(cells);
  bool covers = true;
  for (std::size_t i = 0; i < cells; ++i) {
    const double d = fractal.distance(g.point(i)) / h;
    rho2[i] = d * d * (1.0 - 1e-9);
    covers = covers && d == 0.0;
  }
  // when the set covers every cell no quantum ball is ever needed
  if (!covers && std::sqrt(rmax / std::numbers::pi) > fractal.clearance(g.spec().kind) - g.spec().boundary_margin)
    fail(ErrorCode::WindowTooNarrow, "largest quantum mass reaches the boundary margin");
  std::vector<double> sums(n * nr, 0.0);
  const std::size_t chunk = 8;
  parallel_chunks(n, chunk, opt.workers, [&](std::size_t, std::size_t lo, std::size_t hi) {
    const std::size_t count = hi - lo;
    std::vector<double> batch(cells * count), mass(cells), vals(cells);
    // lattice masses with a zero border column so row prefixes need no bounds checks
    std::vector<double> prefix(static_cast<std::size_t>(side) * (side + 1));
    sampler.sample_values(opt.first_replica + lo, count, batch);
    for (std::size_t r = 0; r < count; ++r) {
      for (std::size_t i = 0; i < cells; ++i) vals[i] = batch[i * count + r];
      cell_masses(vals, sampler.variances(), gamma, g.cell_area(), mass);
      std::fill(prefix.begin(), prefix.end(), 0.0);
      for (std::size_t i = 0; i < cells; ++i)
        prefix[static_cast<std::size_t>(g.row(i)) * (side + 1) + g.column(i) + 1] = mass[i];
      for (int row = 0; row < side; ++row) {
        double* p = &prefix[static_cast<std::size_t>(row) * (side + 1)];
        for (int c = 1; c <= side; ++c) p[c] += p[c - 1];
      }
      double* out = &sums[(lo + r) * nr];
      for (std::size_t i = 0; i < cells; ++i) {
        // mass of the open disc of radius dist(z, X) around z
        const int cz = g.column(i), rz = g.row(i);
        const double q2 = rho2[i];
        double disc = 0.0;
        for (int k = 0; k * k < q2 && disc < rmax; ++k) {
          const int m = static_cast<int>(std::floor(std::sqrt(q2 - k * k)));
          const int half = (m * m + k * k < q2) ? m : m - 1;
          if (half < 0) continue;
          const int c0 = std::max(0, cz - half), c1 = std::min(side - 1, cz + half);
          auto add_row = [&](int row) {
            if (row < 0 || row >= side) return;
            const double* p = &prefix[static_cast<std::size_t>(row) * (side + 1)];
            disc += p[c1 + 1] - p[c0];
          };
          add_row(rz + k);
          if (k > 0) add_row(rz - k);
        }
        for (std::size_t b = 0; b < nr; ++b)
          if (disc < r_masses[b]) out[b] += mass[i];
      }
    }
  });

  std::vector<ScalingPoint> pts;
  std::vector<double> col(n);
  for (std::size_t b = 0; b < nr; ++b) {
    for (std::size_t r = 0; r < n; ++r) col[r] = sums[r * nr + b];
    pts.push_back(summarize(r_masses[b], col, opt.batches));
  }
  return finish_fit(std::move(pts));
}

double kpz_theta(double q, double gamma) noexcept {
  const double g2 = gamma * gamma;
  return (2.0 - g2 / 2.0) * q + g2 * q * q / 2.0;
}

double kpz_solve_qs(double ds, double gamma) {
  if (!(ds >= 0.0 && ds <= 2.0)) fail(ErrorCode::InvalidArgument, "d_s must lie in [0, 2]");
  const double g2 = gamma * gamma;
  const double b = 2.0 - g2 / 2.0;
  return 2.0 * ds / (b + std::sqrt(b * b + 2.0 * g2 * ds));
}

KpzResidual kpz_residual(double ds, double qs, double gamma) noexcept {
  KpzResidual r;
  r.theta = kpz_theta(qs, gamma);
  r.residual = ds - r.theta;
  return r;
}

KpzResult kpz_result(double gamma, const FractalSpec& fractal, const ScalingFit& ds, const ScalingFit& qs) {
  KpzResult k;
  k.gamma = gamma;
  k.fractal = fractal.kind;
  k.ds_est = ds.fit.slope;
  k.ds_ci = ds.ci;
  k.qs_est = qs.fit.slope;
  k.qs_ci = qs.ci;
  const KpzResidual r = kpz_residual(k.ds_est, k.qs_est, gamma);
  k.quadratic_residual = r.residual;
  k.theta = r.theta;
  const double dtheta = 2.0 - gamma * gamma / 2.0 + gamma * gamma * k.qs_est;
  k.residual_se = std::hypot(ds.fit.slope_se, dtheta * qs.fit.slope_se);
  k.qs_analytic = kpz_solve_qs(fractal.analytic_ds, gamma);
  return k;
}

RadiusMoments rooted_radius_moments(const FieldSampler& sampler, double gamma, double q,
                                    std::span<const double> r_masses, const KpzOptions& opt) {
  check_subcritical(gamma);
  check_ladder(r_masses, "mass");
  if (opt.n_replicas < 2) fail(ErrorCode::InvalidArgument, "need at least two replicas");
  const Grid& g = sampler.grid();
  const std::ptrdiff_t root_idx = g.nearest(domain_center(g.spec().kind));
  if (root_idx < 0) fail(ErrorCode::OutOfDomain, "domain center is not a retained cell");
  const std::size_t root = static_cast<std::size_t>(root_idx);
  const BallOrder order = ball_order(g, g.point(root));
  const std::vector<double> shift = sampler.covariance_row(root);

  RadiusMoments out;
  out.q = q;
  out.power = kpz_theta(q, gamma);
  const std::size_t cells = g.size(), nr = r_masses.size(), n = opt.n_replicas;
  std::vector<double> radius(n * nr);
  std::vector<int> failed((n + 7) / 8, 0);
  const std::size_t chunk = 8;
  parallel_chunks(n, chunk, opt.workers, [&](std::size_t c, std::size_t lo, std::size_t hi) {
    const std::size_t count = hi - lo;
    std::vector<double> batch(cells * count), vals(cells), mass(cells);
    sampler.sample_values(opt.first_replica + lo, count, batch);
    for (std::size_t r = 0; r < count; ++r) {
      for (std::size_t i = 0; i < cells; ++i) vals[i] = batch[i * count + r] + gamma * shift[i];
      cell_masses(vals, sampler.variances(), gamma, g.cell_area(), mass);
      for (std::size_t b = 0; b < nr; ++b) {
        const std::ptrdiff_t k = first_reaching(order, mass, r_masses[b]);
        if (k < 0) {
          failed[c] = 1;
          return;
        }
        radius[(lo + r) * nr + b] = order.dist[static_cast<std::size_t>(k)];
      }
    }
  });
  if (std::any_of(failed.begin(), failed.end(), [](int f) { return f != 0; }))
    fail(ErrorCode::MassUnreachable, "a quantum ball around the root reached the boundary margin");

  std::vector<ScalingPoint> pts;
  std::vector<double> col(n);
  for (std::size_t b = 0; b < nr; ++b) {
    for (std::size_t r = 0; r < n; ++r) {
      const double rad = radius[r * nr + b];
      if (rad == 0.0) ++out.zero_radius;
      col[r] = std::pow(rad, out.power);
    }
    pts.push_back(summarize(r_masses[b], col, opt.batches));
  }
  out.fit = finish_fit(std::move(pts));
  return out;
}

}  // namespace gmclab
