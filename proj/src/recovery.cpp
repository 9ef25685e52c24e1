#include "gmclab/recovery.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gmclab/error.hpp"

namespace gmclab {

namespace {

// Closed-disc stencil: row offsets -k..k with half widths.
struct Stencil {
  int k = 0;
  std::vector<int> half;  // indexed by dk + k
};

Stencil make_stencil(double eps, double h) {
  const double rho = eps / h * (1.0 + 1e-9);
  Stencil s;
  s.k = static_cast<int>(std::floor(rho));
  for (int dk = -s.k; dk <= s.k; ++dk) s.half.push_back(static_cast<int>(std::floor(std::sqrt(rho * rho - dk * dk))));
  return s;
}

// Cells whose whole stencil is retained. Retained regions are convex, so the row
// endpoints decide.
std::vector<std::size_t> interior_cells(const Grid& g, const Stencil& s) {
  const int n = g.side_cells();
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const int c = g.column(i), r = g.row(i);
    bool ok = true;
    for (int dk = -s.k; dk <= s.k && ok; ++dk) {
      const int row = r + dk, w = s.half[dk + s.k];
      ok = row >= 0 && row < n && c - w >= 0 && c + w < n && g.index_of(c - w, row) >= 0 && g.index_of(c + w, row) >= 0;
    }
    if (ok) out.push_back(i);
  }
  return out;
}

// Lattice masses with a zero leading column, prefix-summed along rows.
void row_prefix(const Grid& g, std::span<const double> mass, std::vector<double>& prefix) {
  const int n = g.side_cells();
  prefix.assign(static_cast<std::size_t>(n) * (n + 1), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i)
    prefix[static_cast<std::size_t>(g.row(i)) * (n + 1) + g.column(i) + 1] = mass[i];
  for (int row = 0; row < n; ++row) {
    double* p = &prefix[static_cast<std::size_t>(row) * (n + 1)];
    for (int c = 1; c <= n; ++c) p[c] += p[c - 1];
  }
}

void ball_sums(const Grid& g, const std::vector<double>& prefix, const Stencil& s, std::span<const std::size_t> cells,
               std::span<double> out) {
  const std::size_t stride = static_cast<std::size_t>(g.side_cells()) + 1;
  for (std::size_t j = 0; j < cells.size(); ++j) {
    const int c = g.column(cells[j]), r = g.row(cells[j]);
    double acc = 0.0;
    for (int dk = -s.k; dk <= s.k; ++dk) {
      const double* p = &prefix[static_cast<std::size_t>(r + dk) * stride];
      const int w = s.half[dk + s.k];
      acc += p[c + w + 1] - p[c - w];
    }
    out[j] = acc;
  }
}

void check_eps(double eps, double h) {
  if (!(eps > 0.0)) fail(ErrorCode::InvalidArgument, "eps must be positive");
  if (eps < 4.0 * h * (1.0 - 1e-12)) fail(ErrorCode::UnsupportedRadius, "eps " + std::to_string(eps) + " is below 4 grid spacings");
}

}  // namespace

RecoveredField log_mass_field(const GmcMeasure& measure, double eps) {
  if (!measure.grid) fail(ErrorCode::InvalidArgument, "measure has no grid");
  if (measure.gamma == 0.0) fail(ErrorCode::InvalidArgument, "recovery needs gamma != 0");
  const Grid& g = *measure.grid;
  check_eps(eps, g.spacing());
  const Stencil s = make_stencil(eps, g.spacing());
  RecoveredField rf;
  rf.gamma = measure.gamma;
  rf.eps = eps;
  rf.grid = measure.grid;
  rf.cells = interior_cells(g, s);
  if (rf.cells.empty()) fail(ErrorCode::EmptyBall, "no eps-ball fits inside the retained region");
  std::vector<double> prefix;
  row_prefix(g, measure.cell_mass, prefix);
  rf.m_eps.resize(rf.cells.size());
  ball_sums(g, prefix, s, rf.cells, rf.m_eps);
  for (double& v : rf.m_eps) v = std::log(v) / rf.gamma;
  return rf;
}

void center_recovered(RecoveredField& rf, std::span<const double> mean) {
  if (mean.size() != rf.m_eps.size()) fail(ErrorCode::InvalidArgument, "mean does not match the recovered cells");
  rf.centered.resize(rf.m_eps.size());
  for (std::size_t j = 0; j < rf.m_eps.size(); ++j) rf.centered[j] = rf.m_eps[j] - mean[j];
}

double Bump::operator()(Point z) const noexcept {
  const double t = std::norm(z - center) / (radius * radius);
  if (t >= 1.0) return 0.0;
  return amplitude * std::exp(1.0 - 1.0 / (1.0 - t));
}

std::vector<Bump> default_bumps() {
  return {{Point(0.5, 0.5), 0.2, 1.0}, {Point(0.4, 0.6), 0.1, 1.0}, {Point(0.6, 0.42), 0.06, 1.0}};
}

RecoveryResult recovery_residual(const FieldSampler& sampler, double gamma, std::span<const double> eps_ladder,
                                 std::span<const Bump> bumps, const RecoveryOptions& opt) {
  check_subcritical(gamma);
  if (gamma == 0.0) fail(ErrorCode::InvalidArgument, "recovery needs gamma != 0");
  if (!sampler.basis()) fail(ErrorCode::UnsupportedScheme, "recovery needs circle averages at several radii (eigen scheme)");
  if (eps_ladder.size() < 2) fail(ErrorCode::InvalidArgument, "eps ladder needs at least 2 values");
  if (bumps.empty()) fail(ErrorCode::InvalidArgument, "no test functions");
  if (opt.n_replicas < 2) fail(ErrorCode::InvalidArgument, "need at least two replicas");
  const Grid& g = sampler.grid();
  const double h = g.spacing();
  for (double e : eps_ladder) {
    check_eps(e, h);
    if (e > g.spec().boundary_margin + 1e-15) fail(ErrorCode::CircleLeavesDomain, "eps exceeds the boundary margin");
  }

  const std::size_t ne = eps_ladder.size(), nb = bumps.size(), n = opt.n_replicas;
  std::vector<Stencil> stencils;
  for (double e : eps_ladder) stencils.push_back(make_stencil(e, h));
  // common analysis cells: those of the widest stencil
  const double emax = *std::max_element(eps_ladder.begin(), eps_ladder.end());
  const std::vector<std::size_t> cells = interior_cells(g, make_stencil(emax, h));
  if (cells.empty()) fail(ErrorCode::EmptyBall, "no eps-ball fits inside the retained region");
  const std::size_t nc = cells.size();

  std::vector<double> fvals(nb * nc);
  for (std::size_t b = 0; b < nb; ++b) {
    double inside = 0.0, total = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) total += std::abs(bumps[b](g.point(i)));
    for (std::size_t j = 0; j < nc; ++j) {
      fvals[b * nc + j] = bumps[b](g.point(cells[j])) * g.cell_area();
      inside += std::abs(fvals[b * nc + j]);
    }
    if (std::abs(total * g.cell_area() - inside) > 1e-12 * (1.0 + inside))
      fail(ErrorCode::InvalidArgument, "test function support leaves the analysis region");
  }

  const std::size_t chunk = std::max<std::size_t>(8, (n + 31) / 32);
  const std::size_t nchunks = (n + chunk - 1) / chunk;
  const std::size_t block = ne * nc;

  // m_eps for one replica, eps-major
  auto log_masses = [&](const FieldSample& field, std::vector<double>& mass, std::vector<double>& prefix,
                        std::span<double> out) {
    cell_masses(field.values, sampler.variances(), gamma, g.cell_area(), mass);
    row_prefix(g, mass, prefix);
    for (std::size_t e = 0; e < ne; ++e) {
      std::span<double> m = out.subspan(e * nc, nc);
      ball_sums(g, prefix, stencils[e], cells, m);
      for (double& v : m) v = std::log(v) / gamma;
    }
  };

  // pass 1: pointwise centering
  std::vector<double> chunk_sums(nchunks * block, 0.0);
  parallel_chunks(n, chunk, opt.workers, [&](std::size_t c, std::size_t lo, std::size_t hi) {
    std::vector<double> mass(g.size()), prefix, m(block);
    double* acc = &chunk_sums[c * block];
    for (std::size_t r = lo; r < hi; ++r) {
      log_masses(sampler.sample(opt.first_replica + r), mass, prefix, m);
      for (std::size_t k = 0; k < block; ++k) acc[k] += m[k];
    }
  });
  std::vector<double> mean(block, 0.0);
  for (std::size_t c = 0; c < nchunks; ++c)
    for (std::size_t k = 0; k < block; ++k) mean[k] += chunk_sums[c * block + k];
  for (double& v : mean) v /= static_cast<double>(n);

  // pass 2: residuals R = Gamma_eps - (m_eps - mean)
  std::vector<double> chunk_r(nchunks * block, 0.0), chunk_r2(nchunks * block, 0.0);
  std::vector<double> pairing(n * ne * nb), products(n * ne * 3);
  parallel_chunks(n, chunk, opt.workers, [&](std::size_t c, std::size_t lo, std::size_t hi) {
    std::vector<double> mass(g.size()), prefix, m(block);
    double* s1 = &chunk_r[c * block];
    double* s2 = &chunk_r2[c * block];
    for (std::size_t r = lo; r < hi; ++r) {
      const FieldSample field = sampler.sample(opt.first_replica + r);
      log_masses(field, mass, prefix, m);
      for (std::size_t e = 0; e < ne; ++e) {
        const std::vector<double> avg = sampler.grid_circle_average(field, eps_ladder[e]);
        double gc = 0.0, gg = 0.0, cc = 0.0;
        double* pr = &pairing[(r * ne + e) * nb];
        for (std::size_t j = 0; j < nc; ++j) {
          const std::size_t k = e * nc + j;
          const double gam = avg[cells[j]], cen = m[k] - mean[k], res = gam - cen;
          gc += gam * cen;
          gg += gam * gam;
          cc += cen * cen;
          s1[k] += res;
          s2[k] += res * res;
          for (std::size_t b = 0; b < nb; ++b) pr[b] += res * fvals[b * nc + j];
        }
        double* pp = &products[(r * ne + e) * 3];
        pp[0] = gc;
        pp[1] = gg;
        pp[2] = cc;
      }
    }
  });

  RecoveryResult out;
  out.gamma = gamma;
  out.cells = nc;
  out.n_replicas = n;
  const double dn = static_cast<double>(n);
  const std::size_t nbatch = std::min(opt.batches, n);
  std::vector<double> xs, ys;
  for (std::size_t e = 0; e < ne; ++e) {
    EpsProfile p;
    p.eps = eps_ladder[e];
    double msum = 0.0, vsum = 0.0, vmax = 0.0;
    for (std::size_t j = 0; j < nc; ++j) {
      const std::size_t k = e * nc + j;
      double a = 0.0, a2 = 0.0;
      for (std::size_t c = 0; c < nchunks; ++c) {
        a += chunk_r[c * block + k];
        a2 += chunk_r2[c * block + k];
      }
      const double mu = a / dn, var = std::max(0.0, a2 / dn - mu * mu);
      msum += mean[k];
      vsum += var;
      vmax = std::max(vmax, var);
    }
    p.mean_m = msum / static_cast<double>(nc);
    p.mean_variance = vsum / static_cast<double>(nc);
    p.max_variance = vmax;
    // pooled correlation, batch-means error
    double a = 0.0, b2 = 0.0, c2 = 0.0;
    std::vector<double> batch_corr;
    for (std::size_t bi = 0; bi < nbatch; ++bi) {
      const std::size_t lo = bi * n / nbatch, hi = (bi + 1) * n / nbatch;
      double ba = 0.0, bb = 0.0, bc = 0.0;
      for (std::size_t r = lo; r < hi; ++r) {
        const double* pp = &products[(r * ne + e) * 3];
        ba += pp[0];
        bb += pp[1];
        bc += pp[2];
      }
      a += ba;
      b2 += bb;
      c2 += bc;
      batch_corr.push_back(ba / std::sqrt(bb * bc));
    }
    p.correlation = a / std::sqrt(b2 * c2);
    if (nbatch > 1) {
      double s = 0.0;
      for (double v : batch_corr) s += v;
      const double mu = s / static_cast<double>(nbatch);
      double ss = 0.0;
      for (double v : batch_corr) ss += (v - mu) * (v - mu);
      p.correlation_se = std::sqrt(ss / static_cast<double>(nbatch - 1) / static_cast<double>(nbatch));
    }
    out.profiles.push_back(p);
    xs.push_back(std::log(p.eps));
    ys.push_back(p.mean_m);

    for (std::size_t b = 0; b < nb; ++b) {
      std::vector<double> sq(n);
      for (std::size_t r = 0; r < n; ++r) {
        const double v = pairing[(r * ne + e) * nb + b];
        sq[r] = v * v;
      }
      PairingStat ps;
      ps.eps = p.eps;
      ps.bump = b;
      for (double v : sq) ps.second_moment += v;
      ps.second_moment /= dn;
      ps.se = batch_means_se(sq, nbatch);
      out.pairings.push_back(ps);
    }
  }
  out.centering = fit_line(xs, ys);
  out.variance_ratio = out.profiles.back().mean_variance / out.profiles.front().mean_variance;
  return out;
}

}  // namespace gmclab
