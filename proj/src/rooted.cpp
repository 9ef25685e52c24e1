#include "gmclab/rooted.hpp"

#include <algorithm>
#include <cmath>

#include "gmclab/error.hpp"
#include "gmclab/gmc.hpp"
#include "gmclab/stats.hpp"

namespace gmclab {

namespace {

constexpr std::uint64_t kRootSalt = 0x526F6F74ULL;

std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
}

double bump(Point z, Point c, double rho) {
  const double t = std::norm(z - c) / (rho * rho);
  return t < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - t)) : 0.0;
}

}  // namespace

const char* route_name(RootRoute route) noexcept { return route == RootRoute::Shift ? "shift" : "size-biased"; }

RootedSample sample_rooted_at(const FieldSampler& sampler, double gamma, std::size_t root, std::uint64_t replica) {
  check_subcritical(gamma);
  if (root >= sampler.grid().size()) fail(ErrorCode::InvalidArgument, "root index outside the grid");
  RootedSample r;
  r.route = RootRoute::Shift;
  r.gamma = gamma;
  r.root_index = root;
  r.root = sampler.grid().point(root);
  r.field = sampler.shift_by_covariance(sampler.sample(replica), root, gamma);
  return r;
}

RootedSample sample_rooted(const FieldSampler& sampler, double gamma, RootRoute route, std::uint64_t replica) {
  check_subcritical(gamma);
  const std::size_t n = sampler.grid().size();
  Rng rng(stream_seed(replica_seed(sampler.config().master_seed, replica), kRootSalt));
  if (route == RootRoute::Shift) return sample_rooted_at(sampler, gamma, uniform_index(rng, n), replica);

  RootedSample r;
  r.route = RootRoute::SizeBiased;
  r.gamma = gamma;
  r.field = sampler.sample(replica);
  const GmcMeasure m = build_measure(r.field, gamma);
  const double total = m.total();
  const double target = uniform01(rng) * total;
  double acc = 0.0;
  std::size_t pick = n - 1;
  for (std::size_t i = 0; i < n; ++i) {
    acc += m.cell_mass[i];
    if (acc > target) {
      pick = i;
      break;
    }
  }
  r.root_index = pick;
  r.root = sampler.grid().point(pick);
  r.importance_weight = total / sampler.grid().area();
  return r;
}

Functional pointwise_functional(std::string name, std::function<double(double value, Point z)> f) {
  Functional fn;
  fn.name = std::move(name);
  fn.eval = [f = std::move(f)](const FieldSample& field, std::span<const std::size_t> cells, std::span<double> out) {
    for (std::size_t k = 0; k < cells.size(); ++k) out[k] = f(field.values[cells[k]], field.grid->point(cells[k]));
  };
  return fn;
}

std::vector<Functional> default_battery(Point z0, Point bump_center, double bump_radius) {
  std::vector<Functional> out;
  out.push_back(pointwise_functional("field", [](double v, Point) { return v; }));
  out.push_back(pointwise_functional("tanh_field", [](double v, Point) { return std::tanh(v); }));
  out.push_back(pointwise_functional("gaussian_weight", [](double, Point z) { return std::exp(-std::norm(z)); }));
  Functional fixed;
  fixed.name = "field_at_z0";
  fixed.eval = [z0](const FieldSample& field, std::span<const std::size_t> cells, std::span<double> out) {
    const std::ptrdiff_t idx = field.grid->nearest(z0);
    if (idx < 0) fail(ErrorCode::OutOfDomain, "z0 is not in a retained cell");
    std::fill_n(out.begin(), cells.size(), field.values[static_cast<std::size_t>(idx)]);
  };
  out.push_back(std::move(fixed));
  Functional pairing;
  pairing.name = "tanh_bump_pairing";
  pairing.eval = [bump_center, bump_radius](const FieldSample& field, std::span<const std::size_t> cells,
                                            std::span<double> out) {
    double s = 0.0;
    for (std::size_t i = 0; i < field.values.size(); ++i)
      s += field.values[i] * bump(field.grid->point(i), bump_center, bump_radius);
    std::fill_n(out.begin(), cells.size(), std::tanh(s * field.grid->cell_area()));
  };
  out.push_back(std::move(pairing));
  return out;
}

std::vector<CharacterizationRow> characterization_gap(const FieldSampler& sampler, double gamma,
                                                      std::span<const Functional> functionals,
                                                      const CharacterizationOptions& opt) {
  check_subcritical(gamma);
  if (opt.n_replicas < 2) fail(ErrorCode::InvalidArgument, "need at least two replicas");
  if (opt.roots_per_replica < 1) fail(ErrorCode::InvalidArgument, "need at least one root per replica");
  const Grid& g = sampler.grid();
  const std::size_t cells = g.size(), nf = functionals.size(), n = opt.n_replicas;
  const double area = g.area();
  std::vector<double> lhs(n * nf), rhs(n * nf);
  std::vector<std::size_t> clipped_chunks;
  const std::size_t chunk = 32;
  clipped_chunks.assign((n + chunk - 1) / chunk, 0);

  std::vector<std::size_t> all(cells);
  for (std::size_t i = 0; i < cells; ++i) all[i] = i;

  parallel_chunks(n, chunk, opt.workers, [&](std::size_t c, std::size_t lo, std::size_t hi) {
    auto clip = [&](double v) {
      if (std::abs(v) > opt.clip) {
        ++clipped_chunks[c];
        return std::copysign(opt.clip, v);
      }
      return v;
    };
    std::vector<double> fvals(cells), mass(cells);
    for (std::size_t r = lo; r < hi; ++r) {
      // size-biased summation over every cell
      const FieldSample field = sampler.sample(r);
      cell_masses(field.values, *field.variances, gamma, g.cell_area(), mass);
      for (std::size_t f = 0; f < nf; ++f) {
        functionals[f].eval(field, all, fvals);
        double s = 0.0;
        for (std::size_t i = 0; i < cells; ++i) s += clip(fvals[i]) * mass[i];
        lhs[r * nf + f] = s;
      }
      // shift route with uniform roots on an independent replica
      const std::uint64_t rep = n + r;
      const FieldSample base = sampler.sample(rep);
      Rng rng(stream_seed(replica_seed(sampler.config().master_seed, rep), kRootSalt));
      std::vector<double> acc(nf, 0.0);
      double one = 0.0;
      for (std::size_t k = 0; k < opt.roots_per_replica; ++k) {
        const std::size_t root = uniform_index(rng, cells);
        const FieldSample shifted = sampler.shift_by_covariance(base, root, gamma);
        const std::size_t idx[] = {root};
        for (std::size_t f = 0; f < nf; ++f) {
          functionals[f].eval(shifted, idx, std::span<double>(&one, 1));
          acc[f] += clip(one);
        }
      }
      for (std::size_t f = 0; f < nf; ++f) rhs[r * nf + f] = area * acc[f] / static_cast<double>(opt.roots_per_replica);
    }
  });

  std::vector<CharacterizationRow> rows(nf);
  std::size_t clipped = 0;
  for (std::size_t c : clipped_chunks) clipped += c;
  for (std::size_t f = 0; f < nf; ++f) {
    RunningStats l, rr;
    for (std::size_t r = 0; r < n; ++r) {
      l.add(lhs[r * nf + f]);
      rr.add(rhs[r * nf + f]);
    }
    CharacterizationRow& row = rows[f];
    row.name = functionals[f].name;
    row.lhs = l.mean;
    row.lhs_se = l.se();
    row.rhs = rr.mean;
    row.rhs_se = rr.se();
    row.pooled_se = std::sqrt(row.lhs_se * row.lhs_se + row.rhs_se * row.rhs_se);
    row.z_score = row.pooled_se > 0.0 ? (row.lhs - row.rhs) / row.pooled_se : 0.0;
    row.clipped = clipped;
  }
  return rows;
}

std::vector<ThicknessPoint> thickness_trajectory(const RootedSample& rooted, std::span<const double> ladder) {
  const FieldSample& f = rooted.field;
  if (f.scheme.kind != SchemeKind::EigenTruncation || f.amplitudes.empty())
    fail(ErrorCode::UnsupportedScheme, "thickness trajectories need the eigen scheme");
  const double log_cr = std::log(KernelEval(f.grid->spec().kind).conformal_radius(rooted.root));
  std::vector<ThicknessPoint> out;
  out.reserve(ladder.size());
  for (const double nu : ladder) {
    if (!(nu > 0.0 && nu < 1.0)) fail(ErrorCode::InvalidArgument, "ladder radii must lie in (0, 1)");
    ThicknessPoint p;
    p.nu = nu;
    p.circle_average = circle_average_eval(f, rooted.root, nu);
    p.normalized = p.circle_average / -std::log(nu);
    p.brownian_time = -std::log(nu) + log_cr;
    if (!(p.brownian_time > 0.0)) fail(ErrorCode::InvalidArgument, "ladder radius exceeds the conformal radius at the root");
    p.time_normalized = p.circle_average / p.brownian_time;
    out.push_back(p);
  }
  return out;
}

}  // namespace gmclab
