#include "gmclab/gmc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "gmclab/error.hpp"
#include "json.hpp"

namespace gmclab {

void check_subcritical(double gamma) {
  if (!(std::abs(gamma) < 2.0))
    fail(ErrorCode::SupercriticalGamma, "gamma must satisfy |gamma| < 2, got " + std::to_string(gamma));
}

void cell_masses(std::span<const double> values, std::span<const double> variances, double gamma, double area,
                 std::span<double> out) {
  const double half = 0.5 * gamma * gamma;
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = std::exp(gamma * values[i] - half * variances[i]) * area;
}

double GmcMeasure::total() const noexcept {
  double s = 0.0;
  for (double m : cell_mass) s += m;
  return s;
}

double GmcMeasure::pair(const std::function<double(Point)>& f) const {
  double s = 0.0;
  for (std::size_t i = 0; i < cell_mass.size(); ++i) s += f(grid->point(i)) * cell_mass[i];
  return s;
}

double DerivativeMeasure::pair(const std::function<double(Point)>& f) const {
  double s = 0.0;
  for (std::size_t i = 0; i < cell_value.size(); ++i) s += f(grid->point(i)) * cell_value[i];
  return s;
}

namespace {

void require_variances(const FieldSample& field) {
  if (!field.grid) fail(ErrorCode::InvalidArgument, "empty field sample");
  if (!field.variances || field.variances->size() != field.values.size())
    fail(ErrorCode::MissingVariance, "field sample carries no per-point variances");
}

GmcMeasure empty_measure(const FieldSample& field, double gamma) {
  GmcMeasure m;
  m.gamma = gamma;
  m.grid = field.grid;
  m.cell_area = field.grid->cell_area();
  m.scheme = field.scheme;
  m.seed_used = field.seed_used;
  m.replica_index = field.replica_index;
  m.cell_mass.resize(field.values.size());
  return m;
}

}  // namespace

std::vector<GmcMeasure> build_measure(const FieldSample& field, std::span<const double> gammas) {
  require_variances(field);
  for (double g : gammas) check_subcritical(g);
  std::vector<GmcMeasure> out;
  out.reserve(gammas.size());
  for (double g : gammas) {
    GmcMeasure m = empty_measure(field, g);
    cell_masses(field.values, *field.variances, g, m.cell_area, m.cell_mass);
    out.push_back(std::move(m));
  }
  return out;
}

GmcMeasure build_measure(const FieldSample& field, double gamma) {
  const double g[] = {gamma};
  return std::move(build_measure(field, g).front());
}

double shift_identity_check(const FieldSample& field, const std::function<double(Point)>& f, double gamma) {
  const GmcMeasure base = build_measure(field, gamma);
  const GmcMeasure shifted = build_measure(cameron_martin_shift(field, f), gamma);
  double worst = 0.0;
  for (std::size_t i = 0; i < base.cell_mass.size(); ++i) {
    const double expected = std::exp(gamma * f(field.grid->point(i))) * base.cell_mass[i];
    const double dev = std::abs(shifted.cell_mass[i] - expected) / std::max(expected, std::numeric_limits<double>::min());
    worst = std::max(worst, dev);
  }
  return worst;
}

DerivativeMeasure derivative_measure(const FieldSample& field, double gamma) {
  require_variances(field);
  check_subcritical(gamma);
  DerivativeMeasure d;
  d.gamma = gamma;
  d.grid = field.grid;
  d.cell_area = field.grid->cell_area();
  d.cell_value.resize(field.values.size());
  const auto& var = *field.variances;
  for (std::size_t i = 0; i < field.values.size(); ++i) {
    const double v = field.values[i];
    d.cell_value[i] = (v - gamma * var[i]) * std::exp(gamma * v - 0.5 * gamma * gamma * var[i]) * d.cell_area;
  }
  return d;
}

GmcOnGmc gmc_on_gmc(const FieldSample& field1, const FieldSample& field2, double gamma, double a) {
  require_variances(field1);
  require_variances(field2);
  if (!field1.grid->same_lattice(*field2.grid)) fail(ErrorCode::MismatchedGrids, "fields live on different grids");
  check_subcritical(gamma);
  check_subcritical(a);
  const double beta2 = gamma * gamma + a * a;
  if (!(beta2 < 4.0)) fail(ErrorCode::SupercriticalGamma, "gamma^2 + a^2 must be < 4");

  GmcOnGmc r;
  r.iterated = build_measure(field1, gamma);
  const auto& var2 = *field2.variances;
  for (std::size_t i = 0; i < r.iterated.cell_mass.size(); ++i)
    r.iterated.cell_mass[i] *= std::exp(a * field2.values[i] - 0.5 * a * a * var2[i]);

  const double beta = std::sqrt(beta2);
  r.combined = empty_measure(field1, beta);
  const auto& var1 = *field1.variances;
  for (std::size_t i = 0; i < r.combined.cell_mass.size(); ++i) {
    if (beta2 == 0.0) {
      r.combined.cell_mass[i] = r.combined.cell_area;
      continue;
    }
    const double v = (gamma * field1.values[i] + a * field2.values[i]) / beta;
    const double var = (gamma * gamma * var1[i] + a * a * var2[i]) / beta2;
    r.combined.cell_mass[i] = std::exp(beta * v - 0.5 * beta2 * var) * r.combined.cell_area;
  }
  for (std::size_t i = 0; i < r.combined.cell_mass.size(); ++i) {
    const double ref = r.combined.cell_mass[i];
    r.max_rel_dev = std::max(r.max_rel_dev, std::abs(r.iterated.cell_mass[i] - ref) / ref);
  }
  return r;
}

GmcMeasure pushforward_measure(const GmcMeasure& measure, Point a) {
  const Grid& g = *measure.grid;
  if (g.spec().kind != DomainKind::UnitDisk) fail(ErrorCode::NotDisk, "pushforward is defined on the unit disk");
  if (!(std::abs(a) < 1.0)) fail(ErrorCode::InvalidArgument, "Mobius parameter must lie inside the disk");
  GmcMeasure out = measure;
  std::fill(out.cell_mass.begin(), out.cell_mass.end(), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Point u = g.point(i);
    const Point w = (u - a) / (1.0 - std::conj(a) * u);
    std::ptrdiff_t target = g.nearest(w);
    if (target < 0) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < g.size(); ++j) {
        const double d = std::norm(g.point(j) - w);
        if (d < best) {
          best = d;
          target = static_cast<std::ptrdiff_t>(j);
        }
      }
    }
    out.cell_mass[static_cast<std::size_t>(target)] += measure.cell_mass[i];
  }
  return out;
}

GmcMeasure thin_measure(const FieldSampler& sampler, const FieldSample& field, double gamma, double a,
                        std::span<const double> ladder) {
  if (field.scheme.kind != SchemeKind::EigenTruncation || !sampler.basis())
    fail(ErrorCode::UnsupportedScheme, "thinning needs the eigen scheme");
  for (std::size_t k = 1; k < ladder.size(); ++k)
    if (!(ladder[k] < ladder[k - 1])) fail(ErrorCode::InvalidArgument, "thinning ladder must be decreasing");
  GmcMeasure m = build_measure(field, gamma);
  if (std::isinf(a) && a > 0) return m;
  for (const double nu : ladder) {
    if (!(nu > 0.0 && nu < 1.0)) fail(ErrorCode::InvalidArgument, "ladder radii must lie in (0, 1)");
    const std::vector<double> avg = sampler.grid_circle_average(field, nu);
    const double bound = a * -std::log(nu);
    for (std::size_t i = 0; i < avg.size(); ++i)
      if (avg[i] > bound) m.cell_mass[i] = 0.0;
  }
  return m;
}

std::vector<double> dyadic_ladder(double start, double stop) {
  if (!(start > 0.0) || !(stop > 0.0) || stop > start) fail(ErrorCode::InvalidArgument, "bad ladder bounds");
  std::vector<double> out;
  for (double nu = start; nu >= stop * (1.0 - 1e-12); nu *= 0.5) out.push_back(nu);
  return out;
}

void write_measure_csv(const std::string& path, const GmcMeasure& measure) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorCode::IoError, "cannot open " + path);
  nlohmann::ordered_json header;
  header["gamma"] = measure.gamma;
  header["scheme"] = scheme_name(measure.scheme.kind);
  header["eps"] = measure.scheme.eps;
  header["n_modes"] = measure.scheme.n_modes;
  header["seed"] = measure.seed_used;
  header["replica"] = measure.replica_index;
  os << "# " << header.dump() << '\n' << "x,y,mass\n";
  char buf[96];
  for (std::size_t i = 0; i < measure.cell_mass.size(); ++i) {
    const Point z = measure.grid->point(i);
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", z.real(), z.imag(), measure.cell_mass[i]);
    os << buf;
  }
  if (!os) fail(ErrorCode::IoError, "write failed for " + path);
}

}  // namespace gmclab
