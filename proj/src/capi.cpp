#include "gmclab/gmclab.h"

#include <exception>
#include <new>
#include <string>

#include "gmclab/error.hpp"
#include "gmclab/experiment.hpp"
#include "gmclab/gff.hpp"
#include "gmclab/gmc.hpp"

struct gmclab_config {
  gmclab::ExperimentConfig cfg;
  std::string json;
};

struct gmclab_report {
  gmclab::ExperimentReport rep;
  std::string out_dir;
  std::string stem;
  std::string json, csv;
};

struct gmclab_sampler {
  explicit gmclab_sampler(const gmclab::SamplerConfig& c) : sampler(c) {}
  gmclab::FieldSampler sampler;
};

namespace {

thread_local std::string g_last_error;

template <class F>
int guarded(F&& fn) {
  try {
    fn();
    g_last_error.clear();
    return GMCLAB_OK;
  } catch (const gmclab::Error& e) {
    g_last_error = e.what();
    return static_cast<int>(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return GMCLAB_E_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return GMCLAB_E_INTERNAL;
  }
}

int null_arg(const char* what) {
  g_last_error = std::string("InvalidArgument: ") + what + " is null";
  return GMCLAB_E_INVALID_ARGUMENT;
}

int check_len(size_t have, size_t need) {
  if (have < need) {
    g_last_error = "InvalidArgument: buffer holds " + std::to_string(have) + " values, need " + std::to_string(need);
    return GMCLAB_E_INVALID_ARGUMENT;
  }
  return GMCLAB_OK;
}

}  // namespace

extern "C" {

const char* gmclab_last_error(void) { return g_last_error.c_str(); }

const char* gmclab_error_name(int code) { return gmclab::error_name(static_cast<gmclab::ErrorCode>(code)); }

const char* gmclab_version(void) { return "0.1.0"; }

size_t gmclab_experiment_count(void) { return gmclab::experiment_catalog().size(); }

const char* gmclab_experiment_name(size_t i) {
  const auto cat = gmclab::experiment_catalog();
  return i < cat.size() ? cat[i].name : nullptr;
}

const char* gmclab_experiment_anchor(size_t i) {
  const auto cat = gmclab::experiment_catalog();
  return i < cat.size() ? cat[i].anchor : nullptr;
}

int gmclab_config_from_json(const char* json, gmclab_config** out) {
  if (!json) return null_arg("json");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] { *out = new gmclab_config{gmclab::parse_config(json), {}}; });
}

int gmclab_config_from_file(const char* path, gmclab_config** out) {
  if (!path) return null_arg("path");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] { *out = new gmclab_config{gmclab::load_config(path), {}}; });
}

int gmclab_config_set_seed(gmclab_config* cfg, uint64_t seed) {
  if (!cfg) return null_arg("cfg");
  cfg->cfg.master_seed = seed;
  return GMCLAB_OK;
}

int gmclab_config_set_replicas(gmclab_config* cfg, uint64_t n) {
  if (!cfg) return null_arg("cfg");
  return guarded([&] {
    gmclab::ExperimentConfig c = cfg->cfg;
    c.n_replicas = static_cast<std::size_t>(n);
    gmclab::validate_config(c);
    cfg->cfg = c;
  });
}

int gmclab_config_set_workers(gmclab_config* cfg, int workers) {
  if (!cfg) return null_arg("cfg");
  return guarded([&] {
    if (workers < 0) gmclab::fail(gmclab::ErrorCode::ConfigInvalid, "workers: must be non-negative");
    cfg->cfg.workers = workers;
  });
}

int gmclab_config_set_output_dir(gmclab_config* cfg, const char* dir) {
  if (!cfg) return null_arg("cfg");
  if (!dir) return null_arg("dir");
  cfg->cfg.out_dir = dir;
  return GMCLAB_OK;
}

const char* gmclab_config_json(gmclab_config* cfg) {
  if (!cfg) return nullptr;
  cfg->json = gmclab::config_to_json(cfg->cfg);
  return cfg->json.c_str();
}

const char* gmclab_config_output_dir(const gmclab_config* cfg) { return cfg ? cfg->cfg.out_dir.c_str() : nullptr; }

void gmclab_config_free(gmclab_config* cfg) { delete cfg; }

int gmclab_run(const gmclab_config* cfg, gmclab_report** out) {
  if (!cfg) return null_arg("cfg");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    auto* r = new gmclab_report;
    try {
      r->rep = gmclab::run_experiment(cfg->cfg);
    } catch (...) {
      delete r;
      throw;
    }
    r->out_dir = cfg->cfg.out_dir;
    r->stem = cfg->cfg.stem.empty() ? cfg->cfg.experiment : cfg->cfg.stem;
    *out = r;
  });
}

int gmclab_report_passed(const gmclab_report* rep) { return rep && rep->rep.passed ? 1 : 0; }

size_t gmclab_report_metric_count(const gmclab_report* rep) { return rep ? rep->rep.metrics.size() : 0; }

int gmclab_report_metric(const gmclab_report* rep, size_t i, const char** name, double* estimate, double* se,
                         double* target, double* tolerance, int* pass) {
  if (!rep) return null_arg("rep");
  if (i >= rep->rep.metrics.size()) {
    g_last_error = "InvalidArgument: metric index out of range";
    return GMCLAB_E_INVALID_ARGUMENT;
  }
  const gmclab::Metric& m = rep->rep.metrics[i];
  if (name) *name = m.name.c_str();
  if (estimate) *estimate = m.estimate;
  if (se) *se = m.se;
  if (target) *target = m.target;
  if (tolerance) *tolerance = m.tolerance;
  if (pass) *pass = m.pass ? 1 : 0;
  return GMCLAB_OK;
}

double gmclab_report_wall_seconds(const gmclab_report* rep) { return rep ? rep->rep.wall_seconds : 0.0; }

const char* gmclab_report_json(gmclab_report* rep) {
  if (!rep) return nullptr;
  rep->json = gmclab::report_to_json(rep->rep);
  return rep->json.c_str();
}

const char* gmclab_report_csv(gmclab_report* rep) {
  if (!rep) return nullptr;
  rep->csv = gmclab::table_to_csv(rep->rep.table);
  return rep->csv.c_str();
}

int gmclab_report_write(const gmclab_report* rep, const char* dir) {
  if (!rep) return null_arg("rep");
  return guarded([&] { gmclab::emit_report(rep->rep, dir ? std::string(dir) : rep->out_dir, rep->stem); });
}

void gmclab_report_free(gmclab_report* rep) { delete rep; }

int gmclab_sampler_create(int domain, int grid_resolution, double boundary_margin, int scheme, double eps, int n_modes,
                          uint64_t seed, gmclab_sampler** out) {
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    if (domain != 0 && domain != 1) gmclab::fail(gmclab::ErrorCode::InvalidArgument, "domain must be 0 (disk) or 1 (square)");
    if (scheme != 0 && scheme != 1) gmclab::fail(gmclab::ErrorCode::InvalidArgument, "scheme must be 0 (cholesky) or 1 (eigen)");
    gmclab::SamplerConfig c;
    c.domain = {domain == 0 ? gmclab::DomainKind::UnitDisk : gmclab::DomainKind::UnitSquare, grid_resolution,
                boundary_margin, std::nullopt};
    c.scheme = {scheme == 0 ? gmclab::SchemeKind::CholeskyCircleAvg : gmclab::SchemeKind::EigenTruncation, eps, n_modes};
    c.master_seed = seed;
    *out = new gmclab_sampler(c);
  });
}

size_t gmclab_sampler_cells(const gmclab_sampler* s) { return s ? s->sampler.grid().size() : 0; }

int gmclab_sampler_points(const gmclab_sampler* s, double* xy, size_t len) {
  if (!s) return null_arg("s");
  if (!xy) return null_arg("xy");
  const gmclab::Grid& g = s->sampler.grid();
  if (int rc = check_len(len, 2 * g.size())) return rc;
  for (size_t i = 0; i < g.size(); ++i) {
    xy[2 * i] = g.point(i).real();
    xy[2 * i + 1] = g.point(i).imag();
  }
  return GMCLAB_OK;
}

int gmclab_sampler_sample(const gmclab_sampler* s, uint64_t replica, double* values, size_t len) {
  if (!s) return null_arg("s");
  if (!values) return null_arg("values");
  if (int rc = check_len(len, s->sampler.grid().size())) return rc;
  return guarded([&] {
    const gmclab::FieldSample f = s->sampler.sample(replica);
    std::copy(f.values.begin(), f.values.end(), values);
  });
}

int gmclab_sampler_measure(const gmclab_sampler* s, uint64_t replica, double gamma, double* masses, size_t len) {
  if (!s) return null_arg("s");
  if (!masses) return null_arg("masses");
  if (int rc = check_len(len, s->sampler.grid().size())) return rc;
  return guarded([&] {
    const gmclab::GmcMeasure m = gmclab::build_measure(s->sampler.sample(replica), gamma);
    std::copy(m.cell_mass.begin(), m.cell_mass.end(), masses);
  });
}

void gmclab_sampler_free(gmclab_sampler* s) { delete s; }

}  // extern "C"
