#ifndef GMCLAB_H
#define GMCLAB_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define GMCLAB_API __declspec(dllexport)
#else
#define GMCLAB_API __attribute__((visibility("default")))
#endif

/* Error codes. 0 is success; values match gmclab::ErrorCode. */
enum {
  GMCLAB_OK = 0,
  GMCLAB_E_INVALID_ARGUMENT = 1,
  GMCLAB_E_SUPERCRITICAL_GAMMA = 10,
  GMCLAB_E_UNSUPPORTED_SCHEME = 14,
  GMCLAB_E_CONFIG_INVALID = 24,
  GMCLAB_E_IO = 25,
  GMCLAB_E_INTERNAL = 26
};

typedef struct gmclab_config gmclab_config;
typedef struct gmclab_report gmclab_report;
typedef struct gmclab_sampler gmclab_sampler;

/* Message of the last failed call on this thread; "" when none. */
GMCLAB_API const char* gmclab_last_error(void);
GMCLAB_API const char* gmclab_error_name(int code);
GMCLAB_API const char* gmclab_version(void);

/* Experiment catalog. Index out of range returns NULL. */
GMCLAB_API size_t gmclab_experiment_count(void);
GMCLAB_API const char* gmclab_experiment_name(size_t i);
GMCLAB_API const char* gmclab_experiment_anchor(size_t i);

/* Configs are validated on load; overrides are re-validated by gmclab_run. */
GMCLAB_API int gmclab_config_from_json(const char* json, gmclab_config** out);
GMCLAB_API int gmclab_config_from_file(const char* path, gmclab_config** out);
GMCLAB_API int gmclab_config_set_seed(gmclab_config* cfg, uint64_t seed);
GMCLAB_API int gmclab_config_set_replicas(gmclab_config* cfg, uint64_t n);
GMCLAB_API int gmclab_config_set_workers(gmclab_config* cfg, int workers);
GMCLAB_API int gmclab_config_set_output_dir(gmclab_config* cfg, const char* dir);
/* Resolved config as JSON; owned by cfg, valid until the next call on cfg. */
GMCLAB_API const char* gmclab_config_json(gmclab_config* cfg);
GMCLAB_API const char* gmclab_config_output_dir(const gmclab_config* cfg);
GMCLAB_API void gmclab_config_free(gmclab_config* cfg);

GMCLAB_API int gmclab_run(const gmclab_config* cfg, gmclab_report** out);
GMCLAB_API int gmclab_report_passed(const gmclab_report* rep);
GMCLAB_API size_t gmclab_report_metric_count(const gmclab_report* rep);
/* Any output pointer may be NULL. name is owned by rep. */
GMCLAB_API int gmclab_report_metric(const gmclab_report* rep, size_t i, const char** name, double* estimate, double* se,
                                    double* target, double* tolerance, int* pass);
GMCLAB_API double gmclab_report_wall_seconds(const gmclab_report* rep);
/* Owned by rep. */
GMCLAB_API const char* gmclab_report_json(gmclab_report* rep);
GMCLAB_API const char* gmclab_report_csv(gmclab_report* rep);
/* Writes <dir>/<stem>.json and .csv; dir NULL uses the config's output dir. */
GMCLAB_API int gmclab_report_write(const gmclab_report* rep, const char* dir);
GMCLAB_API void gmclab_report_free(gmclab_report* rep);

/* Field sampler. domain: 0 disk, 1 square. scheme: 0 Cholesky circle average, 1 eigen. */
GMCLAB_API int gmclab_sampler_create(int domain, int grid_resolution, double boundary_margin, int scheme, double eps,
                                     int n_modes, uint64_t seed, gmclab_sampler** out);
GMCLAB_API size_t gmclab_sampler_cells(const gmclab_sampler* s);
/* Cell centers as x0, y0, x1, y1, ...; xy holds 2 * cells doubles. */
GMCLAB_API int gmclab_sampler_points(const gmclab_sampler* s, double* xy, size_t len);
GMCLAB_API int gmclab_sampler_sample(const gmclab_sampler* s, uint64_t replica, double* values, size_t len);
/* Cell masses of the GMC measure of one replica at gamma. */
GMCLAB_API int gmclab_sampler_measure(const gmclab_sampler* s, uint64_t replica, double gamma, double* masses, size_t len);
GMCLAB_API void gmclab_sampler_free(gmclab_sampler* s);

#ifdef __cplusplus
}
#endif

#endif
