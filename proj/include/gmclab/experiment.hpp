#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gmclab/domain.hpp"
#include "gmclab/gff.hpp"

namespace gmclab {

struct ExperimentInfo {
  const char* name;
  const char* anchor;  // the identity or law the experiment checks
};

/// mean-mass, second-moment, zeta, thick, rooted-char, kahane, kpz, tail, recover,
/// cauchy, gmc-on-gmc, shift-identity, dimension, derivative.
std::span<const ExperimentInfo> experiment_catalog() noexcept;

struct FractalConfig {
  std::string kind = "point";  // point | segment | cantor-dust
  Point a{0.5, 0.5};
  Point b{0.5, 0.5};
  double side = 0.0;
  int depth = 0;
};

/// Every knob of every experiment. Unused knobs are still echoed.
struct ExperimentConfig {
  std::string experiment;
  DomainSpec domain;
  bool margin_given = false;  // otherwise twice the largest averaging radius
  Scheme scheme;
  std::vector<double> gammas;
  std::vector<double> qs;
  std::vector<double> ladder;  // radii, eps, nu or eps' depending on the experiment
  std::vector<double> masses;  // quantum masses (kpz)
  std::vector<double> rooted_masses;  // rooted radius moments (kpz); empty skips them
  std::vector<FractalConfig> fractals;
  Point center{0.0, 0.0};
  std::string estimator = "direct";  // zeta: direct | rooted
  std::size_t roots_per_replica = 4;
  double fraction = 0.5;             // dimension
  int kahane_cells = 16;
  std::size_t kahane_pairs = 200;
  std::size_t n_replicas = 1000;
  std::size_t batches = 100;
  std::uint64_t master_seed = 1;
  int workers = 1;
  std::string out_dir = ".";
  std::string stem;  // defaults to the experiment name
};

/// Parses and validates (ConfigInvalid names the field). Missing fields take defaults.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
void validate_config(ExperimentConfig& cfg);
std::string config_to_json(const ExperimentConfig& cfg);

/// pass rule: Abs |estimate - target| <= tolerance; Le estimate <= target;
/// Ge estimate >= target; Factor max(estimate/target, target/estimate) <= tolerance.
enum class PassRule { Abs, Le, Ge, Factor };
const char* pass_rule_name(PassRule r) noexcept;

struct Metric {
  std::string name;
  double estimate = 0.0;
  double se = 0.0;
  double target = 0.0;
  double tolerance = 0.0;
  PassRule rule = PassRule::Abs;
  bool pass = false;
};

/// Evaluates the rule; NaN anywhere fails.
bool metric_passes(const Metric& m) noexcept;
Metric make_metric(std::string name, double estimate, double se, double target, double tolerance, PassRule rule);

/// Long-format curve table. The first CSV column is `label`.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::string> labels;
  std::vector<std::vector<double>> rows;
};

struct ExperimentReport {
  std::string experiment;
  std::string config_json;  // resolved config echo
  std::vector<Metric> metrics;
  Table table;
  std::size_t n_replicas = 0;
  std::uint64_t master_seed = 0;
  double wall_seconds = 0.0;
  std::string started_at;  // UTC, metadata only
  bool passed = false;

  bool operator==(const ExperimentReport& other) const;
};

ExperimentReport run_experiment(const ExperimentConfig& cfg);

std::string report_to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const std::string& text);
/// RFC-4180, LF line endings, '.' decimal, 17 significant digits; NaN is written as NaN.
std::string table_to_csv(const Table& table);

/// Writes <dir>/<stem>.json and <dir>/<stem>.csv, creating dir (IoError).
void emit_report(const ExperimentReport& report, const std::string& dir, const std::string& stem);

}  // namespace gmclab
