#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "gmclab/error.hpp"
#include "gmclab/experiment.hpp"

using namespace gmclab;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Ok;
}

std::string message_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

const char* kMeanMass = R"({
  "experiment": "mean-mass",
  "domain": {"kind": "disk", "grid_resolution": 16, "boundary_margin": 0.125},
  "scheme": {"kind": "cholesky", "eps": 0.0625},
  "gammas": [0.5, 1.0],
  "n_replicas": 2000,
  "master_seed": 4
})";

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("catalog") {
  const auto cat = experiment_catalog();
  CHECK(cat.size() == 14);
  for (const char* name : {"mean-mass", "second-moment", "zeta", "thick", "rooted-char", "kahane", "kpz", "tail", "recover",
                           "cauchy", "gmc-on-gmc", "shift-identity"}) {
    bool found = false;
    for (const auto& e : cat) found = found || std::string(e.name) == name;
    CHECK_MESSAGE(found, name);
  }
}

TEST_CASE("config parsing and defaults") {
  const ExperimentConfig c = parse_config(kMeanMass);
  CHECK(c.experiment == "mean-mass");
  CHECK(c.domain.kind == DomainKind::UnitDisk);
  CHECK(c.domain.grid_resolution == 16);
  CHECK(c.scheme.eps == 0.0625);
  CHECK(c.gammas == std::vector<double>{0.5, 1.0});
  CHECK(c.stem == "mean-mass");
  CHECK(c.workers == 1);

  // margin defaults to twice the largest averaging radius
  const ExperimentConfig d = parse_config(R"({"experiment": "recover", "domain": {"kind": "square", "grid_resolution": 64},
      "scheme": {"kind": "eigen", "eps": 0.015625, "n_modes": 32}, "gammas": [1], "ladder": [0.125, 0.0625]})");
  CHECK(d.domain.boundary_margin == 0.25);
  const ExperimentConfig e = parse_config(R"({"experiment": "mean-mass", "scheme": {"eps": 0.05}, "gammas": [1]})");
  CHECK(e.domain.boundary_margin == doctest::Approx(0.1));

  // the echo parses back to the same config
  const ExperimentConfig back = parse_config(config_to_json(c));
  CHECK(config_to_json(back) == config_to_json(c));
}

TEST_CASE("config validation names the field") {
  auto bad = [](const std::string& text) { return code_of([&] { parse_config(text); }); };
  CHECK(bad(R"({"experiment": "nope", "gammas": [1]})") == ErrorCode::ConfigInvalid);
  CHECK(message_of([] { parse_config(R"({"experiment": "nope"})"); }).find("experiment") != std::string::npos);
  CHECK(bad(R"({"gammas": [1]})") == ErrorCode::ConfigInvalid);
  CHECK(bad("{not json") == ErrorCode::ConfigInvalid);
  CHECK(bad(R"({"experiment": "mean-mass", "scheme": {"eps": 0.05}, "gammas": [2.0]})") == ErrorCode::ConfigInvalid);
  CHECK(bad(R"({"experiment": "mean-mass", "scheme": {"eps": 0.05}, "gammas": []})") == ErrorCode::ConfigInvalid);
  CHECK(bad(R"({"experiment": "mean-mass", "scheme": {"eps": 0.05}, "gammas": [1], "colour": 3})") == ErrorCode::ConfigInvalid);
  CHECK(message_of([] { parse_config(R"({"experiment": "mean-mass", "scheme": {"eps": 0.05}, "gammas": [1], "colour": 3})"); })
            .find("colour") != std::string::npos);
  CHECK(bad(R"({"experiment": "mean-mass", "scheme": {"eps": "small"}, "gammas": [1]})") == ErrorCode::ConfigInvalid);
  CHECK(bad(R"({"experiment": "mean-mass", "scheme": {"eps": 0.05}, "gammas": [1], "n_replicas": -3})") == ErrorCode::ConfigInvalid);
  CHECK(bad(R"({"experiment": "mean-mass", "scheme": {"eps": 0.05}, "gammas": [1], "n_replicas": 1})") == ErrorCode::ConfigInvalid);
  CHECK(bad(R"({"experiment": "thick", "scheme": {"kind": "cholesky", "eps": 0.05}, "gammas": [1], "ladder": [0.1]})") ==
        ErrorCode::ConfigInvalid);
  CHECK(bad(R"({"experiment": "zeta", "scheme": {"eps": 0.05}, "gammas": [1], "qs": [1], "ladder": [0.2, 0.1]})") ==
        ErrorCode::ConfigInvalid);
  CHECK(bad(R"({"experiment": "zeta", "scheme": {"eps": 0.05}, "gammas": [1], "qs": [1], "ladder": [0.2, 0.1, 0.05],
               "estimator": "median"})") == ErrorCode::ConfigInvalid);
  CHECK(bad(R"({"experiment": "mean-mass", "domain": {"kind": "disk", "boundary_margin": 1.5}, "scheme": {"eps": 0.05},
               "gammas": [1]})") == ErrorCode::ConfigInvalid);
  CHECK(bad(R"({"experiment": "mean-mass", "domain": {"kind": "disk"}, "scheme": {"kind": "eigen", "n_modes": 8},
               "gammas": [1]})") == ErrorCode::ConfigInvalid);
  CHECK(bad(R"({"experiment": "kpz", "scheme": {"kind": "eigen", "n_modes": 8}, "domain": {"kind": "square"}, "gammas": [1],
               "ladder": [0.1, 0.05, 0.025], "masses": [0.1, 0.05, 0.01], "fractals": [{"kind": "circle"}]})") ==
        ErrorCode::ConfigInvalid);
}

TEST_CASE("metric rules") {
  CHECK(make_metric("a", 1.0, 0.1, 1.2, 0.3, PassRule::Abs).pass);
  CHECK_FALSE(make_metric("a", 1.0, 0.1, 1.4, 0.3, PassRule::Abs).pass);
  CHECK(make_metric("b", 0.3, 0.0, 0.5, 0.0, PassRule::Le).pass);
  CHECK_FALSE(make_metric("b", 0.6, 0.0, 0.5, 0.0, PassRule::Le).pass);
  CHECK(make_metric("c", 0.995, 0.0, 0.99, 0.0, PassRule::Ge).pass);
  CHECK(make_metric("d", 1.9, 0.0, 1.0, 2.0, PassRule::Factor).pass);
  CHECK(make_metric("d", 0.51, 0.0, 1.0, 2.0, PassRule::Factor).pass);
  CHECK_FALSE(make_metric("d", 0.49, 0.0, 1.0, 2.0, PassRule::Factor).pass);
  CHECK_FALSE(make_metric("d", -1.0, 0.0, 1.0, 2.0, PassRule::Factor).pass);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (PassRule r : {PassRule::Abs, PassRule::Le, PassRule::Ge, PassRule::Factor})
    CHECK_FALSE(make_metric("n", nan, 0.0, 1.0, 1e9, r).pass);
}

TEST_CASE("report serialization") {
  ExperimentReport r;
  r.experiment = "mean-mass";
  r.config_json = config_to_json(parse_config(kMeanMass));
  r.n_replicas = 10;
  r.master_seed = 3;
  r.wall_seconds = 0.125;
  r.started_at = "2026-01-02T03:04:05Z";

  SUBCASE("empty metric list") {
    r.passed = true;
    const std::string j = report_to_json(r);
    CHECK(j.find("\"metrics\": []") != std::string::npos);
    CHECK(report_from_json(j) == r);
  }
  SUBCASE("NaN becomes null and fails") {
    r.metrics.push_back(make_metric("x", std::numeric_limits<double>::quiet_NaN(), 0.1, 1.0, 0.5, PassRule::Abs));
    r.passed = false;
    const std::string j = report_to_json(r);
    CHECK(j.find("\"estimate\": null") != std::string::npos);
    CHECK(j.find("NaN") == std::string::npos);
    const ExperimentReport back = report_from_json(j);
    CHECK(std::isnan(back.metrics[0].estimate));
    CHECK_FALSE(back.metrics[0].pass);
    CHECK(back == r);
  }
  SUBCASE("round trip with awkward values") {
    r.metrics.push_back(make_metric("tiny", 1e-300, 3.3e-17, 0.1 + 0.2, 1.0 / 3.0, PassRule::Abs));
    r.metrics.push_back(make_metric("big", 1.7976931348623157e308, 0.0, 1e308, 0.0, PassRule::Ge));
    r.table.columns = {"a", "b,c"};
    r.table.labels = {"plain", "has \"quotes\", commas"};
    r.table.rows = {{0.1, -2.5e-8}, {std::numeric_limits<double>::quiet_NaN(), 12345678901234567.0}};
    r.passed = true;
    CHECK(report_from_json(report_to_json(r)) == r);
    // key order is fixed
    const std::string j = report_to_json(r);
    CHECK(j.find("\"experiment\"") < j.find("\"passed\""));
    CHECK(j.find("\"passed\"") < j.find("\"metrics\""));
    CHECK(j.find("\"metrics\"") < j.find("\"table\""));
    CHECK(j.find("\"table\"") < j.find("\"config\""));
    CHECK(j.find("\"config\"") < j.find("\"metadata\""));
  }
}

TEST_CASE("CSV follows RFC 4180") {
  Table t;
  t.columns = {"x", "y"};
  t.labels = {"a", "b,c", "say \"hi\""};
  t.rows = {{0.5, 1e-20}, {-3.0, std::numeric_limits<double>::quiet_NaN()}, {0.1, 100.0}};
  const std::string csv = table_to_csv(t);
  CHECK(csv == "label,x,y\na,0.5,1e-20\n\"b,c\",-3,NaN\n\"say \"\"hi\"\"\",0.1,100\n");
  CHECK(csv.find('\r') == std::string::npos);
}

TEST_CASE("mean-mass run, files, and worker invariance") {
  ExperimentConfig c = parse_config(kMeanMass);
  const ExperimentReport one = run_experiment(c);
  CHECK(one.passed);
  REQUIRE(one.metrics.size() == 2);
  CHECK(one.metrics[0].target == doctest::Approx(one.metrics[1].target));
  CHECK(one.table.rows.size() == 2);

  c.workers = 3;
  const ExperimentReport three = run_experiment(c);
  CHECK(table_to_csv(one.table) == table_to_csv(three.table));

  const auto dir = std::filesystem::temp_directory_path() / "gmclab_test_experiment";
  std::filesystem::remove_all(dir);
  emit_report(one, (dir / "a").string(), "mm");
  emit_report(three, (dir / "b").string(), "mm");
  CHECK(slurp(dir / "a" / "mm.csv") == slurp(dir / "b" / "mm.csv"));
  CHECK(report_from_json(slurp(dir / "a" / "mm.json")) == one);
  std::filesystem::remove_all(dir);

  CHECK(code_of([&] { emit_report(one, "/proc/definitely/not/here", "x"); }) == ErrorCode::IoError);
}

TEST_CASE("identity experiments") {
  const char* cfg = R"({"experiment": "shift-identity", "domain": {"kind": "disk", "grid_resolution": 16},
                        "scheme": {"eps": 0.0625}, "n_replicas": 5})";
  const ExperimentReport r = run_experiment(parse_config(cfg));
  CHECK(r.passed);
  CHECK(r.table.rows.size() == 5);
  ExperimentConfig g = parse_config(cfg);
  g.experiment = "gmc-on-gmc";
  CHECK(run_experiment(g).passed);
  g.experiment = "derivative";
  g.gammas = {0.5};
  g.center = Point(0.2, 0.1);
  CHECK(run_experiment(g).metrics.size() == 2);
}
