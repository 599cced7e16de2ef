#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include "pioracle/experiment.hpp"

using namespace pioracle;
using nlohmann::json;

namespace {

ExperimentConfig base_config(const std::string& subcommand) {
  ExperimentConfig c;
  c.subcommand = subcommand;
  c.theta_spec = "0,2";
  c.theta = {0.0, 2.0};
  c.draws = 2000;
  c.calibration_draws = 2000;
  c.seed = 7;
  return c;
}

}  // namespace

TEST_CASE("theta spec expansion") {
  CHECK(expand_theta_spec("0,1.5,-2") == std::vector<double>{0.0, 1.5, -2.0});
  CHECK(expand_theta_spec("sparse:5,2,3") ==
        std::vector<double>{0.0, 0.0, 0.0, 3.0, 3.0});
  CHECK(expand_theta_spec("twogroup:4,1,-2,5") ==
        std::vector<double>{-2.0, 5.0, 5.0, 5.0});
  CHECK(expand_theta_spec("grid:3,0,1") == std::vector<double>{0.0, 0.5, 1.0});
  CHECK_THROWS_AS(expand_theta_spec("sparse:3,9,1"), std::invalid_argument);
  CHECK_THROWS_AS(expand_theta_spec("1,2,zebra"), std::invalid_argument);
}

TEST_CASE("validation guards run before computation") {
  auto c = base_config("risk");
  c.problem = "estimate";
  c.alpha = 1.5;
  const auto out = run_experiment(c);
  CHECK(out.exit_code == 2);
  CHECK(out.jsonl.empty());
}

TEST_CASE("capacity errors exit with code 3") {
  auto c = base_config("risk");
  c.problem = "estimate";
  c.theta = std::vector<double>(12, 0.0);
  c.theta[0] = 1.0;
  c.theta_spec = "sparse:12,1,1";
  const auto out = run_experiment(c);
  CHECK(out.exit_code == 3);
  CHECK(out.error.find("sampled") != std::string::npos);
}

TEST_CASE("incompatible rule and problem") {
  auto c = base_config("risk");
  c.problem = "global";
  c.rule = "bh";
  const auto out = run_experiment(c);
  CHECK(out.exit_code == 2);
  CHECK(out.error.find("incompatible") != std::string::npos);
}

TEST_CASE("posterior subcommand emits the worked values") {
  auto c = base_config("posterior");
  c.z = {0.0, 2.0};
  const auto out = run_experiment(c);
  REQUIRE(out.exit_code == 0);
  REQUIRE(out.jsonl.size() == 1);
  const auto rec = json::parse(out.jsonl[0]);
  CHECK(rec["q_null"][0].get<double>() == doctest::Approx(0.982014).epsilon(1e-6));
  CHECK(rec["post_mean"][1].get<double>() == doctest::Approx(1.964028).epsilon(1e-6));
  CHECK(rec["config_hash"].get<std::string>().size() == 16);
}

TEST_CASE("gap subcommand wiring") {
  ExperimentConfig c;
  c.subcommand = "gap";
  c.theta_spec = "0,0,2,2";
  c.theta = {0.0, 0.0, 2.0, 2.0};
  c.problem = "estimate";
  c.selection = "all";
  c.draws = 10000;
  c.calibration_draws = 2000;
  c.seed = 7;
  const auto out = run_experiment(c);
  REQUIRE(out.exit_code == 0);
  REQUIRE(out.jsonl.size() == 1);
  const auto rec = json::parse(out.jsonl[0]);
  CHECK(rec.contains("risk_simple"));
  CHECK(rec.contains("risk_pi"));
  CHECK(rec.contains("gap"));
  CHECK(rec["gap"].get<double>() >= -2.0 * rec["gap_se"].get<double>());
}

TEST_CASE("runs are byte-identical under identical configs") {
  for (const char* sub : {"posterior", "fdr-oracle", "risk", "bound"}) {
    auto c = base_config(sub);
    c.problem = "fdr";
    c.rule = "pi-oracle";
    c.alpha = 0.2;
    c.subset_m = 4;
    if (std::string(sub) == "posterior") c.z = {0.3, 1.2};
    const auto a = run_experiment(c);
    const auto b = run_experiment(c);
    REQUIRE(a.exit_code == 0);
    CHECK(a.jsonl == b.jsonl);
  }
}

TEST_CASE("fdr-oracle subcommand reports calibration and validation") {
  auto c = base_config("fdr-oracle");
  c.theta_spec = "0,0,3,3";
  c.theta = {0.0, 0.0, 3.0, 3.0};
  c.alpha = 0.15;
  c.calibration_draws = 5000;
  c.draws = 5000;
  const auto out = run_experiment(c);
  REQUIRE(out.exit_code == 0);
  const auto rec = json::parse(out.jsonl[0]);
  CHECK(rec.contains("lambda_star"));
  CHECK(rec["validation"]["side_channels"].contains("fdr"));
}

TEST_CASE("strict mode escalates flagged calibrations") {
  auto c = base_config("fdr-oracle");
  c.theta_spec = "0,0";
  c.theta = {0.0, 0.0};  // all-null: calibration pins the lower edge
  c.strict = true;
  c.calibration_draws = 2000;
  c.draws = 1000;
  const auto out = run_experiment(c);
  CHECK(out.exit_code == 4);
  CHECK(out.warning_flagged);
}

TEST_CASE("bound subcommand emits lower, upper, and the exact reference") {
  auto c = base_config("bound");
  c.theta_spec = "0,1,2";
  c.theta = {0.0, 1.0, 2.0};
  c.problem = "estimate";
  c.subset_m = 3;
  c.draws = 3000;
  const auto out = run_experiment(c);
  REQUIRE(out.exit_code == 0);
  REQUIRE(out.jsonl.size() == 3);
  std::vector<std::string> dirs;
  for (const auto& line : out.jsonl)
    dirs.push_back(json::parse(line)["report"]["bound_direction"].get<std::string>());
  CHECK(dirs == std::vector<std::string>{"lower_bound", "upper_approx", "point"});
}

TEST_CASE("config embedded in a record reproduces the run") {
  auto c = base_config("fdr-oracle");
  c.theta_spec = "0,0,2.5";
  c.theta = {0.0, 0.0, 2.5};
  c.alpha = 0.2;
  const auto first = run_experiment(c);
  REQUIRE(first.exit_code == 0);
  const auto rec = json::parse(first.jsonl[0]);
  const auto rebuilt = parse_config_json(rec["config"].dump());
  const auto second = run_experiment(rebuilt);
  CHECK(second.jsonl == first.jsonl);
}

TEST_CASE("remaining subcommands dispatch") {
  {
    auto c = base_config("global-test");
    c.theta_spec = "sparse:4,1,3";
    c.theta = expand_theta_spec(c.theta_spec);
    c.alpha = 0.05;
    const auto out = run_experiment(c);
    REQUIRE(out.exit_code == 0);
    const auto rec = json::parse(out.jsonl[0]);
    CHECK(rec.contains("log_c"));
    CHECK(rec["degenerate"].get<bool>() == false);
    CHECK(std::abs(rec["null_rejection_rate"].get<double>() - 0.05) < 0.03);
  }
  {
    auto c = base_config("sign-oracle");
    c.theta_spec = "0,-1,1";
    c.theta = {0.0, -1.0, 1.0};
    c.alpha = 0.2;
    const auto out = run_experiment(c);
    REQUIRE(out.exit_code == 0);
    CHECK(json::parse(out.jsonl[0])["validation"]["side_channels"].contains("dir_fdr"));
  }
  {
    auto c = base_config("select-estimate");
    c.selection = "topk:1";
    c.z = {0.0, 2.0};
    const auto out = run_experiment(c);
    REQUIRE(out.exit_code == 0);
    const auto rec = json::parse(out.jsonl[0]);
    CHECK(rec["estimates"][1].get<double>() ==
          doctest::Approx(1.964028).epsilon(1e-6));
  }
}

TEST_CASE("csv projection") {
  auto c = base_config("risk");
  c.problem = "estimate";
  c.rule = "identity";
  const auto out = run_experiment(c);
  REQUIRE(out.exit_code == 0);
  const auto csv = records_to_csv(out.jsonl);
  CHECK(csv.find("report.estimate") != std::string::npos);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);  // header + one row
}
