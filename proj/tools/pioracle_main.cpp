#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "pioracle/experiment.hpp"

namespace {

using pioracle::ExperimentConfig;

void add_common_options(CLI::App* cmd, ExperimentConfig& cfg, std::string& theta,
                        std::string& z_csv) {
  cmd->add_option("--theta", theta,
                  "theta values 'a,b,c' or generator sparse:n,k,mu | "
                  "twogroup:n,k,mu1,mu2 | grid:n,lo,hi");
  cmd->add_option("--sigma", cfg.sigma, "noise scale");
  cmd->add_option("--alpha", cfg.alpha, "level for the constrained problems");
  cmd->add_option("--selection", cfg.selection, "all | argmax | topk:K");
  cmd->add_option("--ensemble", cfg.ensemble, "exact | sampled:M");
  cmd->add_option("--draws", cfg.draws, "Monte Carlo draws for risk estimates");
  cmd->add_option("--calibration-draws", cfg.calibration_draws,
                  "Monte Carlo draws for threshold calibration");
  cmd->add_option("--seed", cfg.seed, "master seed");
  cmd->add_option("--z", z_csv, "data vector 'a,b,c' for decision output");
  cmd->add_option("--null-lo", cfg.null_lo, "null interval lower end");
  cmd->add_option("--null-hi", cfg.null_hi, "null interval upper end");
  cmd->add_option("--out", cfg.out_path, "JSONL output path");
  cmd->add_option("--csv", cfg.csv_path, "also write a CSV projection here");
  cmd->add_flag("--strict", cfg.strict,
                "exit 4 when a calibration warning is flagged");
}

}  // namespace

int main(int argc, char** argv) {
  ExperimentConfig cfg;

  // A config file provides defaults; explicit flags override its fields.
  std::string config_path;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") config_path = argv[i + 1];
  }
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "config error: cannot open " << config_path << "\n";
      return 2;
    }
    std::stringstream buf;
    buf << in.rdbuf();
    try {
      cfg = pioracle::parse_config_json(buf.str());
    } catch (const std::exception& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return 2;
    }
  }

  CLI::App app{"Oracle permutation-invariant decision rules for the Gaussian "
               "sequence model: posteriors, calibrated oracle rules, risks, "
               "bounds, and simple-rule gaps"};
  app.require_subcommand(0, 1);
  app.add_option("--config", config_path, "JSON config file (flags override)");
  app.add_option("--out", cfg.out_path, "JSONL output path");
  app.add_option("--csv", cfg.csv_path, "also write a CSV projection here");

  std::string theta_text, z_csv;
  const std::pair<const char*, const char*> subs[] = {
      {"posterior", "posterior marginals of xi given W = z"},
      {"global-test", "calibrate the likelihood-ratio global test"},
      {"fdr-oracle", "calibrate the FDR-constrained rejection oracle"},
      {"sign-oracle", "calibrate the dir-FDR-constrained sign oracle"},
      {"select-estimate", "selective posterior-mean estimator risk"},
      {"risk", "Monte Carlo risk of a named rule"},
      {"bound", "sampled-subset lower bound and MC upper approximation"},
      {"gap", "simple-rule vs exact-oracle risk gap"},
  };
  for (const auto& [name, help] : subs) {
    auto* cmd = app.add_subcommand(name, help);
    cmd->fallthrough();  // --config/--out after the subcommand reach the app
    add_common_options(cmd, cfg, theta_text, z_csv);
    const std::string n = name;
    if (n == "risk") {
      cmd->add_option("--problem", cfg.problem, "global | fdr | sign | estimate");
      cmd->add_option("--rule", cfg.rule,
                      "pi-oracle | simple-oracle | bh | chisq | js | identity | "
                      "naive-sign");
    } else if (n == "bound" || n == "gap") {
      cmd->add_option("--problem", cfg.problem, "global | fdr | sign | estimate");
      if (n == "bound") cmd->add_option("--m", cfg.subset_m, "subset size");
    }
  }

  CLI11_PARSE(app, argc, argv);

  try {
    for (const auto& [name, help] : subs) {
      (void)help;
      if (app.get_subcommand(name)->parsed()) cfg.subcommand = name;
    }
    if (cfg.subcommand.empty())
      throw std::invalid_argument("no subcommand given (flag or config)");
    if (!theta_text.empty()) {
      cfg.theta_spec = theta_text;
      cfg.theta = pioracle::expand_theta_spec(theta_text);
    }
    if (cfg.theta.empty() && !cfg.theta_spec.empty())
      cfg.theta = pioracle::expand_theta_spec(cfg.theta_spec);
    if (!z_csv.empty()) cfg.z = pioracle::expand_theta_spec(z_csv);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  const auto out = pioracle::run_experiment(cfg);
  if (out.exit_code == 2 || out.exit_code == 3) {
    std::cerr << (out.exit_code == 2 ? "config error: " : "capacity error: ")
              << out.error << "\n";
    return out.exit_code;
  }

  if (!cfg.out_path.empty()) {
    std::ofstream f(cfg.out_path);
    if (!f) {
      std::cerr << "config error: cannot write " << cfg.out_path << "\n";
      return 2;
    }
    for (const auto& line : out.jsonl) f << line << "\n";
  } else {
    for (const auto& line : out.jsonl) std::cout << line << "\n";
  }
  if (!cfg.csv_path.empty()) {
    std::ofstream f(cfg.csv_path);
    if (!f) {
      std::cerr << "config error: cannot write " << cfg.csv_path << "\n";
      return 2;
    }
    f << pioracle::records_to_csv(out.jsonl);
  }
  std::cout << out.table;
  if (out.warning_flagged)
    std::cout << "warning: calibration flag raised (edge/infeasible/nonmonotone)\n";
  return out.exit_code;
}
