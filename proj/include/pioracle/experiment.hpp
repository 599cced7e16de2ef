#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pioracle/risk.hpp"
#include "pioracle/simple_rule.hpp"

namespace pioracle {

// A fully expanded batch run request. `theta_spec` keeps the original
// generator text (e.g. "sparse:8,4,3") for the output records.
struct ExperimentConfig {
  int schema = 1;
  std::string subcommand;
  std::string theta_spec;
  std::vector<double> theta;
  double sigma = 1.0;
  std::string problem = "estimate";
  double alpha = 0.1;
  std::string selection = "all";
  std::string ensemble = "exact";  // "exact" or "sampled:M"
  std::int64_t draws = 10000;
  std::int64_t calibration_draws = 100000;
  std::uint64_t seed = 1;
  std::int64_t subset_m = 10;       // bound subcommand
  std::string rule = "pi-oracle";   // risk subcommand
  std::vector<double> z;            // decision-time data, when given
  double null_lo = 0.0;
  double null_hi = 0.0;
  bool strict = false;
  std::string out_path;             // JSONL destination ("" = stdout)
  std::string csv_path;             // optional CSV projection
};

// Expands "a,b,c" literals or generator specs sparse:n,k,mu /
// twogroup:n,k,mu1,mu2 / grid:n,lo,hi.
std::vector<double> expand_theta_spec(const std::string& spec);

// Stable 64-bit hash of the canonical serialized config.
std::string config_hash(const ExperimentConfig& config);

// Parses the JSON object emitted in every record's "config" field (also the
// accepted --config file format). Unknown keys are ignored.
ExperimentConfig parse_config_json(const std::string& json_text);

// Throws std::invalid_argument (config) or CapacityError before computing.
void validate_config(const ExperimentConfig& config);

struct RunOutput {
  std::vector<std::string> jsonl;  // one JSON record per line
  std::string table;               // human-readable summary
  int exit_code = 0;               // 0 ok, 2 config, 3 capacity, 4 strict warning
  std::string error;
  bool warning_flagged = false;    // calibration hit an edge or infeasibility
};

RunOutput run_experiment(const ExperimentConfig& config);

// CSV projection of the JSONL records (numeric fields flattened).
std::string records_to_csv(const std::vector<std::string>& jsonl);

}  // namespace pioracle
