#include "pioracle/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace pioracle {

using nlohmann::json;

namespace {

constexpr std::uint64_t kCalTag = 0x0ca1;
constexpr std::uint64_t kValTag = 0x7a11;

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double to_double(const std::string& s) {
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("bad number: " + s);
  return v;
}

std::int64_t to_int(const std::string& s) {
  std::size_t pos = 0;
  const long long v = std::stoll(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("bad integer: " + s);
  return v;
}

Problem parse_problem(const std::string& s) {
  if (s == "global") return Problem::Global;
  if (s == "fdr") return Problem::Fdr;
  if (s == "sign") return Problem::Sign;
  if (s == "estimate") return Problem::Estimate;
  throw std::invalid_argument("unknown problem: " + s);
}

SelectionRule parse_selection(const std::string& s) {
  if (s == "all") return SelectionRule::all();
  if (s == "argmax") return SelectionRule::arg_max();
  if (s.rfind("topk:", 0) == 0)
    return SelectionRule::top_k(static_cast<int>(to_int(s.substr(5))));
  throw std::invalid_argument("unknown selection: " + s);
}

ProblemSpec spec_from(const ExperimentConfig& c) {
  ProblemSpec spec;
  spec.problem = parse_problem(c.problem);
  spec.alpha = c.alpha;
  spec.null_set = c.null_lo == 0.0 && c.null_hi == 0.0
                      ? NullSet::point_zero()
                      : NullSet::interval(c.null_lo, c.null_hi);
  spec.selection = parse_selection(c.selection);
  return spec;
}

PosteriorBackend backend_from(const ExperimentConfig& c) {
  const ParamVector theta(c.theta, c.sigma);
  if (c.ensemble == "exact") return PosteriorBackend::exact_pi(theta);
  if (c.ensemble.rfind("sampled:", 0) == 0) {
    const auto m = to_int(c.ensemble.substr(8));
    auto ens = std::make_shared<PermutationEnsemble>(
        PermutationEnsemble::sample(theta.n(), m, derive_seed(c.seed, 0xe25)));
    return PosteriorBackend::sampled_pi(theta, std::move(ens));
  }
  throw std::invalid_argument("unknown ensemble: " + c.ensemble);
}

json config_json(const ExperimentConfig& c) {
  json j;
  j["schema"] = c.schema;
  j["subcommand"] = c.subcommand;
  j["theta_spec"] = c.theta_spec;
  j["theta"] = c.theta;
  j["sigma"] = c.sigma;
  j["problem"] = c.problem;
  j["alpha"] = c.alpha;
  j["selection"] = c.selection;
  j["ensemble"] = c.ensemble;
  j["draws"] = c.draws;
  j["calibration_draws"] = c.calibration_draws;
  j["seed"] = c.seed;
  j["subset_m"] = c.subset_m;
  j["rule"] = c.rule;
  j["z"] = c.z;
  j["null_lo"] = c.null_lo;
  j["null_hi"] = c.null_hi;
  j["strict"] = c.strict;
  return j;
}

json report_json(const RiskReport& r) {
  json j;
  j["estimate"] = r.estimate;
  j["std_error"] = r.std_error;
  j["draws"] = r.draws;
  j["mc_seed"] = r.seed;
  j["ensemble_mode"] = r.ensemble_mode;
  j["ensemble_m"] = r.ensemble_m;
  j["bound_direction"] = bound_direction_name(r.bound_direction);
  json side = json::object();
  for (const auto& [name, stat] : r.side_channels)
    side[name] = {{"estimate", stat.estimate}, {"std_error", stat.std_error}};
  j["side_channels"] = side;
  return j;
}

json base_record(const ExperimentConfig& c, const std::string& kind) {
  json j;
  j["schema"] = c.schema;
  j["subcommand"] = c.subcommand;
  j["kind"] = kind;
  j["config_hash"] = config_hash(c);
  j["config"] = config_json(c);
  j["seed"] = c.seed;
  return j;
}

std::string rule_mode_label(const ExperimentConfig& c) {
  if (c.rule == "simple-oracle") return "simple";
  if (c.ensemble == "exact") return "exact";
  return c.ensemble;
}

}  // namespace

std::vector<double> expand_theta_spec(const std::string& spec) {
  if (spec.empty()) throw std::invalid_argument("empty theta spec");
  const auto parse_args = [&](const std::string& body, std::size_t expected) {
    const auto parts = split(body, ',');
    if (parts.size() != expected)
      throw std::invalid_argument("theta generator expects " +
                                  std::to_string(expected) + " args: " + spec);
    std::vector<double> args;
    for (const auto& p : parts) args.push_back(to_double(p));
    return args;
  };

  if (spec.rfind("sparse:", 0) == 0) {
    const auto a = parse_args(spec.substr(7), 3);
    const int n = static_cast<int>(a[0]), k = static_cast<int>(a[1]);
    if (n < 1 || k < 0 || k > n)
      throw std::invalid_argument("sparse: need 0 <= k <= n");
    std::vector<double> theta(n, 0.0);
    for (int i = 0; i < k; ++i) theta[n - 1 - i] = a[2];
    return theta;
  }
  if (spec.rfind("twogroup:", 0) == 0) {
    const auto a = parse_args(spec.substr(9), 4);
    const int n = static_cast<int>(a[0]), k = static_cast<int>(a[1]);
    if (n < 1 || k < 0 || k > n)
      throw std::invalid_argument("twogroup: need 0 <= k <= n");
    std::vector<double> theta(n, a[3]);
    for (int i = 0; i < k; ++i) theta[i] = a[2];
    return theta;
  }
  if (spec.rfind("grid:", 0) == 0) {
    const auto a = parse_args(spec.substr(5), 3);
    const int n = static_cast<int>(a[0]);
    if (n < 1) throw std::invalid_argument("grid: need n >= 1");
    std::vector<double> theta(n);
    for (int i = 0; i < n; ++i)
      theta[i] = n == 1 ? a[1] : a[1] + (a[2] - a[1]) * i / (n - 1);
    return theta;
  }
  // comma-separated literal
  std::vector<double> theta;
  for (const auto& p : split(spec, ',')) theta.push_back(to_double(p));
  return theta;
}

ExperimentConfig parse_config_json(const std::string& json_text) {
  const json j = json::parse(json_text);
  ExperimentConfig c;
  c.schema = j.value("schema", c.schema);
  c.subcommand = j.value("subcommand", c.subcommand);
  c.theta_spec = j.value("theta_spec", c.theta_spec);
  if (j.contains("theta")) c.theta = j["theta"].get<std::vector<double>>();
  if (c.theta.empty() && !c.theta_spec.empty())
    c.theta = expand_theta_spec(c.theta_spec);
  c.sigma = j.value("sigma", c.sigma);
  c.problem = j.value("problem", c.problem);
  c.alpha = j.value("alpha", c.alpha);
  c.selection = j.value("selection", c.selection);
  c.ensemble = j.value("ensemble", c.ensemble);
  c.draws = j.value("draws", c.draws);
  c.calibration_draws = j.value("calibration_draws", c.calibration_draws);
  c.seed = j.value("seed", c.seed);
  c.subset_m = j.value("subset_m", c.subset_m);
  c.rule = j.value("rule", c.rule);
  if (j.contains("z")) c.z = j["z"].get<std::vector<double>>();
  c.null_lo = j.value("null_lo", c.null_lo);
  c.null_hi = j.value("null_hi", c.null_hi);
  c.strict = j.value("strict", c.strict);
  return c;
}

std::string config_hash(const ExperimentConfig& config) {
  const std::string text = config_json(config).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

void validate_config(const ExperimentConfig& c) {
  static const std::vector<std::string> kSubcommands = {
      "posterior",       "global-test", "fdr-oracle", "sign-oracle",
      "select-estimate", "risk",        "bound",      "gap"};
  if (std::find(kSubcommands.begin(), kSubcommands.end(), c.subcommand) ==
      kSubcommands.end())
    throw std::invalid_argument("unknown subcommand: " + c.subcommand);
  if (c.schema != 1)
    throw std::invalid_argument("unsupported schema version");
  ParamVector theta(c.theta, c.sigma);  // validates n, finiteness, sigma
  if (!(c.alpha > 0.0 && c.alpha < 1.0))
    throw std::invalid_argument("alpha must be in (0,1)");
  if (c.draws < 1) throw std::invalid_argument("draws must be >= 1");
  if (c.subcommand != "posterior" && c.subcommand != "select-estimate" &&
      c.calibration_draws < 1000)
    throw std::invalid_argument("calibration_draws must be >= 1000");
  if (!(c.null_lo <= c.null_hi))
    throw std::invalid_argument("null set needs lo <= hi");
  parse_selection(c.selection);
  if (c.subcommand == "risk" || c.subcommand == "bound" || c.subcommand == "gap")
    parse_problem(c.problem);
  if (c.subcommand == "bound" && c.subset_m < 1)
    throw std::invalid_argument("subset_m must be >= 1");
  if (!c.z.empty() && static_cast<int>(c.z.size()) != theta.n())
    throw std::invalid_argument("z length must match theta length");
  for (double v : c.z)
    if (!std::isfinite(v)) throw std::invalid_argument("z must be finite");
  if (c.ensemble != "exact" && c.ensemble.rfind("sampled:", 0) != 0)
    throw std::invalid_argument("unknown ensemble: " + c.ensemble);
  if (c.ensemble.rfind("sampled:", 0) == 0 && to_int(c.ensemble.substr(8)) < 1)
    throw std::invalid_argument("sampled ensemble needs m >= 1");
  static const std::vector<std::string> kRules = {
      "pi-oracle", "simple-oracle", "bh", "chisq", "js", "identity", "naive-sign"};
  if (c.subcommand == "risk" &&
      std::find(kRules.begin(), kRules.end(), c.rule) == kRules.end())
    throw std::invalid_argument("unknown rule: " + c.rule);
}

namespace {

void run_posterior(const ExperimentConfig& c, std::vector<json>& records) {
  if (c.z.empty())
    throw std::invalid_argument("posterior subcommand needs --z");
  const auto backend = backend_from(c);
  const NullSet ns = c.null_lo == 0.0 && c.null_hi == 0.0
                         ? NullSet::point_zero()
                         : NullSet::interval(c.null_lo, c.null_hi);
  const auto s = backend.summarize(c.z, ns);
  json rec = base_record(c, "posterior");
  rec["q_null"] = s.q_null;
  rec["p_pos"] = s.p_pos;
  rec["p_neg"] = s.p_neg;
  rec["post_mean"] = s.post_mean;
  rec["log_marginal"] = backend.log_marginal(c.z);
  rec["ensemble_mode"] = backend.mode_label();
  records.push_back(std::move(rec));
}

void run_global_test(const ExperimentConfig& c, std::vector<json>& records,
                     bool& warning) {
  const ParamVector theta(c.theta, c.sigma);
  const auto backend = backend_from(c);
  const auto oracle = calibrate_global(backend, c.alpha, c.calibration_draws,
                                       derive_seed(c.seed, kCalTag));
  json rec = base_record(c, "calibration");
  rec["alpha"] = c.alpha;
  rec["log_c"] = oracle.log_c;
  rec["c"] = oracle.c();
  rec["log_c_se"] = oracle.log_c_se;
  rec["degenerate"] = oracle.degenerate;
  rec["ensemble_mode"] = backend.mode_label();
  warning = warning || oracle.degenerate;

  // Fresh-seed null validation of the achieved level.
  ProblemSpec spec;
  spec.problem = Problem::Global;
  spec.alpha = c.alpha;
  const ParamVector null_theta(std::vector<double>(theta.n(), 0.0), c.sigma);
  GlobalRule rule = [&oracle](std::span<const double> z) { return oracle.decide(z); };
  const auto null_report = estimate_risk(null_theta, rule, spec, c.draws,
                                         derive_seed(c.seed, kValTag));
  rec["null_rejection_rate"] =
      null_report.side_channels.at("rejection_rate").estimate;
  rec["null_rejection_rate_se"] =
      null_report.side_channels.at("rejection_rate").std_error;
  if (!c.z.empty()) {
    rec["lr"] = oracle.lr(c.z);
    rec["decision"] = oracle.decide(c.z).reject ? 1 : 0;
  }
  records.push_back(std::move(rec));
}

void run_lagrangian(const ExperimentConfig& c, ConstrainedProblem problem,
                    std::vector<json>& records, bool& warning) {
  const ParamVector theta(c.theta, c.sigma);
  const auto backend = backend_from(c);
  const NullSet ns = c.null_lo == 0.0 && c.null_hi == 0.0
                         ? NullSet::point_zero()
                         : NullSet::interval(c.null_lo, c.null_hi);
  const auto oracle =
      calibrate_lambda(backend, c.alpha, problem, c.calibration_draws,
                       derive_seed(c.seed, kCalTag), {}, ns);
  warning = warning || oracle.at_lower_edge || oracle.infeasible ||
            oracle.nonmonotone;

  json rec = base_record(c, "calibration");
  rec["alpha"] = c.alpha;
  rec["lambda_star"] = oracle.lambda_star;
  rec["constraint_at_star"] = oracle.constraint_at_star;
  rec["constraint_se"] = oracle.constraint_se;
  rec["at_lower_edge"] = oracle.at_lower_edge;
  rec["infeasible"] = oracle.infeasible;
  rec["nonmonotone"] = oracle.nonmonotone;
  rec["ensemble_mode"] = backend.mode_label();
  rec["trace_points"] = oracle.trace.size();

  ProblemSpec spec;
  spec.problem = problem == ConstrainedProblem::Fdr ? Problem::Fdr : Problem::Sign;
  spec.alpha = c.alpha;
  spec.null_set = ns;
  RiskReport validation;
  if (problem == ConstrainedProblem::Fdr) {
    MtRule rule = [&oracle](std::span<const double> z) { return oracle.decide_mt(z); };
    validation = estimate_risk(theta, rule, spec, c.draws, derive_seed(c.seed, kValTag));
  } else {
    SignRule rule = [&oracle](std::span<const double> z) { return oracle.decide_sign(z); };
    validation = estimate_risk(theta, rule, spec, c.draws, derive_seed(c.seed, kValTag));
  }
  rec["validation"] = report_json(validation);
  if (!c.z.empty()) {
    if (problem == ConstrainedProblem::Fdr) {
      const auto a = oracle.decide_mt(c.z);
      rec["decision"] = a.reject;
    } else {
      const auto a = oracle.decide_sign(c.z);
      std::string labels;
      for (auto l : a.labels)
        labels += l == SignLabel::Plus ? '+' : (l == SignLabel::Minus ? '-' : '.');
      rec["decision"] = labels;
    }
  }
  records.push_back(std::move(rec));
}

void run_select_estimate(const ExperimentConfig& c, std::vector<json>& records) {
  const ParamVector theta(c.theta, c.sigma);
  const auto backend = backend_from(c);
  ProblemSpec spec;
  spec.problem = Problem::Estimate;
  spec.selection = parse_selection(c.selection);
  const SelectiveEstimator est{backend, spec.selection, NullSet::point_zero()};
  EstRule rule = [&est](std::span<const double> z) { return est.decide(z); };
  auto report = estimate_risk(theta, rule, spec, c.draws, derive_seed(c.seed, kValTag));
  report.ensemble_mode = backend.mode_label();
  report.ensemble_m = backend.ensemble_size();
  json rec = base_record(c, "risk");
  rec["problem"] = "estimate";
  rec["rule"] = "pi-oracle";
  rec["selection"] = c.selection;
  rec["report"] = report_json(report);
  if (!c.z.empty()) rec["estimates"] = est.decide(c.z).values;
  records.push_back(std::move(rec));
}

void run_risk(const ExperimentConfig& c, std::vector<json>& records) {
  const ParamVector theta(c.theta, c.sigma);
  const auto spec = spec_from(c);
  RiskReport report;

  const auto incompatible = [&]() {
    return std::invalid_argument("rule '" + c.rule +
                                 "' is incompatible with problem '" + c.problem + "'");
  };

  if (c.rule == "pi-oracle" || c.rule == "simple-oracle") {
    const auto rules =
        c.rule == "pi-oracle"
            ? build_oracle_rules(backend_from(c), spec, c.calibration_draws, c.seed)
            : build_simple_rules(theta, spec, c.calibration_draws, c.seed);
    switch (spec.problem) {
      case Problem::Global:
        report = estimate_risk(theta, rules.global, spec, c.draws, c.seed);
        break;
      case Problem::Fdr:
        report = estimate_risk(theta, rules.mt, spec, c.draws, c.seed);
        break;
      case Problem::Sign:
        report = estimate_risk(theta, rules.sign, spec, c.draws, c.seed);
        break;
      case Problem::Estimate:
        report = estimate_risk(theta, rules.est, spec, c.draws, c.seed);
        break;
    }
  } else if (c.rule == "bh") {
    if (spec.problem != Problem::Fdr) throw incompatible();
    report = estimate_risk(theta, bh_rule(c.alpha, c.sigma), spec, c.draws, c.seed);
  } else if (c.rule == "chisq") {
    if (spec.problem != Problem::Global) throw incompatible();
    report = estimate_risk(theta, chi_square_rule(theta.n(), c.alpha, c.sigma),
                           spec, c.draws, c.seed);
  } else if (c.rule == "js") {
    if (spec.problem != Problem::Estimate) throw incompatible();
    report = estimate_risk(theta, james_stein_rule(theta.n(), c.sigma), spec,
                           c.draws, c.seed);
  } else if (c.rule == "identity") {
    if (spec.problem != Problem::Estimate) throw incompatible();
    report = estimate_risk(theta, identity_rule(), spec, c.draws, c.seed);
  } else if (c.rule == "naive-sign") {
    if (spec.problem != Problem::Sign) throw incompatible();
    report = estimate_risk(theta,
                           naive_sign_rule(normal_quantile(1.0 - c.alpha / 2), c.sigma),
                           spec, c.draws, c.seed);
  } else {
    throw std::invalid_argument("unknown rule: " + c.rule);
  }
  report.ensemble_mode = rule_mode_label(c);
  json rec = base_record(c, "risk");
  rec["problem"] = c.problem;
  rec["rule"] = c.rule;
  rec["selection"] = c.selection;
  rec["report"] = report_json(report);
  records.push_back(std::move(rec));
}

void run_bound(const ExperimentConfig& c, std::vector<json>& records) {
  const ParamVector theta(c.theta, c.sigma);
  const auto spec = spec_from(c);
  const auto lower = subset_lower_bound(theta, c.subset_m, spec, c.draws, c.seed,
                                        c.calibration_draws);
  const auto upper = mc_upper_approx(theta, c.subset_m, spec, c.draws, c.seed,
                                     c.calibration_draws);
  for (const auto* r : {&lower, &upper}) {
    json rec = base_record(c, "bound");
    rec["problem"] = c.problem;
    rec["subset_m"] = c.subset_m;
    rec["report"] = report_json(*r);
    records.push_back(std::move(rec));
  }
  if (theta.n() <= PermutationEnsemble::kDefaultExactCap) {
    const auto exact = exact_oracle_risk(theta, spec, c.draws, c.seed,
                                         c.calibration_draws);
    json rec = base_record(c, "bound");
    rec["problem"] = c.problem;
    rec["subset_m"] = c.subset_m;
    rec["report"] = report_json(exact);
    records.push_back(std::move(rec));
  }
}

void run_gap(const ExperimentConfig& c, std::vector<json>& records) {
  const ParamVector theta(c.theta, c.sigma);
  const auto spec = spec_from(c);
  const auto gap = gap_estimate(theta, spec, c.draws, c.seed, c.calibration_draws);
  json rec = base_record(c, "gap");
  rec["problem"] = c.problem;
  rec["risk_simple"] = report_json(gap.risk_simple);
  rec["risk_pi"] = report_json(gap.risk_pi);
  rec["gap"] = gap.gap;
  rec["gap_se"] = gap.gap_se;
  records.push_back(std::move(rec));
}

std::string summarize_records(const std::vector<json>& records) {
  std::ostringstream os;
  for (const auto& rec : records) {
    os << rec.value("subcommand", "?") << " [" << rec.value("kind", "?") << "]";
    if (rec.contains("rule")) os << " rule=" << rec["rule"].get<std::string>();
    if (rec.contains("problem")) os << " problem=" << rec["problem"].get<std::string>();
    if (rec.contains("report")) {
      const auto& r = rec["report"];
      os << " estimate=" << r["estimate"].get<double>()
         << " se=" << r["std_error"].get<double>()
         << " bound=" << r["bound_direction"].get<std::string>();
    }
    if (rec.contains("lambda_star"))
      os << " lambda*=" << rec["lambda_star"].get<double>()
         << " constraint=" << rec["constraint_at_star"].get<double>();
    if (rec.contains("log_c")) os << " log_c=" << rec["log_c"].get<double>();
    if (rec.contains("gap")) os << " gap=" << rec["gap"].get<double>();
    if (rec.contains("null_rejection_rate"))
      os << " null_rate=" << rec["null_rejection_rate"].get<double>();
    os << "\n";
  }
  return os.str();
}

}  // namespace

RunOutput run_experiment(const ExperimentConfig& config) {
  RunOutput out;
  try {
    validate_config(config);
    std::vector<json> records;
    bool warning = false;
    if (config.subcommand == "posterior") {
      run_posterior(config, records);
    } else if (config.subcommand == "global-test") {
      run_global_test(config, records, warning);
    } else if (config.subcommand == "fdr-oracle") {
      run_lagrangian(config, ConstrainedProblem::Fdr, records, warning);
    } else if (config.subcommand == "sign-oracle") {
      run_lagrangian(config, ConstrainedProblem::DirFdr, records, warning);
    } else if (config.subcommand == "select-estimate") {
      run_select_estimate(config, records);
    } else if (config.subcommand == "risk") {
      run_risk(config, records);
    } else if (config.subcommand == "bound") {
      run_bound(config, records);
    } else if (config.subcommand == "gap") {
      run_gap(config, records);
    }
    for (const auto& rec : records) out.jsonl.push_back(rec.dump());
    out.table = summarize_records(records);
    out.warning_flagged = warning;
    if (warning && config.strict) out.exit_code = 4;
  } catch (const CapacityError& e) {
    out.exit_code = 3;
    out.error = e.what();
  } catch (const std::invalid_argument& e) {
    out.exit_code = 2;
    out.error = e.what();
  }
  return out;
}

std::string records_to_csv(const std::vector<std::string>& jsonl) {
  // Union of scalar fields (report/side channels flattened), first-seen order.
  std::vector<std::string> columns;
  std::vector<json> flat;
  auto add_column = [&](const std::string& name) {
    if (std::find(columns.begin(), columns.end(), name) == columns.end())
      columns.push_back(name);
  };
  for (const auto& line : jsonl) {
    const json rec = json::parse(line);
    json row = json::object();
    std::function<void(const std::string&, const json&)> flatten =
        [&](const std::string& prefix, const json& node) {
          if (node.is_object()) {
            for (const auto& [k, v] : node.items()) {
              if (prefix.empty() && (k == "config" || k == "theta" || k == "z"))
                continue;
              flatten(prefix.empty() ? k : prefix + "." + k, v);
            }
          } else if (node.is_number() || node.is_string() || node.is_boolean()) {
            add_column(prefix);
            row[prefix] = node;
          }
        };
    flatten("", rec);
    flat.push_back(std::move(row));
  }
  std::ostringstream os;
  for (std::size_t i = 0; i < columns.size(); ++i)
    os << (i ? "," : "") << columns[i];
  os << "\n";
  for (const auto& row : flat) {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (i) os << ",";
      if (row.contains(columns[i])) {
        const auto& v = row[columns[i]];
        if (v.is_string()) os << v.get<std::string>();
        else os << v.dump();
      }
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace pioracle
